#include "loopclose/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace loopclose {

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::istringstream open_text(const std::filesystem::path& path) { return std::istringstream(read_file(path)); }

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

struct PlaneAxes {
    int i, j, k;
};

PlaneAxes axes_of(AxisMap map) { return map == AxisMap::XY ? PlaneAxes{0, 1, 2} : PlaneAxes{0, 2, 1}; }

}  // namespace

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line) {
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    double v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError, at_line(line) + "not a finite number: '" + std::string(field) + "'", line);
    }
    return v;
}

std::size_t parse_index(std::string_view field, std::size_t line) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::ParseError, at_line(line) + "not a non-negative integer: '" + std::string(field) + "'",
                    line);
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

AxisMap parse_axis_map(std::string_view name) {
    if (name == "xy") return AxisMap::XY;
    if (name == "xz") return AxisMap::XZ;
    throw Error(ErrorCode::InvalidConfig, "axis map must be xy or xz, got '" + std::string(name) + "'");
}

const char* to_string(AxisMap map) { return map == AxisMap::XY ? "xy" : "xz"; }

Pose2d to_planar(const Pose3d& pose, AxisMap map) {
    const auto [i, j, k] = axes_of(map);
    const auto& r = pose.linear();
    const auto& t = pose.translation();
    return Pose2d(t(i), t(j), std::atan2(r(j, i), r(i, i)));
}

Pose3d from_planar(const Pose2d& pose, AxisMap map) {
    const auto [i, j, k] = axes_of(map);
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    Matrix3d r = Matrix3d::Zero();
    r(i, i) = c;
    r(i, j) = -s;
    r(j, i) = s;
    r(j, j) = c;
    r(k, k) = 1;
    Pose3d out = Pose3d::Identity();
    out.linear() = r;
    out.translation()(i) = pose.x;
    out.translation()(j) = pose.y;
    return out;
}

Pose3d apply_planar_correction(const Pose3d& pose, const Pose2d& before, const Pose2d& after, AxisMap map) {
    const Pose2d delta = compose(after, inverse(before));
    return from_planar(delta, map) * pose;
}

std::vector<Pose3d> read_kitti(std::istream& in, std::vector<std::string>* warnings) {
    std::vector<Pose3d> poses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        const auto f = split_fields(line);
        if (f.empty()) {
            continue;
        }
        if (f.size() != 12) {
            throw Error(ErrorCode::ParseError, at_line(line_no) + "expected 12 fields, got " + std::to_string(f.size()),
                        line_no);
        }
        Eigen::Matrix<double, 3, 4> m;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                m(r, c) = parse_double(f[static_cast<std::size_t>(r * 4 + c)], line_no);
            }
        }
        Pose3d p = Pose3d::Identity();
        p.linear() = m.leftCols<3>();
        p.translation() = m.col(3);
        if (warnings) {
            const double dev = (p.linear() * p.linear().transpose() - Matrix3d::Identity()).cwiseAbs().maxCoeff();
            if (dev > 1e-3) {
                warnings->push_back(at_line(line_no) + "rotation is not orthonormal (deviation " + format_double(dev) +
                                    ")");
            }
        }
        poses.push_back(p);
    }
    if (poses.empty()) {
        throw Error(ErrorCode::EmptyFile, "no poses in KITTI trajectory", line_no);
    }
    return poses;
}

void write_kitti(std::ostream& out, const std::vector<Pose3d>& poses) {
    for (const auto& p : poses) {
        const auto m = p.matrix();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                out << format_double(m(r, c)) << (r == 2 && c == 3 ? '\n' : ' ');
            }
        }
    }
}

std::vector<Pose3d> load_kitti(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    auto in = open_text(path);
    return read_kitti(in, warnings);
}

void save_kitti(const std::vector<Pose3d>& poses, const std::filesystem::path& path) {
    std::ostringstream out;
    write_kitti(out, poses);
    write_file(path, out.str());
}

std::vector<TimedPose> read_tum(std::istream& in, std::vector<std::string>* warnings) {
    std::vector<TimedPose> poses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        const auto f = split_fields(line);
        if (f.empty() || f[0].starts_with('#')) {
            continue;
        }
        if (f.size() != 8) {
            throw Error(ErrorCode::ParseError, at_line(line_no) + "expected 8 fields, got " + std::to_string(f.size()),
                        line_no);
        }
        double v[8];
        for (std::size_t i = 0; i < 8; ++i) {
            v[i] = parse_double(f[i], line_no);
        }
        Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
        const double norm = q.norm();
        if (norm < 1e-12) {
            throw Error(ErrorCode::ParseError, at_line(line_no) + "zero quaternion", line_no);
        }
        if (warnings && std::abs(norm - 1.0) > 1e-3) {
            warnings->push_back(at_line(line_no) + "quaternion norm " + format_double(norm) + " renormalized");
        }
        q.normalize();
        TimedPose tp;
        tp.timestamp = v[0];
        tp.pose = Pose3d::Identity();
        tp.pose.linear() = q.toRotationMatrix();
        tp.pose.translation() = Vector3d(v[1], v[2], v[3]);
        if (warnings && !poses.empty() && tp.timestamp <= poses.back().timestamp) {
            warnings->push_back(at_line(line_no) + "timestamp does not increase");
        }
        poses.push_back(tp);
    }
    if (poses.empty()) {
        throw Error(ErrorCode::EmptyFile, "no poses in TUM trajectory", line_no);
    }
    return poses;
}

void write_tum(std::ostream& out, const std::vector<TimedPose>& poses) {
    for (const auto& tp : poses) {
        const Eigen::Quaterniond q(tp.pose.linear());
        const auto& t = tp.pose.translation();
        out << format_double(tp.timestamp) << ' ' << format_double(t.x()) << ' ' << format_double(t.y()) << ' '
            << format_double(t.z()) << ' ' << format_double(q.x()) << ' ' << format_double(q.y()) << ' '
            << format_double(q.z()) << ' ' << format_double(q.w()) << '\n';
    }
}

std::vector<TimedPose> load_tum(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    auto in = open_text(path);
    return read_tum(in, warnings);
}

void save_tum(const std::vector<TimedPose>& poses, const std::filesystem::path& path) {
    std::ostringstream out;
    write_tum(out, poses);
    write_file(path, out.str());
}

GrayImage decode_pgm(std::string_view bytes) {
    constexpr long kMaxSide = 1 << 15;
    std::size_t pos = 0;
    if (bytes.size() < 2 || bytes[0] != 'P') {
        throw Error(ErrorCode::UnsupportedFormat, "not a PNM file", 0);
    }
    if (bytes[1] != '5') {
        throw Error(ErrorCode::UnsupportedFormat, std::string("unsupported PNM magic P") + bytes[1], 1);
    }
    pos = 2;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
    auto next_number = [&]() -> long {
        for (;;) {
            while (pos < bytes.size() && is_space(bytes[pos])) {
                ++pos;
            }
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
                continue;
            }
            break;
        }
        const std::size_t start = pos;
        long v = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000) {
                throw Error(ErrorCode::ParseError, "header value too large", pos);
            }
            ++pos;
        }
        if (pos == start) {
            throw Error(ErrorCode::ParseError, "expected a header number", pos);
        }
        return v;
    };
    const long width = next_number();
    const long height = next_number();
    const long maxval = next_number();
    if (width <= 0 || height <= 0 || width > kMaxSide || height > kMaxSide) {
        throw Error(ErrorCode::ParseError, "invalid image dimensions", pos);
    }
    if (maxval != 255) {
        throw Error(ErrorCode::UnsupportedFormat, "only maxval 255 is supported, got " + std::to_string(maxval), pos);
    }
    if (pos >= bytes.size() || !is_space(bytes[pos])) {
        throw Error(ErrorCode::ParseError, "missing whitespace after header", pos);
    }
    ++pos;
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - pos < count) {
        throw Error(ErrorCode::ParseError, "truncated pixel data", bytes.size());
    }
    GrayImage img(static_cast<int>(width), static_cast<int>(height));
    std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), count, img.pixels.begin());
    return img;
}

std::string encode_pgm(const GrayImage& img) {
    if (img.width <= 0 || img.height <= 0 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw Error(ErrorCode::InvalidImage, "image buffer does not match its dimensions");
    }
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    return out;
}

GrayImage load_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

void save_pgm(const GrayImage& img, const std::filesystem::path& path) { write_file(path, encode_pgm(img)); }

void write_feature_cache(std::ostream& out, const FeatureCache& cache) {
    out << "LCFC 1 " << cache.k << '\n';
    for (const auto& frame : cache.frames) {
        out << "FRAME " << frame.index << ' ' << frame.features.size() << '\n';
        for (const auto& f : frame.features) {
            out << "FEAT " << f.keypoint.x << ' ' << f.keypoint.y << ' ' << format_double(f.keypoint.response) << ' '
                << format_double(f.keypoint.orientation) << ' ' << f.score << ' ' << f.descriptor.to_hex() << '\n';
        }
    }
}

FeatureCache read_feature_cache(std::istream& in) {
    FeatureCache cache;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t expected = 0;  // FEAT lines still owed to the current frame
    auto parse_int = [](std::string_view s, std::size_t ln) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw Error(ErrorCode::ParseError, at_line(ln) + "not an integer: '" + std::string(s) + "'", ln);
        }
        return v;
    };
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        const auto f = split_fields(line);
        if (f.empty()) {
            continue;
        }
        if (!have_header) {
            if (f.size() != 3 || f[0] != "LCFC") {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "missing 'LCFC 1 <K>' header", line_no);
            }
            if (f[1] != "1") {
                throw Error(ErrorCode::UnsupportedFormat, at_line(line_no) + "unsupported cache version", line_no);
            }
            cache.k = parse_index(f[2], line_no);
            if (cache.k < 1 || cache.k > Descriptor256::kBits) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "K out of range", line_no);
            }
            have_header = true;
            continue;
        }
        if (f[0] == "FRAME") {
            if (expected != 0) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "previous frame is missing features", line_no);
            }
            if (f.size() != 3) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "expected FRAME <index> <count>", line_no);
            }
            FrameFeatures frame;
            frame.index = parse_index(f[1], line_no);
            expected = parse_index(f[2], line_no);
            if (expected > cache.k) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "frame holds more than K features", line_no);
            }
            cache.frames.push_back(std::move(frame));
        } else if (f[0] == "FEAT") {
            if (expected == 0 || cache.frames.empty()) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "FEAT outside of a frame", line_no);
            }
            if (f.size() != 7) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "expected 7 fields in FEAT", line_no);
            }
            InformativeFeature feat;
            feat.keypoint.x = parse_int(f[1], line_no);
            feat.keypoint.y = parse_int(f[2], line_no);
            feat.keypoint.response = parse_double(f[3], line_no);
            feat.keypoint.orientation = parse_double(f[4], line_no);
            feat.score = parse_int(f[5], line_no);
            const auto d = Descriptor256::from_hex(f[6]);
            if (!d) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "descriptor must be 64 hex characters", line_no);
            }
            feat.descriptor = *d;
            if (feat.score != informativeness_score(feat.descriptor)) {
                throw Error(ErrorCode::ParseError, at_line(line_no) + "score does not match descriptor popcount",
                            line_no);
            }
            cache.frames.back().features.push_back(feat);
            --expected;
        } else {
            throw Error(ErrorCode::ParseError, at_line(line_no) + "unknown record '" + std::string(f[0]) + "'",
                        line_no);
        }
    }
    if (!have_header) {
        throw Error(ErrorCode::EmptyFile, "feature cache is empty", line_no);
    }
    if (expected != 0) {
        throw Error(ErrorCode::ParseError, at_line(line_no) + "last frame is missing features", line_no);
    }
    return cache;
}

FeatureCache load_feature_cache(const std::filesystem::path& path) {
    auto in = open_text(path);
    return read_feature_cache(in);
}

void save_feature_cache(const FeatureCache& cache, const std::filesystem::path& path) {
    std::ostringstream out;
    write_feature_cache(out, cache);
    write_file(path, out.str());
}

std::vector<MapPoint> apply_correction(const std::vector<MapPoint>& points, const std::vector<Pose2d>& before,
                                       const std::vector<Pose2d>& after) {
    if (before.size() != after.size()) {
        throw Error(ErrorCode::LengthMismatch, "before and after trajectories differ in length");
    }
    std::vector<MapPoint> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        if (p.owner >= before.size()) {
            throw Error(ErrorCode::BadIndex, "map point owner " + std::to_string(p.owner) + " out of range");
        }
        const Pose2d delta = compose(after[p.owner], inverse(before[p.owner]));
        const Vector2d xy = delta * Vector2d(p.position.x(), p.position.y());
        out.push_back(MapPoint{Vector3d(xy.x(), xy.y(), p.position.z()), p.owner});
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "write failed for " + path.string());
    }
}

}  // namespace loopclose
