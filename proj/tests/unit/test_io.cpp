#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <sstream>

#include "loopclose/io.hpp"
#include "oracles.hpp"

using namespace loopclose;

namespace {

constexpr double kPi = std::numbers::pi;

Pose3d random_pose3(Lcg64& rng) {
    Pose3d p = Pose3d::Identity();
    const Eigen::Vector3d axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
    p.rotate(Eigen::AngleAxisd(rng.uniform(-kPi, kPi), axis.normalized()));
    p.pretranslate(Eigen::Vector3d(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-10, 10)));
    return p;
}

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::IoError;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("loopclose_io_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Fields, SplitAndParse) {
    const auto f = split_fields("  a\tb  c\r");
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[2], "c");
    EXPECT_EQ(parse_double("+1.5e3", 1), 1500.0);
    EXPECT_EQ(code_of([] { parse_double("nan", 4); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_double("1.0x", 4); }), ErrorCode::ParseError);
    EXPECT_EQ(parse_index("42", 1), 42u);
    EXPECT_EQ(code_of([] { parse_index("-1", 2); }), ErrorCode::ParseError);
    Lcg64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.gaussian() * std::pow(10.0, rng.uniform(-30, 30));
        EXPECT_EQ(parse_double(format_double(v), 1), v);
    }
}

TEST(Planar, AxisMaps) {
    Pose3d p = Pose3d::Identity();
    p.rotate(Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitZ()));
    p.translation() << 1, 2, 3;
    const auto xy = to_planar(p, AxisMap::XY);
    EXPECT_NEAR(xy.x, 1, 1e-12);
    EXPECT_NEAR(xy.y, 2, 1e-12);
    EXPECT_NEAR(xy.theta, 0.7, 1e-12);
    const auto xz = to_planar(p, AxisMap::XZ);
    EXPECT_NEAR(xz.y, 3, 1e-12);
    const auto back = to_planar(from_planar(Pose2d(4, -1, 2.5), AxisMap::XZ), AxisMap::XZ);
    EXPECT_NEAR(back.x, 4, 1e-12);
    EXPECT_NEAR(back.y, -1, 1e-12);
    EXPECT_NEAR(back.theta, 2.5, 1e-12);
    EXPECT_EQ(parse_axis_map("xz"), AxisMap::XZ);
    EXPECT_THROW(parse_axis_map("yz"), Error);
}

TEST(Kitti, IdentityLine) {
    std::istringstream in("1 0 0 0 0 1 0 0 0 0 1 0\n");
    const auto poses = read_kitti(in);
    ASSERT_EQ(poses.size(), 1u);
    EXPECT_TRUE(poses[0].isApprox(Pose3d::Identity()));
}

TEST(Kitti, RoundTripThroughFile) {
    Lcg64 rng(2);
    std::vector<Pose3d> poses;
    for (int i = 0; i < 100; ++i) poses.push_back(random_pose3(rng));
    const auto path = temp_dir("kitti") / "poses.txt";
    save_kitti(poses, path);
    const auto back = load_kitti(path);
    ASSERT_EQ(back.size(), poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) EXPECT_LE((back[i].matrix() - poses[i].matrix()).norm(), 1e-9);
}

TEST(Kitti, Malformed) {
    std::istringstream eleven("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1\n");
    try {
        read_kitti(eleven);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_EQ(e.location(), 2u);
    }
    std::istringstream empty("\n\n");
    EXPECT_EQ(code_of([&] { read_kitti(empty); }), ErrorCode::EmptyFile);
    std::istringstream skew("2 0 0 0 0 1 0 0 0 0 1 0\n");
    std::vector<std::string> warnings;
    read_kitti(skew, &warnings);
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_EQ(code_of([] { load_kitti("/nonexistent/poses.txt"); }), ErrorCode::IoError);
}

TEST(Tum, IdentityRecord) {
    std::istringstream in("# header\n0.0 0 0 0 0 0 0 1\n");
    const auto poses = read_tum(in);
    ASSERT_EQ(poses.size(), 1u);
    EXPECT_EQ(poses[0].timestamp, 0.0);
    EXPECT_TRUE(poses[0].pose.isApprox(Pose3d::Identity()));
}

TEST(Tum, RoundTrip) {
    Lcg64 rng(3);
    std::vector<TimedPose> poses;
    double t = 1000;
    for (int i = 0; i < 100; ++i) {
        t += rng.uniform(0.01, 0.5);
        poses.push_back(TimedPose{t, random_pose3(rng)});
    }
    std::stringstream ss;
    write_tum(ss, poses);
    const auto back = read_tum(ss);
    ASSERT_EQ(back.size(), poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        EXPECT_EQ(back[i].timestamp, poses[i].timestamp);
        EXPECT_LE((back[i].pose.matrix() - poses[i].pose.matrix()).norm(), 1e-9);
    }
}

TEST(Tum, WarningsAndErrors) {
    std::istringstream order("2 0 0 0 0 0 0 1\n1 1 0 0 0 0 0 1\n");
    std::vector<std::string> warnings;
    const auto poses = read_tum(order, &warnings);
    ASSERT_EQ(poses.size(), 2u);
    EXPECT_EQ(poses[0].timestamp, 2.0);
    EXPECT_EQ(poses[1].timestamp, 1.0);
    EXPECT_FALSE(warnings.empty());

    std::istringstream scaled("0 0 0 0 0 0 0 2\n");
    warnings.clear();
    EXPECT_TRUE(read_tum(scaled, &warnings)[0].pose.isApprox(Pose3d::Identity()));
    EXPECT_EQ(warnings.size(), 1u);

    std::istringstream zero("0 0 0 0 0 0 0 0\n");
    EXPECT_EQ(code_of([&] { read_tum(zero); }), ErrorCode::ParseError);
}

TEST(Pgm, TinyRoundTrip) {
    GrayImage img(2, 2, 0);
    img.pixels = {0, 255, 128, 64};
    const auto bytes = encode_pgm(img);
    EXPECT_EQ(bytes.substr(0, 2), "P5");
    EXPECT_EQ(decode_pgm(bytes), img);
}

TEST(Pgm, CommentsAndFiles) {
    const std::string with_comment = std::string("P5\n# made by hand\n3 1\n255\n") + "\x01\x02\x03";
    const auto img = decode_pgm(with_comment);
    EXPECT_EQ(img.width, 3);
    EXPECT_EQ(img.pixels[2], 3);
    Lcg64 rng(4);
    const auto random = oracle::random_image(rng, 40, 33);
    const auto path = temp_dir("pgm") / "nested" / "img.pgm";
    save_pgm(random, path);
    EXPECT_EQ(load_pgm(path), random);
}

TEST(Pgm, Unsupported) {
    EXPECT_EQ(code_of([] { decode_pgm("P5\n2 2\n65535\n12345678"); }), ErrorCode::UnsupportedFormat);
    EXPECT_EQ(code_of([] { decode_pgm("P2\n2 2\n255\n1 2 3 4"); }), ErrorCode::UnsupportedFormat);
    EXPECT_EQ(code_of([] { decode_pgm("P5\n2 2\n255\n12"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { decode_pgm(""); }), ErrorCode::UnsupportedFormat);
}

TEST(FeatureCacheFormat, RoundTrip) {
    Lcg64 rng(5);
    FeatureCache cache;
    cache.k = 15;
    for (std::size_t f = 0; f < 20; ++f) {
        FrameFeatures frame;
        frame.index = f;
        frame.features = oracle::random_features(rng, rng.below(16));
        for (auto& feat : frame.features) feat.keypoint.orientation = rng.uniform(-3, 3);
        cache.frames.push_back(frame);
    }
    std::stringstream ss;
    write_feature_cache(ss, cache);
    EXPECT_EQ(read_feature_cache(ss), cache);
}

TEST(FeatureCacheFormat, Malformed) {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return read_feature_cache(in);
    };
    EXPECT_EQ(code_of([&] { parse(""); }), ErrorCode::EmptyFile);
    EXPECT_EQ(code_of([&] { parse("LCFC 2 15\n"); }), ErrorCode::UnsupportedFormat);
    EXPECT_EQ(code_of([&] { parse("LCFC 1 15\nFRAME 0 1\n"); }), ErrorCode::ParseError);
    const std::string hex(64, 'f');
    EXPECT_NO_THROW(parse("LCFC 1 15\nFRAME 0 1\nFEAT 20 20 1 0 256 " + hex + "\n"));
    EXPECT_EQ(code_of([&] { parse("LCFC 1 15\nFRAME 0 1\nFEAT 20 20 1 0 255 " + hex + "\n"); }),
              ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { parse("LCFC 1 1\nFRAME 0 2\n"); }), ErrorCode::ParseError);
}

TEST(Correction, CarriesPointsWithTheirKeyframe) {
    const std::vector<Pose2d> before{Pose2d(0, 0, 0), Pose2d(5, 0, 0)};
    std::vector<MapPoint> pts{{Vector3d(1, 1, 2), 0}, {Vector3d(6, 0, -1), 1}};
    auto same = apply_correction(pts, before, before);
    EXPECT_TRUE(same[0].position.isApprox(pts[0].position));
    EXPECT_TRUE(same[1].position.isApprox(pts[1].position));

    const std::vector<Pose2d> moved{Pose2d(1, 0, 0), Pose2d(5, 0, 0)};
    const auto shifted = apply_correction(pts, before, moved);
    EXPECT_TRUE(shifted[0].position.isApprox(Vector3d(2, 1, 2)));
    EXPECT_TRUE(shifted[1].position.isApprox(pts[1].position));

    // Keyframe 1 turned a quarter about itself: (6, 0) sits 1 m ahead and ends up 1 m to its left.
    const std::vector<Pose2d> turned{Pose2d(0, 0, 0), Pose2d(5, 0, kPi / 2)};
    const auto rotated = apply_correction(pts, before, turned);
    EXPECT_NEAR(rotated[1].position.x(), 5, 1e-12);
    EXPECT_NEAR(rotated[1].position.y(), 1, 1e-12);
    EXPECT_NEAR(rotated[1].position.z(), -1, 1e-12);

    pts[0].owner = 9;
    EXPECT_EQ(code_of([&] { apply_correction(pts, before, before); }), ErrorCode::BadIndex);
    EXPECT_EQ(code_of([&] { apply_correction(pts, before, {Pose2d()}); }), ErrorCode::LengthMismatch);
}

TEST(Correction, PlanarCorrectionKeepsHeight) {
    Pose3d p = Pose3d::Identity();
    p.rotate(Eigen::AngleAxisd(0.2, Eigen::Vector3d::UnitX()));
    p.translation() << 1, 2, 7;
    const auto q = apply_planar_correction(p, Pose2d(0, 0, 0), Pose2d(3, 0, 0));
    EXPECT_NEAR(q.translation().x(), 4, 1e-12);
    EXPECT_NEAR(q.translation().z(), 7, 1e-12);
    EXPECT_TRUE(q.linear().isApprox(p.linear()));
}

TEST(Fuzz, ParsersRaiseStructuredErrors) {
    Lcg64 rng(6);
    for (int i = 0; i < 500; ++i) {
        std::string bytes(rng.below(80), '\0');
        for (auto& c : bytes) c = static_cast<char>(rng.below(256));
        std::istringstream a(bytes), b(bytes), c(bytes);
        try {
            read_kitti(a);
        } catch (const Error& e) {
            EXPECT_TRUE(e.location().has_value());
        }
        try {
            read_tum(b);
        } catch (const Error& e) {
            EXPECT_TRUE(e.location().has_value());
        }
        try {
            read_feature_cache(c);
        } catch (const Error& e) {
            EXPECT_TRUE(e.location().has_value());
        }
        try {
            decode_pgm(bytes);
        } catch (const Error& e) {
            EXPECT_TRUE(e.location().has_value());
        }
    }
}
