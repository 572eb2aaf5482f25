#include "loopclose/detector.hpp"

#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>

#include "loopclose/io.hpp"

namespace loopclose {

void DetectorConfig::validate() const {
    if (k < 1 || k > Descriptor256::kBits) {
        throw Error(ErrorCode::InvalidConfig, "K must lie in [1, 256]");
    }
    if (cadence < 1) {
        throw Error(ErrorCode::InvalidConfig, "cadence must be >= 1");
    }
    if (min_loop_gap < 2) {
        throw Error(ErrorCode::InvalidConfig, "min loop gap must be >= 2");
    }
    if (fast_threshold < 1 || fast_threshold > 255) {
        throw Error(ErrorCode::InvalidConfig, "FAST threshold must lie in [1, 255]");
    }
    if (max_distance < 0 || max_distance > static_cast<int>(Descriptor256::kBits)) {
        throw Error(ErrorCode::InvalidConfig, "max distance must lie in [0, 256]");
    }
    if (min_matches < 1) {
        throw Error(ErrorCode::InvalidConfig, "min matches must be >= 1");
    }
}

std::size_t stored_bytes_bound(std::size_t k) {
    return k * sizeof(InformativeFeature) + sizeof(Pose3d) + sizeof(PlanarPoint<double>);
}

LoopDetector::LoopDetector(DetectorConfig config, bool execute_fullscan)
    : config_(config), execute_fullscan_(execute_fullscan) {
    config_.validate();
}

bool LoopDetector::is_check_frame(std::size_t index) const {
    return index >= config_.min_loop_gap + 2 && index % config_.cadence == 0;
}

std::size_t LoopDetector::features_stored() const {
    std::size_t n = 0;
    for (const auto& f : features_) {
        n += f.size();
    }
    return n;
}

std::size_t LoopDetector::stored_bytes() const {
    return features_stored() * sizeof(InformativeFeature) +
           poses_.size() * (sizeof(Pose3d) + sizeof(PlanarPoint<double>));
}

std::optional<LoopCandidate> LoopDetector::match_range(std::size_t current, std::size_t first,
                                                       std::size_t last) const {
    std::vector<IndexedFrame> window;
    window.reserve(last - first + 1);
    for (std::size_t i = first; i <= last; ++i) {
        window.push_back(IndexedFrame{i, features_[i]});
    }
    return detect_in_window(features_[current], window, config_.max_distance, config_.min_matches, current);
}

std::optional<LoopCandidate> LoopDetector::process_frame(const Keyframe& frame) {
    if (frame.index != poses_.size()) {
        throw Error(ErrorCode::IndexOrder,
                    "expected frame " + std::to_string(poses_.size()) + ", got " + std::to_string(frame.index),
                    frame.index);
    }
    std::vector<InformativeFeature> features;
    if (frame.image) {
        const MappedMask* mask = frame.mask ? &*frame.mask : nullptr;
        if (!mask) {
            ++frames_without_mask_;
        }
        features = extract_features(*frame.image, mask, config_.fast_threshold);
    } else if (!frame.features.empty()) {
        features = frame.features;
    } else {
        throw Error(ErrorCode::EmptyFrame, "frame carries neither image nor features", frame.index);
    }
    const PlanarPoint<double> planar = project_pose(frame.pose);

    poses_.push_back(frame.pose);
    projected_.push_back(planar);
    features_.push_back(select_top_k(std::move(features), config_.k));

    const std::size_t current = frame.index;
    if (!is_check_frame(current)) {
        return std::nullopt;
    }
    const auto window = compute_search_window<double>(projected_, current, config_.min_loop_gap);
    if (!window) {
        return std::nullopt;
    }
    FrameCheck check;
    check.index = current;
    check.window_start = window->start_index;
    check.window_end = window->end_index;
    check.geometric = !window->fallback;
    check.windowed_comparisons = window->size();
    check.fullscan_comparisons = current - config_.min_loop_gap + 1;
    checks_.push_back(check);

    if (execute_fullscan_) {
        if (auto full = match_range(current, 0, current - config_.min_loop_gap)) {
            fullscan_loops_.push_back(*full);
        }
    }
    auto loop = match_range(current, window->start_index, window->end_index);
    if (loop) {
        loops_.push_back(*loop);
    }
    return loop;
}

DetectionReport run_sequence(std::span<const Keyframe> frames, const DetectorConfig& config, bool execute_fullscan) {
    if (frames.empty()) {
        throw Error(ErrorCode::EmptySequence, "no frames to process");
    }
    const auto t0 = std::chrono::steady_clock::now();
    LoopDetector detector(config, execute_fullscan);
    for (const auto& frame : frames) {
        try {
            detector.process_frame(frame);
        } catch (const Error& e) {
            throw Error(e.code(), std::string(e.what()) + " (frame " + std::to_string(frame.index) + ")", frame.index);
        }
    }
    DetectionReport report;
    report.config = config;
    report.loops = detector.loops();
    report.fullscan_executed = execute_fullscan;
    report.fullscan_loops = detector.fullscan_loops();
    report.checks = detector.checks();
    for (const auto& c : report.checks) {
        report.comparisons_windowed += c.windowed_comparisons;
        report.comparisons_fullscan += c.fullscan_comparisons;
    }
    report.frames = detector.frame_count();
    report.features_stored = detector.features_stored();
    report.stored_bytes = detector.stored_bytes();
    report.frames_without_mask = detector.frames_without_mask();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void write_report(std::ostream& out, const DetectionReport& report, const std::vector<std::string>& extra_comments) {
    const auto& c = report.config;
    out << "# config k=" << c.k << " cadence=" << c.cadence << " fast_threshold=" << c.fast_threshold
        << " max_dist=" << c.max_distance << " min_matches=" << c.min_matches << " min_gap=" << c.min_loop_gap
        << " baseline=" << (report.fullscan_executed ? "fullscan" : "none") << '\n';
    for (const auto& line : extra_comments) {
        out << "# " << line << '\n';
    }
    if (report.frames_without_mask > 0) {
        out << "# note: " << report.frames_without_mask
            << " frame(s) had no mapped-pixel mask; detection used the full image\n";
    }
    for (const auto& loop : report.loops) {
        out << "LOOP " << loop.current_index << ' ' << loop.matched_index << ' ' << loop.pairs.size() << '\n';
    }
    for (const auto& loop : report.fullscan_loops) {
        out << "FULLSCAN_LOOP " << loop.current_index << ' ' << loop.matched_index << ' ' << loop.pairs.size()
            << '\n';
    }
    out << "COMPARISONS " << report.comparisons_windowed << ' ' << report.comparisons_fullscan << '\n';
    out << "FEATURES_STORED " << report.features_stored << '\n';
}

ParsedReport read_report(std::istream& in) {
    ParsedReport parsed;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto fields = split_fields(line);
        if (fields.empty() || fields[0].starts_with('#')) {
            continue;
        }
        auto need = [&](std::size_t n) {
            if (fields.size() != n) {
                throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                                       std::to_string(n) + " fields in " + std::string(fields[0]),
                            line_no);
            }
        };
        auto number = [&](std::size_t i) { return parse_index(fields[i], line_no); };
        if (fields[0] == "LOOP") {
            need(4);
            LoopCandidate loop;
            loop.current_index = number(1);
            loop.matched_index = number(2);
            if (loop.matched_index >= loop.current_index) {
                throw Error(ErrorCode::ParseError,
                            "line " + std::to_string(line_no) + ": matched index must precede current index",
                            line_no);
            }
            parsed.loops.push_back(loop);
            parsed.pair_counts.push_back(number(3));
        } else if (fields[0] == "FULLSCAN_LOOP") {
            need(4);
            number(1);
            number(2);
            number(3);
        } else if (fields[0] == "COMPARISONS") {
            need(3);
            parsed.comparisons_windowed = number(1);
            parsed.comparisons_fullscan = number(2);
        } else if (fields[0] == "FEATURES_STORED") {
            need(2);
            parsed.features_stored = number(1);
        } else {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line_no) + ": unknown record '" + std::string(fields[0]) + "'",
                        line_no);
        }
    }
    return parsed;
}

}  // namespace loopclose
