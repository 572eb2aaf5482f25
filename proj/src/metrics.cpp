#include "loopclose/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <ostream>
#include <thread>

#include "loopclose/io.hpp"

namespace loopclose {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
    if (a != b) {
        throw Error(ErrorCode::LengthMismatch,
                    "trajectories differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception wins.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < n; i = next++) {
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace

Pose2d rigid_alignment(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt) {
    require_same_length(estimated.size(), gt.size());
    const double n = static_cast<double>(estimated.size());
    Vector2d mu_e = Vector2d::Zero();
    Vector2d mu_g = Vector2d::Zero();
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        mu_e += estimated[i].translation();
        mu_g += gt[i].translation();
    }
    mu_e /= n;
    mu_g /= n;
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        h += (estimated[i].translation() - mu_e) * (gt[i].translation() - mu_g).transpose();
    }
    const double theta = std::atan2(h(0, 1) - h(1, 0), h(0, 0) + h(1, 1));
    const Pose2d rot(0, 0, theta);
    const Vector2d t = mu_g - rot.rotation() * mu_e;
    return Pose2d(t.x(), t.y(), theta);
}

double ate(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt, Alignment align) {
    require_same_length(estimated.size(), gt.size());
    if (estimated.size() < 2) {
        throw Error(ErrorCode::TooShort, "ATE needs at least two poses");
    }
    const Pose2d fit = align == Alignment::Rigid2d ? rigid_alignment(estimated, gt) : Pose2d();
    double sum = 0;
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        sum += (fit * estimated[i].translation() - gt[i].translation()).squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(estimated.size()));
}

double arc_length(const std::vector<Pose2d>& poses) {
    double total = 0;
    for (std::size_t i = 1; i < poses.size(); ++i) {
        total += (poses[i].translation() - poses[i - 1].translation()).norm();
    }
    return total;
}

std::vector<double> default_segment_lengths(double trajectory_length, double* scale_out) {
    double scale = 1;
    while (800 * scale > trajectory_length && scale > 1e-6) {
        scale /= 10;
    }
    if (scale_out) {
        *scale_out = scale;
    }
    std::vector<double> out;
    for (int i = 1; i <= 8; ++i) {
        out.push_back(100.0 * i * scale);
    }
    return out;
}

RelativeErrors kitti_rel_errors(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt,
                                std::optional<std::vector<double>> segment_lengths) {
    require_same_length(estimated.size(), gt.size());
    std::vector<double> dist(gt.size(), 0.0);
    for (std::size_t i = 1; i < gt.size(); ++i) {
        dist[i] = dist[i - 1] + (gt[i].translation() - gt[i - 1].translation()).norm();
    }
    const double total = gt.empty() ? 0.0 : dist.back();

    RelativeErrors out;
    if (segment_lengths) {
        out.segment_lengths = *segment_lengths;
        out.length_scale = 1;
    } else {
        out.segment_lengths = default_segment_lengths(total, &out.length_scale);
    }
    if (out.segment_lengths.empty()) {
        throw Error(ErrorCode::TooShort, "no segment lengths given");
    }

    constexpr double kSlack = 1e-9;
    double trans_sum = 0;
    double rot_sum = 0;
    for (const double len : out.segment_lengths) {
        if (!(len > 0)) {
            throw Error(ErrorCode::TooShort, "segment lengths must be positive");
        }
        SegmentError seg;
        seg.length = len;
        std::size_t last = 0;
        for (std::size_t first = 0; first < gt.size(); ++first) {
            last = std::max(last, first);
            while (last < gt.size() && dist[last] - dist[first] < len - kSlack) {
                ++last;
            }
            if (last == gt.size()) {
                break;
            }
            const Pose2d d_gt = between(gt[first], gt[last]);
            const Pose2d d_est = between(estimated[first], estimated[last]);
            const Pose2d err = between(d_gt, d_est);
            const double t = err.translation().norm() / len;
            const double r = std::abs(err.theta) * 180.0 / std::numbers::pi / len;
            seg.trans_percent += 100.0 * t;
            seg.rot_deg_per_meter += r;
            ++seg.segments;
        }
        trans_sum += seg.trans_percent;
        rot_sum += seg.rot_deg_per_meter;
        out.segments += seg.segments;
        if (seg.segments > 0) {
            seg.trans_percent /= static_cast<double>(seg.segments);
            seg.rot_deg_per_meter /= static_cast<double>(seg.segments);
        }
        out.per_length.push_back(seg);
    }
    if (out.segments == 0) {
        throw Error(ErrorCode::TooShort, "trajectory of length " + format_double(total) +
                                             " m is shorter than the smallest segment");
    }
    out.trans_percent = trans_sum / static_cast<double>(out.segments);
    out.rot_deg_per_meter = rot_sum / static_cast<double>(out.segments);
    return out;
}

ErrorReport evaluate(const std::vector<Pose2d>& estimated, const std::vector<Pose2d>& gt,
                     std::optional<std::vector<double>> segment_lengths) {
    ErrorReport r;
    r.ate_rmse = ate(estimated, gt, Alignment::None);
    r.ate_rmse_aligned = ate(estimated, gt, Alignment::Rigid2d);
    r.relative = kitti_rel_errors(estimated, gt, std::move(segment_lengths));
    return r;
}

void write_error_table(std::ostream& out, const ErrorReport& report) {
    const auto& rel = report.relative;
    out << "# segment lengths scaled by " << format_double(rel.length_scale) << " from 100..800 m:";
    for (const double l : rel.segment_lengths) {
        out << ' ' << format_double(l);
    }
    out << '\n';
    out << "metric\tvalue\n";
    out << "ate_rmse\t" << format_double(report.ate_rmse) << '\n';
    out << "ate_rmse_aligned\t" << format_double(report.ate_rmse_aligned) << '\n';
    out << "trans_err_percent\t" << format_double(rel.trans_percent) << '\n';
    out << "rot_err_deg_per_m\t" << format_double(rel.rot_deg_per_meter) << '\n';
    out << "segments\t" << rel.segments << '\n';
}

void write_error_series(std::ostream& out, const ErrorReport& report) {
    out << "# segment_length\ttrans_err_percent\trot_err_deg_per_m\n";
    for (const auto& seg : report.relative.per_length) {
        if (seg.segments == 0) {
            continue;
        }
        out << format_double(seg.length) << '\t' << format_double(seg.trans_percent) << '\t'
            << format_double(seg.rot_deg_per_meter) << '\n';
    }
}

bool loop_hits_revisit(const LoopCandidate& loop, const std::vector<RevisitPair>& pairs, std::size_t tolerance) {
    auto near = [tolerance](std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= tolerance; };
    return std::any_of(pairs.begin(), pairs.end(), [&](const RevisitPair& p) {
        return near(loop.current_index, p.second) && near(loop.matched_index, p.first);
    });
}

double SweepReport::success_rate(std::size_t k) const {
    std::size_t total = 0;
    std::size_t ok = 0;
    for (const auto& row : rows) {
        if (row.k == k) {
            ++total;
            ok += row.success ? 1 : 0;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(total);
}

std::vector<Keyframe> precompute_features(std::span<const Keyframe> frames, int fast_threshold) {
    std::vector<Keyframe> out(frames.begin(), frames.end());
    for (auto& kf : out) {
        if (!kf.image) {
            continue;
        }
        auto features = extract_features(*kf.image, kf.mask ? &*kf.mask : nullptr, fast_threshold);
        if (!features.empty()) {
            kf.features = std::move(features);
            kf.image.reset();
            kf.mask.reset();
        }
    }
    return out;
}

SweepReport success_sweep(std::span<const SynthDataset> corpus, const SweepOptions& options) {
    SweepReport report;
    std::vector<std::size_t> ks = options.k_values;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    std::vector<std::vector<Keyframe>> frames(corpus.size());
    parallel_for(corpus.size(), options.jobs, [&](std::size_t d) {
        frames[d] = precompute_features(corpus[d].keyframes, options.config.fast_threshold);
    });

    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const auto& name = corpus[d].spec.name;
        report.datasets.push_back(name.empty() ? "world-" + std::to_string(d) : name);
    }
    report.rows.resize(corpus.size() * ks.size());
    parallel_for(report.rows.size(), options.jobs, [&](std::size_t cell) {
        const std::size_t d = cell / ks.size();
        DetectorConfig config = options.config;
        config.k = ks[cell % ks.size()];
        if (options.min_matches_for_k) {
            config.min_matches = options.min_matches_for_k(config.k);
        }
        const auto det = run_sequence(frames[d], config, options.use_fullscan);
        const auto& loops = options.use_fullscan ? det.fullscan_loops : det.loops;
        SweepRow& row = report.rows[cell];
        row.dataset = report.datasets[d];
        row.k = config.k;
        row.loops = loops.size();
        row.pruning_ratio = det.pruning_ratio();
        row.success = std::any_of(loops.begin(), loops.end(), [&](const LoopCandidate& l) {
            return loop_hits_revisit(l, corpus[d].revisit_pairs, options.tolerance);
        });
    });

    for (std::size_t d = 0; d < corpus.size(); ++d) {
        bool seen_success = false;
        bool anomalous = false;
        std::optional<std::size_t> minimal;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const bool ok = report.rows[d * ks.size() + i].success;
            if (seen_success && !ok) {
                anomalous = true;
            }
            if (ok && !minimal) {
                minimal = ks[i];
            }
            if (!ok) {
                minimal.reset();
            }
            seen_success = seen_success || ok;
        }
        report.dataset_minimal_k.push_back(minimal);
        report.anomalous.push_back(anomalous);
    }
    for (const std::size_t k : ks) {
        if (!corpus.empty() && report.success_rate(k) == 1.0) {
            report.minimal_k = k;
            break;
        }
    }
    return report;
}

void write_sweep_table(std::ostream& out, const SweepReport& report) {
    out << "dataset\tK\tsuccess\tloops\tpruning_ratio\n";
    for (const auto& row : report.rows) {
        out << row.dataset << '\t' << row.k << '\t' << (row.success ? 1 : 0) << '\t' << row.loops << '\t'
            << format_double(row.pruning_ratio) << '\n';
    }
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
        out << "# " << report.datasets[d] << " minimalK=";
        if (report.dataset_minimal_k[d]) {
            out << *report.dataset_minimal_k[d];
        } else {
            out << "none";
        }
        if (report.anomalous[d]) {
            out << " ANOMALOUS (success not monotone in K)";
        }
        out << '\n';
    }
    out << "# minimalK=";
    if (report.minimal_k) {
        out << *report.minimal_k;
    } else {
        out << "none";
    }
    out << '\n';
}

void write_sweep_series(std::ostream& out, const SweepReport& report) {
    out << "# K\tsuccess_rate\n";
    std::vector<std::size_t> ks;
    for (const auto& row : report.rows) {
        if (std::find(ks.begin(), ks.end(), row.k) == ks.end()) {
            ks.push_back(row.k);
        }
    }
    std::sort(ks.begin(), ks.end());
    for (const std::size_t k : ks) {
        out << k << '\t' << format_double(report.success_rate(k)) << '\n';
    }
}

}  // namespace loopclose
