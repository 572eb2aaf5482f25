#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "loopclose/metrics.hpp"
#include "loopclose/rng.hpp"

using namespace loopclose;

namespace {

std::vector<Pose2d> random_walk(Lcg64& rng, std::size_t n) {
    std::vector<Pose2d> out{Pose2d(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3))};
    for (std::size_t i = 1; i < n; ++i) {
        out.push_back(compose(out.back(), Pose2d(rng.uniform(0.2, 1.0), rng.uniform(-0.1, 0.1), rng.uniform(-0.3, 0.3))));
    }
    return out;
}

std::vector<Pose2d> line_world() {
    WorldSpec s;
    s.shape = Shape::Line;
    s.num_poses = 200;
    s.scale = 100;
    return generate(s).gt_poses;
}

}  // namespace

TEST(Ate, Examples) {
    Lcg64 rng(1);
    const auto gt = random_walk(rng, 50);
    EXPECT_EQ(ate(gt, gt), 0.0);
    EXPECT_NEAR(ate(gt, gt, Alignment::Rigid2d), 0.0, 1e-12);
    std::vector<Pose2d> shifted;
    for (const auto& p : gt) shifted.push_back(Pose2d(p.x + 3, p.y + 4, p.theta));
    EXPECT_NEAR(ate(gt, shifted), 5.0, 1e-12);
    EXPECT_NEAR(ate(gt, shifted, Alignment::Rigid2d), 0.0, 1e-9);
    EXPECT_THROW(ate(gt, std::vector<Pose2d>(gt.begin(), gt.end() - 1)), Error);
}

TEST(Ate, AlignedIsInvariantUnderCommonRigidMotion) {
    Lcg64 rng(2);
    for (int t = 0; t < 30; ++t) {
        const auto a = random_walk(rng, 40);
        auto b = a;
        for (auto& p : b) p = Pose2d(p.x + 0.3 * rng.gaussian(), p.y + 0.3 * rng.gaussian(), p.theta);
        const Pose2d m(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-3, 3));
        std::vector<Pose2d> ma, mb;
        for (const auto& p : a) ma.push_back(compose(m, p));
        for (const auto& p : b) mb.push_back(compose(m, p));
        EXPECT_NEAR(ate(a, b, Alignment::Rigid2d), ate(ma, mb, Alignment::Rigid2d), 1e-9);
        EXPECT_LE(ate(a, b, Alignment::Rigid2d), ate(a, b) + 1e-12);
    }
}

TEST(Ate, RigidAlignmentRecoversTransform) {
    Lcg64 rng(3);
    const auto est = random_walk(rng, 30);
    const Pose2d m(2, -1, 0.8);
    std::vector<Pose2d> gt;
    for (const auto& p : est) gt.push_back(compose(m, p));
    const auto fit = rigid_alignment(est, gt);
    EXPECT_NEAR(fit.x, 2, 1e-9);
    EXPECT_NEAR(fit.y, -1, 1e-9);
    EXPECT_NEAR(fit.theta, 0.8, 1e-9);
}

TEST(KittiErrors, IdenticalIsExactlyZero) {
    const auto gt = line_world();
    const auto r = kitti_rel_errors(gt, gt);
    EXPECT_EQ(r.trans_percent, 0.0);
    EXPECT_EQ(r.rot_deg_per_meter, 0.0);
    EXPECT_GT(r.segments, 0u);
}

TEST(KittiErrors, UniformScaleGivesTwoPercent) {
    const auto gt = line_world();
    std::vector<Pose2d> est;
    for (const auto& p : gt) est.push_back(Pose2d(gt[0].x + 1.02 * (p.x - gt[0].x), gt[0].y + 1.02 * (p.y - gt[0].y), p.theta));
    const auto r = kitti_rel_errors(est, gt);
    EXPECT_NEAR(r.length_scale, 0.1, 1e-15);
    ASSERT_EQ(r.segment_lengths.size(), 8u);
    EXPECT_NEAR(r.segment_lengths.front(), 10, 1e-12);
    EXPECT_NEAR(r.trans_percent, 2.0, 0.05);
}

TEST(KittiErrors, SegmentScaling) {
    double scale = 0;
    const auto full = default_segment_lengths(5000, &scale);
    EXPECT_EQ(scale, 1.0);
    EXPECT_EQ(full.front(), 100.0);
    EXPECT_EQ(full.back(), 800.0);
    default_segment_lengths(40, &scale);
    EXPECT_NEAR(scale, 0.01, 1e-15);
}

TEST(KittiErrors, TooShort) {
    const auto gt = line_world();
    EXPECT_THROW(kitti_rel_errors(gt, gt, std::vector<double>{500}), Error);
    EXPECT_THROW(kitti_rel_errors(gt, gt, std::vector<double>{}), Error);
    EXPECT_THROW(kitti_rel_errors(gt, std::vector<Pose2d>(gt.begin(), gt.begin() + 5)), Error);
}

TEST(KittiErrors, LoopClosureReducesDrift) {
    const auto f = fixture::drifted_square();
    const auto before = kitti_rel_errors(f.data.odom_poses, f.data.gt_poses);
    const auto after = kitti_rel_errors(f.result.graph.vertices, f.data.gt_poses);
    EXPECT_LT(after.trans_percent, before.trans_percent);
}

TEST(ErrorTable, EstimateEqualsGroundTruth) {
    const auto gt = line_world();
    std::ostringstream out, series;
    const auto report = evaluate(gt, gt);
    write_error_table(out, report);
    write_error_series(series, report);
    EXPECT_NE(out.str().find("ate_rmse\t0\n"), std::string::npos);
    EXPECT_NE(out.str().find("trans_err_percent\t0\n"), std::string::npos);
    EXPECT_NE(series.str().find("10\t0\t0\n"), std::string::npos);
}

TEST(Sweep, PlantedOverlapFlipsPastTwenty) {
    WorldSpec s;
    s.shape = Shape::Square;
    s.num_poses = 40;
    s.feature_mode = FeatureMode::Descriptors;
    s.landmarks_per_cell = 2;
    s.name = "planted";
    const std::vector<SynthDataset> corpus{plant_matches(generate(s), 10)};
    SweepOptions opt;
    for (std::size_t k = 4; k <= 30; ++k) opt.k_values.push_back(k);
    opt.use_fullscan = true;
    opt.min_matches_for_k = [](std::size_t k) { return (k + 1) / 2; };
    const auto report = success_sweep(corpus, opt);
    for (const auto& row : report.rows) {
        EXPECT_EQ(row.success, row.k <= 20) << "K " << row.k;
    }
    EXPECT_TRUE(report.anomalous[0]);
    EXPECT_FALSE(report.dataset_minimal_k[0]);
    std::ostringstream out;
    write_sweep_table(out, report);
    EXPECT_NE(out.str().find("ANOMALOUS"), std::string::npos);
}

TEST(Sweep, ImagesSquareSucceedsAtFifteen) {
    const std::vector<SynthDataset> corpus{generate(standard_corpus_specs()[0])};
    SweepOptions opt;
    opt.k_values = {15};
    const auto report = success_sweep(corpus, opt);
    EXPECT_EQ(report.success_rate(15), 1.0);
    EXPECT_EQ(report.minimal_k, 15u);
}

TEST(Sweep, FullScanBoundsWindowedSuccess) {
    const auto specs = standard_corpus_specs();
    const std::vector<SynthDataset> corpus = generate_corpus({specs[0], specs[1]}, 2);
    SweepOptions opt;
    opt.k_values = {4, 6, 8, 15};
    opt.jobs = 2;
    const auto windowed = success_sweep(corpus, opt);
    opt.use_fullscan = true;
    const auto full = success_sweep(corpus, opt);
    ASSERT_EQ(windowed.rows.size(), full.rows.size());
    for (std::size_t i = 0; i < windowed.rows.size(); ++i) {
        EXPECT_LE(windowed.rows[i].success, full.rows[i].success) << windowed.rows[i].dataset << " K " << windowed.rows[i].k;
    }
    std::ostringstream series;
    write_sweep_series(series, windowed);
    EXPECT_NE(series.str().find("15\t1\n"), std::string::npos);
}

TEST(Sweep, JobCountDoesNotChangeResult) {
    const std::vector<SynthDataset> corpus{generate(standard_corpus_specs()[1])};
    SweepOptions opt;
    opt.k_values = {5, 9, 15};
    std::ostringstream a, b;
    write_sweep_table(a, success_sweep(corpus, opt));
    opt.jobs = 3;
    write_sweep_table(b, success_sweep(corpus, opt));
    EXPECT_EQ(a.str(), b.str());
}
