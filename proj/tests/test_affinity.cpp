#include <gtest/gtest.h>

#include "pixelsne/affinity.hpp"
#include "pixelsne/rng.hpp"
#include "support/oracles.hpp"

using namespace pixelsne;

namespace {

DataMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    DataMatrix m;
    m.n_items = n;
    m.n_dims = d;
    m.values.resize(n * d);
    Rng rng(seed);
    for (auto& v : m.values) v = rng.next_gaussian();
    return m;
}

// Dense mirror of a SparseAffinities for symmetry/sum checks.
std::vector<double> to_dense(const SparseAffinities& p) {
    std::vector<double> dense(p.n_items * p.n_items, 0.0);
    for (std::size_t i = 0; i < p.n_items; ++i)
        for (std::uint32_t e = p.row_offsets[i]; e < p.row_offsets[i + 1]; ++e)
            dense[i * p.n_items + p.cols[e]] = p.probs[e];
    return dense;
}

}  // namespace

TEST(CalibrateRow, EqualDistancesGiveUniformRow) {
    for (double u : {1.2, 2.0, 3.9}) {
        const std::vector<double> dists{2.5, 2.5, 2.5, 2.5, 2.5};
        const CalibratedRow row = calibrate_row(dists, u);
        for (double p : row.probs) EXPECT_NEAR(p, 0.2, 1e-12);
    }
}

TEST(CalibrateRow, MatchesHighResolutionBisection) {
    // k=2, distances (1, 2), u = 1.5; expectations frozen from a 1e-12
    // bracket bisection (sigma 0.90959338070914946, row .85972/.14028).
    const std::vector<double> dists{1.0, 2.0};
    const CalibratedRow row = calibrate_row(dists, 1.5);
    EXPECT_NEAR(row.sigma, 0.90959338070914946, 2e-5);
    EXPECT_NEAR(row.probs[0], 0.85972349300253526, 2e-5);
    EXPECT_NEAR(row.probs[1], 0.14027650699746474, 2e-5);
    EXPECT_NEAR(oracle::row_perplexity(row.probs), 1.5, 1e-5);

    const oracle::CalRow ref = oracle::calibrate_row_highres(dists, 1.5);
    EXPECT_NEAR(row.sigma, ref.sigma, 2e-5);
}

TEST(CalibrateRow, PerplexityHitsTarget) {
    Rng rng(3);
    std::vector<double> dists(5);
    for (auto& d : dists) d = 0.5 + rng.next_double();
    const CalibratedRow row = calibrate_row(dists, 3.0);
    EXPECT_NEAR(oracle::row_perplexity(row.probs), 3.0, 1e-5);
}

TEST(CalibrateRow, AllZeroDistances) {
    const std::vector<double> dists{0.0, 0.0, 0.0};
    const CalibratedRow row = calibrate_row(dists, 2.0);
    for (double p : row.probs) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
    EXPECT_GT(row.sigma, 0.0);
}

TEST(CalibrateRow, RejectsUnreachablePerplexity) {
    const std::vector<double> dists{1.0, 2.0, 3.0};
    EXPECT_THROW(calibrate_row(dists, 3.0), std::invalid_argument);
    EXPECT_THROW(calibrate_row(dists, 5.0), std::invalid_argument);
}

TEST(CalibrateRow, ScaleInvariance) {
    Rng rng(9);
    std::vector<double> dists(8);
    for (auto& d : dists) d = 0.1 + 3.0 * rng.next_double();
    const CalibratedRow base = calibrate_row(dists, 4.0);
    for (double c : {0.01, 7.0, 250.0}) {
        std::vector<double> scaled(dists);
        for (auto& d : scaled) d *= c;
        const CalibratedRow row = calibrate_row(scaled, 4.0);
        EXPECT_NEAR(row.sigma, base.sigma * c, 2e-4 * base.sigma * c);
        for (std::size_t j = 0; j < dists.size(); ++j)
            EXPECT_NEAR(row.probs[j], base.probs[j], 1e-9);
    }
}

TEST(CalibrateRow, MonotoneInDistance) {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> dists(10);
        for (auto& d : dists) d = rng.next_double() * 5.0;
        const CalibratedRow row = calibrate_row(dists, 6.0);
        for (std::size_t a = 0; a < dists.size(); ++a)
            for (std::size_t b = 0; b < dists.size(); ++b)
                if (dists[a] < dists[b]) EXPECT_GE(row.probs[a], row.probs[b] - 1e-15);
    }
}

TEST(Symmetrize, TwoPointForcedValues) {
    // n=2, p(2|1) = p(1|2) = 1 -> both joint entries 1/2.
    NeighborGraph g;
    g.k = 1;
    g.ids = {1, 0};
    g.dists = {1.0, 1.0};
    PerplexityCalibration cal;
    cal.k = 1;
    cal.sigmas = {1.0, 1.0};
    cal.conditional = {1.0, 1.0};
    const SparseAffinities p = symmetrize(g, cal);
    EXPECT_EQ(p.entry_count(), 2u);
    EXPECT_NEAR(p.probs[0], 0.5, 1e-15);
    EXPECT_NEAR(p.probs[1], 0.5, 1e-15);
    EXPECT_NEAR(p.total_mass(), 1.0, 1e-15);
}

TEST(Symmetrize, OneWayEdgeCountsMissingSideAsZero) {
    // 3 items; item 2's side never references 0: p_02 = a/(2n) on both sides.
    NeighborGraph g;
    g.k = 1;
    g.ids = {1, 0, 1};
    g.dists = {1.0, 1.0, 1.0};
    PerplexityCalibration cal;
    cal.k = 1;
    cal.sigmas = {1.0, 1.0, 1.0};
    cal.conditional = {1.0, 1.0, 1.0};
    const SparseAffinities p = symmetrize(g, cal);
    const auto dense = to_dense(p);
    EXPECT_NEAR(dense[0 * 3 + 1], (1.0 + 1.0) / 6.0, 1e-15);
    EXPECT_NEAR(dense[2 * 3 + 1], 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(dense[1 * 3 + 2], 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(p.total_mass(), 1.0, 1e-12);
}

TEST(Symmetrize, RandomGraphSumAndSymmetry) {
    const DataMatrix m = random_matrix(500, 8, 21);
    const NeighborGraph g = exact_knn(m, 12);
    const PerplexityCalibration cal = calibrate(g, 4.0);
    const SparseAffinities p = symmetrize(g, cal);
    EXPECT_NEAR(p.total_mass(), 1.0, 1e-9);
    EXPECT_LE(p.entry_count(), 2 * 12 * 500u);
    const auto dense = to_dense(p);
    for (std::size_t i = 0; i < 500; ++i) {
        EXPECT_EQ(dense[i * 500 + i], 0.0);
        for (std::size_t j = i + 1; j < 500; ++j)
            EXPECT_DOUBLE_EQ(dense[i * 500 + j], dense[j * 500 + i]);
    }
}

TEST(BuildAffinities, TwoFarPairsConcentrateMass) {
    // 4 points forming two distant pairs: almost all mass within pairs.
    DataMatrix m;
    m.n_items = 4;
    m.n_dims = 2;
    m.values = {0.0, 0.0, 1.0, 0.0, 500.0, 500.0, 501.0, 500.0};
    const SparseAffinities p = build_affinities(m, 1.0, KnnBackend::exact, 1);
    const auto dense = to_dense(p);
    const double pair1 = dense[0 * 4 + 1] + dense[1 * 4 + 0];
    const double pair2 = dense[2 * 4 + 3] + dense[3 * 4 + 2];
    EXPECT_GT(pair1, 0.49);
    EXPECT_GT(pair2, 0.49);

    // agrees with the dense-calibration oracle entrywise
    const auto joint = oracle::dense_joint_p(m, 1.0);
    EXPECT_NEAR(dense[0 * 4 + 1], joint[0 * 4 + 1], 1e-5);
    EXPECT_NEAR(dense[2 * 4 + 3], joint[2 * 4 + 3], 1e-5);
}

TEST(BuildAffinities, VpMatchesExactBackend) {
    const DataMatrix m = random_matrix(300, 10, 41);
    const SparseAffinities a = build_affinities(m, 12.0, KnnBackend::exact, 5);
    const SparseAffinities b = build_affinities(m, 12.0, KnnBackend::vp, 5);
    EXPECT_EQ(a.cols, b.cols);
    EXPECT_EQ(a.row_offsets, b.row_offsets);
    for (std::size_t e = 0; e < a.probs.size(); ++e) EXPECT_DOUBLE_EQ(a.probs[e], b.probs[e]);
}

TEST(BuildAffinities, RpBackendNormalizes) {
    const DataMatrix m = random_matrix(800, 16, 47);
    const SparseAffinities p = build_affinities(m, 10.0, KnnBackend::rp, 7);
    EXPECT_NEAR(p.total_mass(), 1.0, 1e-9);
}

TEST(BuildAffinities, RejectsOversizedPerplexity) {
    const DataMatrix m = random_matrix(30, 4, 53);
    EXPECT_THROW(build_affinities(m, 10.0, KnnBackend::exact, 1), std::invalid_argument);
}

TEST(AffinityProperty, SumAndSymmetryOverSeeds) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        DataMatrix m = random_matrix(40, 3, 1000 + seed);
        const SparseAffinities p = build_affinities(m, 3.0, KnnBackend::exact, seed);
        EXPECT_NEAR(p.total_mass(), 1.0, 1e-9);
        const auto dense = to_dense(p);
        for (std::size_t i = 0; i < 40; ++i)
            for (std::size_t j = i + 1; j < 40; ++j)
                ASSERT_DOUBLE_EQ(dense[i * 40 + j], dense[j * 40 + i]);
    }
}
