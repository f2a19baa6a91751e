#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pixelsne/io.hpp"
#include "pixelsne/pca.hpp"
#include "pixelsne/rng.hpp"
#include "support/oracles.hpp"

using namespace pixelsne;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    return p;
}

DataMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    DataMatrix m;
    m.n_items = n;
    m.n_dims = d;
    m.values.resize(n * d);
    Rng rng(seed);
    for (auto& v : m.values) v = rng.next_gaussian();
    return m;
}

double pairwise_dist(const DataMatrix& m, std::size_t i, std::size_t j) {
    return euclidean_distance(m.row(i), m.row(j), m.n_dims);
}

}  // namespace

TEST(LoadMatrix, ParsesTsv) {
    const auto p = temp_file("ingest_3x2.tsv", "1.0\t2.0\n3.0\t4.0\n5.0\t6.0\n");
    const LoadedMatrix lm = load_matrix(p, FileFormat::tsv);
    EXPECT_EQ(lm.data.n_items, 3u);
    EXPECT_EQ(lm.data.n_dims, 2u);
    EXPECT_DOUBLE_EQ(lm.data.values[3], 4.0);
    EXPECT_FALSE(lm.labels.has_value());
}

TEST(LoadMatrix, ParsesCsvWithLabels) {
    const auto p = temp_file("ingest_labels.csv", "1.0,2.0,a\n3.0,4.0,b\n5.5,6.5,a\n");
    const LoadedMatrix lm = load_matrix(p, FileFormat::csv, LabelColumn::last);
    EXPECT_EQ(lm.data.n_dims, 2u);
    ASSERT_TRUE(lm.labels.has_value());
    EXPECT_EQ((*lm.labels)[2], "a");
}

TEST(LoadMatrix, BinaryHeaderAndPayload) {
    std::string blob = "PSNE";
    blob.push_back(0x01);
    auto push_u32 = [&](std::uint32_t v) {
        for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
    };
    push_u32(4);
    push_u32(3);
    for (int i = 0; i < 12; ++i) push_u32(std::bit_cast<std::uint32_t>(static_cast<float>(i) * 0.5f));
    const auto p = temp_file("ingest_4x3.psne", blob);
    const LoadedMatrix lm = load_matrix(p, FileFormat::binary);
    EXPECT_EQ(lm.data.n_items, 4u);
    EXPECT_EQ(lm.data.n_dims, 3u);
    EXPECT_DOUBLE_EQ(lm.data.values[11], 5.5);
}

TEST(LoadMatrix, ReportsOffendingRow) {
    const auto p = temp_file("ingest_bad.tsv", "1.0\t2.0\nabc\t4.0\n");
    try {
        load_matrix(p, FileFormat::tsv);
        FAIL() << "expected a parse error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
    }
}

TEST(LoadMatrix, RejectsWrongFieldCount) {
    const auto p = temp_file("ingest_ragged.tsv", "1.0\t2.0\n3.0\n");
    EXPECT_THROW(load_matrix(p, FileFormat::tsv), std::runtime_error);
}

TEST(LoadMatrix, RejectsNonFinite) {
    const auto p = temp_file("ingest_nan.tsv", "1.0\t2.0\nnan\t4.0\n");
    EXPECT_THROW(load_matrix(p, FileFormat::tsv), std::runtime_error);
}

TEST(LoadMatrix, RejectsEmptyFile) {
    const auto p = temp_file("ingest_empty.tsv", "");
    EXPECT_THROW(load_matrix(p, FileFormat::tsv), std::runtime_error);
}

TEST(LoadMatrix, BinaryRoundTripsBitExact) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        DataMatrix m = random_matrix(7, 5, seed);
        for (auto& v : m.values) v = static_cast<double>(static_cast<float>(v));
        const fs::path a = fs::temp_directory_path() / "roundtrip_a.psne";
        const fs::path b = fs::temp_directory_path() / "roundtrip_b.psne";
        save_matrix_binary(m, a);
        const LoadedMatrix lm = load_matrix(a, FileFormat::binary);
        save_matrix_binary(lm.data, b);
        std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
        const std::string ba((std::istreambuf_iterator<char>(fa)), {});
        const std::string bb((std::istreambuf_iterator<char>(fb)), {});
        EXPECT_EQ(ba, bb);
        EXPECT_EQ(lm.data.values, m.values);
    }
}

TEST(PcaReduce, RecoversExact2dSubspace) {
    // Points in a planar subspace of R^10: distances survive projection.
    const std::size_t n = 40;
    DataMatrix m;
    m.n_items = n;
    m.n_dims = 10;
    m.values.assign(n * 10, 0.0);
    Rng rng(11);
    std::vector<double> u(10), v(10);
    for (auto& x : u) x = rng.next_gaussian();
    for (auto& x : v) x = rng.next_gaussian();
    std::vector<double> ab(2 * n);
    for (auto& x : ab) x = rng.next_gaussian();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 10; ++c)
            m.values[i * 10 + c] = ab[2 * i] * u[c] + ab[2 * i + 1] * v[c];

    const DataMatrix r = pca_reduce(m, 2);
    ASSERT_EQ(r.n_dims, 2u);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double orig = pairwise_dist(m, i, j);
            const double proj = pairwise_dist(r, i, j);
            EXPECT_NEAR(proj, orig, 1e-9 * std::max(1.0, orig));
        }
}

TEST(PcaReduce, FullBasisIsIsometry) {
    DataMatrix m = random_matrix(30, 6, 5);
    const DataMatrix r = pca_reduce(m, 6);
    for (std::size_t i = 0; i < m.n_items; ++i)
        for (std::size_t j = i + 1; j < m.n_items; ++j)
            EXPECT_NEAR(pairwise_dist(r, i, j), pairwise_dist(m, i, j), 1e-9);
}

TEST(PcaReduce, VarianceMatchesEigenOracle) {
    const DataMatrix m = random_matrix(100, 10, 17);
    const DataMatrix r = pca_reduce(m, 3);

    // Oracle: dense covariance eigendecomposition via Eigen.
    Eigen::MatrixXd a(100, 10);
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 10; ++j) a(i, j) = m.values[static_cast<std::size_t>(i) * 10 + j];
    const Eigen::RowVectorXd mean = a.colwise().mean();
    a.rowwise() -= mean;
    const Eigen::MatrixXd cov = a.transpose() * a / (100 - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd evals = es.eigenvalues().reverse();

    double top3 = evals(0) + evals(1) + evals(2);
    double proj_var = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < 100; ++i) mu += r.values[i * 3 + j];
        mu /= 100.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 100; ++i) {
            const double d = r.values[i * 3 + j] - mu;
            var += d * d;
        }
        var /= 99.0;
        // Per-component variance equals the matching eigenvalue...
        EXPECT_NEAR(var, evals(static_cast<Eigen::Index>(j)), 1e-9 * evals(0));
        proj_var += var;
    }
    // ...and the projection variance is the top-3 eigenvalue sum.
    EXPECT_NEAR(proj_var, top3, 1e-9 * top3);
}

TEST(PcaReduce, WideMatrixPathMatchesEigenOracle) {
    // n_dims > 256 exercises the randomized subspace path.
    const DataMatrix m = random_matrix(120, 300, 23);
    const DataMatrix r = pca_reduce(m, 4);

    Eigen::MatrixXd a(120, 300);
    for (int i = 0; i < 120; ++i)
        for (int j = 0; j < 300; ++j) a(i, j) = m.values[static_cast<std::size_t>(i) * 300 + j];
    a.rowwise() -= a.colwise().mean().eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a / (120 - 1));
    const Eigen::VectorXd evals = es.eigenvalues().reverse();

    for (std::size_t j = 0; j < 4; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < 120; ++i) mu += r.values[i * 4 + j];
        mu /= 120.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 120; ++i) {
            const double d = r.values[i * 4 + j] - mu;
            var += d * d;
        }
        var /= 119.0;
        EXPECT_NEAR(var, evals(static_cast<Eigen::Index>(j)), 1e-6 * evals(0));
    }
}

TEST(PcaReduce, TranslationInvariantUpToSign) {
    DataMatrix m = random_matrix(50, 8, 29);
    DataMatrix shifted = m;
    for (std::size_t i = 0; i < m.n_items; ++i)
        for (std::size_t c = 0; c < m.n_dims; ++c) shifted.values[i * 8 + c] += 100.0 + 3.0 * c;
    const DataMatrix a = pca_reduce(m, 3);
    const DataMatrix b = pca_reduce(shifted, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        double best = 1e300;
        for (double sign : {1.0, -1.0}) {
            double worst = 0.0;
            for (std::size_t i = 0; i < m.n_items; ++i)
                worst = std::max(worst,
                                 std::abs(a.values[i * 3 + j] - sign * b.values[i * 3 + j]));
            best = std::min(best, worst);
        }
        EXPECT_LT(best, 1e-7);
    }
}

TEST(PcaReduce, ExplainedVarianceNonIncreasing) {
    const DataMatrix m = random_matrix(80, 12, 31);
    const DataMatrix r = pca_reduce(m, 12);
    double prev = 1e300;
    for (std::size_t j = 0; j < 12; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < 80; ++i) mu += r.values[i * 12 + j];
        mu /= 80.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 80; ++i) {
            const double d = r.values[i * 12 + j] - mu;
            var += d * d;
        }
        EXPECT_LE(var, prev + 1e-9);
        prev = var;
    }
}

TEST(PcaReduce, RejectsBadTargets) {
    const DataMatrix m = random_matrix(10, 5, 37);
    EXPECT_THROW(pca_reduce(m, 6), std::invalid_argument);
    EXPECT_THROW(pca_reduce(m, 0), std::invalid_argument);

    DataMatrix constant;
    constant.n_items = 8;
    constant.n_dims = 3;
    constant.values.assign(24, 2.5);
    EXPECT_THROW(pca_reduce(constant, 2), std::runtime_error);
}
