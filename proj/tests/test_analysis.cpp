#include <gtest/gtest.h>

#include "mtsu/analysis.hpp"
#include "mtsu/fm_mesma.hpp"
#include "test_util.hpp"

using namespace mtsu;
using mtsu::testing::random_library;

namespace {

// Material p's signatures differ only in band p, so differences across
// materials are orthogonal.
SpectralLibrary orthogonal_library() {
    Matrix a = Matrix::Constant(6, 3, 0.3), b = Matrix::Constant(6, 2, 0.5);
    a(0, 1) = 0.6;
    a(0, 2) = 0.9;
    b(1, 1) = 0.1;
    return SpectralLibrary({a, b});
}

struct NaiveGeometry {
    double min_sq = std::numeric_limits<double>::infinity(), max_gap = 0.0, mu = 0.0;
};

NaiveGeometry naive_geometry(const SpectralLibrary& lib) {
    NaiveGeometry g;
    const auto P = lib.materials();
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i < lib.count(p); ++i)
            for (std::size_t j = 0; j < lib.count(p); ++j) {
                if (i == j) continue;
                double sq = 0.0;
                for (std::size_t l = 0; l < lib.bands(); ++l) {
                    double d = lib.signature(p, i)[Eigen::Index(l)] - lib.signature(p, j)[Eigen::Index(l)];
                    sq += d * d;
                }
                g.min_sq = std::min(g.min_sq, sq);
                g.max_gap = std::max(g.max_gap, std::sqrt(sq));
                for (std::size_t q = 0; q < P; ++q) {
                    if (q == p) continue;
                    for (std::size_t k = 0; k < lib.count(q); ++k)
                        for (std::size_t m = 0; m < lib.count(q); ++m) {
                            if (k == m) continue;
                            double dot = 0.0;
                            for (std::size_t l = 0; l < lib.bands(); ++l)
                                dot += (lib.signature(p, i)[Eigen::Index(l)] - lib.signature(p, j)[Eigen::Index(l)]) *
                                       (lib.signature(q, k)[Eigen::Index(l)] - lib.signature(q, m)[Eigen::Index(l)]);
                            g.mu = std::max(g.mu, std::abs(dot));
                        }
                }
            }
    return g;
}

} // namespace

TEST(Theorem1, OrthogonalDifferencesHaveZeroCoherence) {
    auto lib = orthogonal_library();
    auto chk = theorem1_check(lib, 0.01, 0.01);
    EXPECT_EQ(chk.bounds.mu, 0.0);
    EXPECT_NEAR(chk.bounds.omega_m, 0.09, 1e-15);
    // 2 sqrt(2) 0.02 < 0.3
    EXPECT_TRUE(chk.holds);
    EXPECT_FALSE(theorem1_check(lib, 0.11, 0.0).holds);  // 2 sqrt(2) 0.11 > 0.3
}

TEST(Theorem1, ZeroNoiseLimit) {
    auto lib = orthogonal_library();
    EXPECT_TRUE(theorem1_check(lib, 0.0, 0.0).holds);
}

TEST(Theorem1, MatchesNaiveQuadrupleLoop) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed, 1);
        auto lib = random_library(rng, 7, {2 + seed % 3, 3, 1 + seed % 2});
        auto chk = theorem1_check(lib, 0.0, 0.0);
        auto g = naive_geometry(lib);
        EXPECT_NEAR(chk.bounds.omega_m, g.min_sq, 1e-12);
        EXPECT_NEAR(chk.bounds.omega_m_prime, g.max_gap, 1e-12);
        EXPECT_NEAR(chk.bounds.mu, g.mu, 1e-12);
        EXPECT_LE(chk.bounds.omega_m, chk.bounds.omega_m_prime * chk.bounds.omega_m_prime + 1e-15);
        EXPECT_EQ(chk.holds, g.min_sq - 2.0 * g.mu > 0.0);
    }
}

TEST(Theorem1, NoPairsIsAnError) {
    SpectralLibrary lib({Matrix::Constant(5, 1, 0.2), Matrix::Constant(5, 1, 0.4)});
    EXPECT_THROW(theorem1_check(lib, 0.0, 0.0), InputError);
    EXPECT_THROW(theorem1_check(orthogonal_library(), -1.0, 0.0), InputError);
}

TEST(Theorem1, LargeMaterialsSubsampled) {
    Rng rng(2);
    auto lib = random_library(rng, 10, {20, 3});
    auto chk = theorem1_check(lib, 0.0, 0.0);
    EXPECT_TRUE(chk.bounds.subsampled);
    EXPECT_FALSE(theorem1_check(random_library(rng, 10, {16, 3}), 0.0, 0.0).bounds.subsampled);
}

TEST(Theorem2, CollapsedLibrary) {
    SpectralLibrary lib({Matrix::Constant(5, 1, 0.2), Matrix::Constant(5, 1, 0.4)});
    auto chk = theorem2_check(lib, 0.1, 0.1, 0.7, 2.0);
    EXPECT_EQ(chk.bounds.omega_m_prime, 0.0);
    EXPECT_TRUE(chk.holds);  // 0.2 < 0.7 / 3
    EXPECT_FALSE(theorem2_check(lib, 0.1, 0.2, 0.7, 2.0).holds);
}

TEST(Theorem2, LargeFactorFails) {
    auto lib = orthogonal_library();
    EXPECT_FALSE(theorem2_check(lib, 0.0, 0.0, 100.0, 1e12).holds);
    EXPECT_THROW(theorem2_check(lib, 0.0, 0.0, 1.0, 0.5), InputError);
}

TEST(Theorem2, MaxGap) {
    auto lib = orthogonal_library();
    auto chk = theorem2_check(lib, 0.0, 0.0, 10.0, 1.0);
    EXPECT_NEAR(chk.bounds.omega_m_prime, 0.6, 1e-15);
}

// Theorem-one premises satisfied on a tiny, well separated library.
TEST(Theorem1, PremisesImplyRecovery) {
    auto lib = orthogonal_library();
    const double omega_e = 0.02, omega_delta = 0.0;
    ASSERT_TRUE(theorem1_check(lib, omega_e, omega_delta).holds);
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const ModelIndex truth = mtsu::testing::random_model(rng, lib);
        Vector a = mtsu::testing::random_simplex(rng, 2);
        Vector e = mtsu::testing::random_vector(rng, 6, -1.0, 1.0);
        e *= omega_e * rng.uniform() / e.norm();
        RunLedger ledger;
        auto sel = select_model(lib, lib.realize(truth) * a + e, a, ledger);
        // a zero weight leaves a material unidentifiable, so compare on the
        // columns that carry signal
        for (std::size_t p = 0; p < 2; ++p)
            if (a[Eigen::Index(p)] > 0.5) {
                EXPECT_EQ(sel.model[p], truth[p]);
            }
    }
}

TEST(ModelImageNorms, ByEnumeration) {
    Rng rng(4);
    auto lib = random_library(rng, 6, {2, 3});
    Vector v(2);
    v << 0.3, -0.2;
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double n = (0.3 * lib.signature(0, i) - 0.2 * lib.signature(1, j)).norm();
            hi = std::max(hi, n);
            lo = std::min(lo, n);
        }
    EXPECT_NEAR(max_model_image_norm(lib, v), hi, 1e-15);
    EXPECT_NEAR(min_model_image_norm(lib, v), lo, 1e-15);
}
