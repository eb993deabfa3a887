#include <gtest/gtest.h>

#include <set>

#include "mtsu/core.hpp"
#include "test_util.hpp"

using namespace mtsu;
using mtsu::testing::random_library;

namespace {

SpectralLibrary two_by_two() {
    Matrix a(3, 2), b(3, 2);
    a << 0.1, 0.2,
         0.3, 0.4,
         0.5, 0.6;
    b << 0.9, 0.8,
         0.7, 0.6,
         0.5, 0.4;
    return SpectralLibrary({a, b});
}

} // namespace

TEST(SpectralLibrary, ModelCountIsProductOfSizes) {
    Rng rng(1);
    auto lib = random_library(rng, 10, {2, 3, 4});
    EXPECT_EQ(lib.model_count(), 24u);
    EXPECT_EQ(lib.bands(), 10u);
    EXPECT_EQ(lib.materials(), 3u);
}

TEST(SpectralLibrary, RejectsBadInput) {
    Matrix ok = Matrix::Constant(4, 2, 0.5);
    Matrix out_of_range = ok;
    out_of_range(0, 0) = 1.5;
    Matrix nan = ok;
    nan(1, 1) = std::nan("");
    EXPECT_THROW(SpectralLibrary({out_of_range}), InputError);
    EXPECT_THROW(SpectralLibrary({nan}), InputError);
    EXPECT_THROW(SpectralLibrary({ok, Matrix::Constant(3, 2, 0.5)}), ShapeError);
    EXPECT_THROW(SpectralLibrary({Matrix(4, 0)}), InputError);
    // L must exceed P
    EXPECT_THROW(SpectralLibrary({Matrix::Constant(2, 1, 0.1), Matrix::Constant(2, 1, 0.2)}), InputError);
    EXPECT_THROW(SpectralLibrary(std::vector<Matrix>{}), InputError);
}

TEST(RealizeModel, SingleModelLibrary) {
    Matrix a = Matrix::Constant(4, 1, 0.2), b = Matrix::Constant(4, 1, 0.7);
    SpectralLibrary lib({a, b});
    Matrix M = realize_model(lib, ModelIndex{{0, 0}});
    ASSERT_EQ(M.rows(), 4);
    ASSERT_EQ(M.cols(), 2);
    EXPECT_TRUE(M.col(0).isApprox(a.col(0)));
    EXPECT_TRUE(M.col(1).isApprox(b.col(0)));
}

TEST(RealizeModel, PicksRequestedColumns) {
    auto lib = two_by_two();
    Matrix M = realize_model(lib, ModelIndex{{1, 0}});
    EXPECT_EQ(M.col(0), lib.signature(0, 1));
    EXPECT_EQ(M.col(1), lib.signature(1, 0));
}

TEST(RealizeModel, InvalidIndexThrows) {
    auto lib = two_by_two();
    EXPECT_THROW(lib.realize(ModelIndex{{2, 0}}), InvalidIndexError);
    EXPECT_THROW(lib.realize(ModelIndex{{0}}), InvalidIndexError);
}

TEST(RealizeModel, InjectiveOnDistinctLibraries) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto lib = random_library(rng, 6, {2, 3, 2});
        ASSERT_TRUE(lib.within_material_distinct());
        std::vector<Matrix> seen;
        for_each_model(lib, [&](const ModelIndex& idx, const Matrix& M) {
            EXPECT_TRUE(M.isApprox(lib.realize(idx), 0.0));
            for (const auto& other : seen) EXPECT_FALSE(M == other);
            seen.push_back(M);
        });
        EXPECT_EQ(seen.size(), lib.model_count());
    }
}

TEST(ModelEnumerator, LexicographicLastFastest) {
    Rng rng(3);
    auto lib = random_library(rng, 5, {2, 3});
    std::vector<ModelIndex> order;
    for_each_model(lib, [&](const ModelIndex& idx, const Matrix&) { order.push_back(idx); });
    ASSERT_EQ(order.size(), 6u);
    EXPECT_EQ(order[0], (ModelIndex{{0, 0}}));
    EXPECT_EQ(order[1], (ModelIndex{{0, 1}}));
    EXPECT_EQ(order[3], (ModelIndex{{1, 0}}));
    EXPECT_TRUE(std::is_sorted(order.begin(), order.end()));
    for (std::size_t r = 0; r < order.size(); ++r) {
        EXPECT_EQ(model_rank(lib, order[r]), r);
        EXPECT_EQ(model_from_rank(lib, r), order[r]);
    }
    EXPECT_THROW(model_from_rank(lib, 6), InvalidIndexError);
}

TEST(SpectralLibrary, MeanEndmembers) {
    auto lib = two_by_two();
    Matrix M = lib.mean_endmembers();
    EXPECT_NEAR(M(0, 0), 0.15, 1e-15);
    EXPECT_NEAR(M(2, 1), 0.45, 1e-15);
}

TEST(SpectralLibrary, DuplicateSignatureDetected) {
    Matrix a(3, 2);
    a << 0.1, 0.1, 0.2, 0.2, 0.3, 0.3;
    SpectralLibrary lib({a});
    EXPECT_FALSE(lib.within_material_distinct());
}

TEST(HyperspectralSequence, LayoutAndValidation) {
    HyperspectralSequence seq(2, 3, 4);
    seq.pixel(1, 2)[3] = 0.5;
    EXPECT_EQ(seq.data()[(1 * 3 + 2) * 4 + 3], 0.5);
    EXPECT_EQ(seq.frame(1).size(), 12u);
    std::vector<double> bad(24, 0.0);
    bad[5] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(HyperspectralSequence(2, 3, 4, bad), InputError);
    EXPECT_THROW(HyperspectralSequence(2, 3, 4, std::vector<double>(23)), ShapeError);
}

TEST(ChangeMap, FirstFrameNeverFlagged) {
    ChangeMap c(3, 4);
    EXPECT_THROW(c.set(0, 1, true), InputError);
    c.set(2, 1, true);
    c.set(2, 3, true);
    EXPECT_EQ(c.count(2), 2u);
    EXPECT_EQ(c.total(), 2u);
    EXPECT_DOUBLE_EQ(c.fraction(2), 0.5);
}

TEST(AbundanceField, SimplexViolation) {
    AbundanceField f(1, 2, 2);
    f.at(0, 0) << 0.5, 0.5;
    f.at(0, 1) << 1.0, 0.0;
    EXPECT_EQ(f.simplex_violation(), 0.0);
    f.at(0, 1) << 1.1, -0.1;
    EXPECT_NEAR(f.simplex_violation(), 0.1, 1e-12);
}

TEST(RunLedger, Merge) {
    RunLedger a{3, 4, 1, 0.5}, b{1, 1, 1, 0.25};
    a += b;
    EXPECT_EQ(a.fcls_calls, 4u);
    EXPECT_EQ(a.residual_evals, 5u);
    EXPECT_EQ(a.reprocessed_pixels, 2u);
}
