#include <gtest/gtest.h>

#include "mtsu/fm_mesma.hpp"
#include "mtsu/synth.hpp"
#include "test_util.hpp"

using namespace mtsu;
using mtsu::testing::random_library;
using mtsu::testing::random_model;
using mtsu::testing::random_simplex;

namespace {

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.L = 40;
    cfg.N = 60;
    cfg.T = 5;
    cfg.kappa = 0.1;
    cfg.snr_db = 35.0;
    cfg.seed = seed;
    return cfg;
}

void expect_ledger_identities(const FmMesmaOutput& out, const SpectralLibrary& lib, std::size_t N) {
    const std::uint64_t mc = lib.model_count();
    EXPECT_EQ(out.frame_ledgers[0].fcls_calls, N * mc);
    EXPECT_EQ(out.frame_ledgers[0].residual_evals, 0u);
    std::uint64_t fcls_total = N * mc, evals_total = 0, reprocessed = 0;
    for (std::size_t t = 1; t < out.frame_ledgers.size(); ++t) {
        const std::uint64_t changed = out.changes.count(t);
        EXPECT_EQ(out.frame_ledgers[t].residual_evals, N * mc) << "frame " << t;
        EXPECT_EQ(out.frame_ledgers[t].fcls_calls, (N - changed) + changed * mc) << "frame " << t;
        EXPECT_EQ(out.frame_ledgers[t].reprocessed_pixels, changed);
        fcls_total += (N - changed) + changed * mc;
        evals_total += N * mc;
        reprocessed += changed;
    }
    EXPECT_EQ(out.ledger.fcls_calls, fcls_total);
    EXPECT_EQ(out.ledger.residual_evals, evals_total);
    EXPECT_EQ(out.ledger.reprocessed_pixels, reprocessed);
}

} // namespace

TEST(SelectModel, ExactFit) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed, 1);
        auto lib = random_library(rng, 30, {3, 3, 2});
        const ModelIndex truth = random_model(rng, lib);
        Vector a = (random_simplex(rng, 3).array() + 0.1).matrix() / 1.3;
        RunLedger ledger;
        auto sel = select_model(lib, lib.realize(truth) * a, a, ledger);
        EXPECT_EQ(sel.model, truth);
        EXPECT_LE(sel.residual, 1e-10);
        EXPECT_EQ(ledger.residual_evals, 18u);
        EXPECT_EQ(ledger.fcls_calls, 0u);
    }
}

TEST(SelectModel, SingleModel) {
    Rng rng(2);
    auto lib = random_library(rng, 10, {1, 1});
    Vector y = mtsu::testing::random_vector(rng, 10);
    Vector a(2);
    a << 0.3, 0.7;
    RunLedger ledger;
    auto sel = select_model(lib, y, a, ledger);
    EXPECT_NEAR(sel.residual, (y - lib.realize(ModelIndex{{0, 0}}) * a).norm(), 1e-14);
}

TEST(SelectModel, MatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed, 3);
        auto lib = random_library(rng, 12, {2, 4, 3});
        Vector y = mtsu::testing::random_vector(rng, 12);
        Vector a = random_simplex(rng, 3);
        double best = std::numeric_limits<double>::infinity();
        ModelIndex arg;
        for_each_model(lib, [&](const ModelIndex& idx, const Matrix& M) {
            const double r = (y - M * a).norm();
            if (r < best) {
                best = r;
                arg = idx;
            }
        });
        RunLedger ledger;
        auto sel = select_model(lib, y, a, ledger);
        EXPECT_EQ(sel.model, arg);
        EXPECT_NEAR(sel.residual, best, 1e-12);
    }
}

TEST(SelectModel, TieGoesToLowestIndex) {
    Rng rng(4);
    Matrix m(10, 3);
    m.col(0) = mtsu::testing::random_vector(rng, 10);
    m.col(1) = mtsu::testing::random_vector(rng, 10);
    m.col(2) = m.col(1);
    Matrix other = mtsu::testing::random_matrix(rng, 10, 1);
    SpectralLibrary lib({m, other});
    Vector a(2);
    a << 0.5, 0.5;
    RunLedger ledger;
    auto sel = select_model(lib, lib.realize(ModelIndex{{2, 0}}) * a, a, ledger);
    EXPECT_EQ(sel.model, (ModelIndex{{1, 0}}));
}

TEST(SelectModel, ScalingInvariance) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed, 5);
        auto lib = random_library(rng, 12, {3, 3});
        Vector y = mtsu::testing::random_vector(rng, 12);
        Vector a = random_simplex(rng, 2);
        const double c = 0.2 + 0.6 * rng.uniform();
        std::vector<Matrix> scaled;
        for (const auto& mat : lib.material_sets()) scaled.push_back(c * mat);
        RunLedger ledger;
        EXPECT_EQ(select_model(lib, y, a, ledger).model, select_model(SpectralLibrary(scaled), c * y, a, ledger).model);
    }
}

TEST(SelectModel, Validation) {
    Rng rng(6);
    auto lib = random_library(rng, 10, {2, 2});
    RunLedger ledger;
    EXPECT_THROW(select_model(lib, Vector::Zero(9), Vector::Constant(2, 0.5), ledger), InputError);
    EXPECT_THROW(select_model(lib, Vector::Zero(10), Vector::Constant(3, 0.5), ledger), InputError);
}

TEST(UnmixSequence, SingleFrameEqualsMesma) {
    auto cfg = small_config(1);
    cfg.T = 1;
    auto [lib, scene] = generate_experiment(cfg);
    auto fm = unmix_sequence(lib, scene.sequence);
    auto me = mesma_sequence(lib, scene.sequence);
    EXPECT_EQ(fm.abundances.data(), me.field.data());
    EXPECT_EQ(fm.models(), *me.field.models);
    EXPECT_EQ(fm.changes.total(), 0u);
    EXPECT_EQ(fm.ledger.fcls_calls, me.ledger.fcls_calls);
}

TEST(UnmixSequence, LedgerIdentities) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = small_config(seed);
        auto [lib, scene] = generate_experiment(cfg);
        for (double K : {0.0, 1.0, 2.0, 10.0, std::numeric_limits<double>::infinity()}) {
            FmMesmaConfig fc;
            fc.k_proportion = K;
            auto out = unmix_sequence(lib, scene.sequence, fc);
            expect_ledger_identities(out, lib, cfg.N);
            EXPECT_LE(out.abundances.simplex_violation(), 1e-9);
            for (std::size_t n = 0; n < cfg.N; ++n) EXPECT_FALSE(out.changes.at(0, n));
        }
    }
}

TEST(UnmixSequence, ZeroProportionMatchesMesma) {
    auto cfg = small_config(7);
    auto [lib, scene] = generate_experiment(cfg);
    FmMesmaConfig fc;
    fc.k_proportion = 0.0;
    auto fm = unmix_sequence(lib, scene.sequence, fc);
    auto me = mesma_sequence(lib, scene.sequence);
    EXPECT_EQ(fm.abundances.data(), me.field.data());
    EXPECT_EQ(fm.models(), *me.field.models);
    EXPECT_EQ(fm.changes.total(), (cfg.T - 1) * cfg.N);
}

TEST(UnmixSequence, InfiniteProportionNeverFlags) {
    auto cfg = small_config(8);
    auto [lib, scene] = generate_experiment(cfg);
    FmMesmaConfig fc;
    fc.k_proportion = std::numeric_limits<double>::infinity();
    auto fm = unmix_sequence(lib, scene.sequence, fc);
    EXPECT_EQ(fm.changes.total(), 0u);
    EXPECT_TRUE(std::isinf(fm.threshold));
    EXPECT_EQ(fm.ledger.fcls_calls, cfg.N * lib.model_count() + (cfg.T - 1) * cfg.N);
}

TEST(UnmixSequence, NoiselessConstantSequence) {
    Rng rng(9);
    const std::size_t N = 25, T = 4, L = 40;
    auto lib = random_library(rng, L, {3, 3, 3});
    HyperspectralSequence seq(T, N, L);
    for (std::size_t n = 0; n < N; ++n) {
        Vector a = (random_simplex(rng, 3).array() + 0.2).matrix() / 1.6;
        const ModelIndex idx = random_model(rng, lib);
        for (std::size_t t = 0; t < T; ++t) seq.pixel(t, n) = lib.realize(idx) * a;
    }
    auto fm = unmix_sequence(lib, seq);
    auto me = mesma_sequence(lib, seq);
    for (std::size_t i = 0; i < fm.abundances.data().size(); ++i)
        EXPECT_NEAR(fm.abundances.data()[i], me.field.data()[i], 1e-6);
    EXPECT_EQ(fm.changes.total(), 0u);
    EXPECT_EQ(fm.ledger.fcls_calls, N * lib.model_count() + (T - 1) * N);
    EXPECT_EQ(me.ledger.fcls_calls, T * N * lib.model_count());
}

TEST(UnmixSequence, ThreadedRunIsIdentical) {
    auto cfg = small_config(10);
    auto [lib, scene] = generate_experiment(cfg);
    auto a = unmix_sequence(lib, scene.sequence);
    ExecOptions opts;
    opts.threads = 3;
    auto b = unmix_sequence(lib, scene.sequence, {}, opts);
    EXPECT_EQ(a.abundances.data(), b.abundances.data());
    EXPECT_EQ(a.changes, b.changes);
    EXPECT_EQ(a.ledger.fcls_calls, b.ledger.fcls_calls);
    EXPECT_EQ(a.ledger.residual_evals, b.ledger.residual_evals);
}

TEST(UnmixSequence, UserCalibrationCountsInFirstFrame) {
    auto cfg = small_config(11);
    auto [lib, scene] = generate_experiment(cfg);
    FmMesmaConfig fc;
    fc.calibration_pixels = std::vector<Vector>{Vector(scene.sequence.pixel(0, 0)), Vector(scene.sequence.pixel(0, 1))};
    auto out = unmix_sequence(lib, scene.sequence, fc);
    EXPECT_EQ(out.frame_ledgers[0].fcls_calls, (cfg.N + 2) * lib.model_count());
    const double expected = fc.k_proportion * (out.selection_residuals[0] + out.selection_residuals[1]) / 2.0;
    EXPECT_NEAR(out.threshold, expected, 1e-12);
}

TEST(UnmixSequence, DefaultThresholdUsesFirstFrame) {
    auto cfg = small_config(12);
    auto [lib, scene] = generate_experiment(cfg);
    auto out = unmix_sequence(lib, scene.sequence);
    double sum = 0.0;
    for (std::size_t n = 0; n < cfg.N; ++n) sum += out.selection_residuals[n];
    EXPECT_NEAR(out.threshold, 10.0 * sum / double(cfg.N), 1e-12);
}

TEST(UnmixSequence, FlagsMatchReprocessing) {
    auto cfg = small_config(13);
    cfg.kappa = 0.2;
    auto [lib, scene] = generate_experiment(cfg);
    FmMesmaConfig fc;
    fc.k_proportion = 3.0;
    auto out = unmix_sequence(lib, scene.sequence, fc);
    for (std::size_t t = 1; t < cfg.T; ++t)
        for (std::size_t n = 0; n < cfg.N; ++n)
            EXPECT_EQ(out.changes.at(t, n), out.selection_residuals[t * cfg.N + n] > out.threshold);
}

TEST(UnmixSequence, Validation) {
    auto cfg = small_config(14);
    auto [lib, scene] = generate_experiment(cfg);
    FmMesmaConfig fc;
    fc.k_proportion = -1.0;
    EXPECT_THROW(unmix_sequence(lib, scene.sequence, fc), InputError);
    fc.k_proportion = 1.0;
    fc.calibration_stride = 0;
    EXPECT_THROW(unmix_sequence(lib, scene.sequence, fc), InputError);
    HyperspectralSequence wrong(2, 3, cfg.L + 1);
    EXPECT_THROW(unmix_sequence(lib, wrong), ShapeError);
}
