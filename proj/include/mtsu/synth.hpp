#pragma once

// Synthetic multitemporal scenes: random spectral libraries, Dirichlet
// abundances with a fixed fraction of abrupt per-step resamplings, optional
// small Dirichlet jitter, endmember models drawn uniformly per pixel and
// frame, and white Gaussian noise at an exact sequence-level SNR.
//
// Random streams (see rng.hpp): library generation uses stream 1, sequence
// generation stream 2, library splitting stream 3, signature pools stream 4.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"
#include "mtsu/rng.hpp"

namespace mtsu {

struct SynthConfig {
    std::size_t L = 200;
    std::size_t N = 1000;
    std::size_t T = 11;
    std::size_t P = 3;
    std::vector<std::size_t> C{3, 3, 3};
    double sigma2 = 0.12;
    double snr_db = 40.0;  // +inf disables noise
    double kappa = 0.01;
    double dirichlet_alpha = 1.0;
    double delta_std = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (L == 0 || N == 0 || T == 0 || P == 0) throw InputError("L, N, T and P must be positive");
        if (L <= P) throw InputError("L must exceed P");
        if (C.size() != P) throw InputError("C must list one library size per material");
        for (auto c : C)
            if (c == 0) throw InputError("library sizes must be positive");
        if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw InputError("sigma2 must be finite and nonnegative");
        if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
            throw InputError("snr_db must be a number or +inf");
        if (!(kappa >= 0.0 && kappa <= 1.0)) throw InputError("kappa must lie in [0, 1]");
        if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha)) throw InputError("dirichlet_alpha must be positive");
        if (!(delta_std >= 0.0) || !std::isfinite(delta_std)) throw InputError("delta_std must be finite and nonnegative");
    }
};

struct GroundTruth {
    AbundanceField abundances;  // abundances.models holds the true models
    ChangeMap change_truth;     // pixels whose abundances were resampled
    double realized_snr_db = std::numeric_limits<double>::infinity();

    const ModelField& models() const { return *abundances.models; }
};

inline SpectralLibrary generate_library(std::size_t L, std::size_t P, const std::vector<std::size_t>& C, double sigma2,
                                        std::uint64_t seed) {
    if (C.size() != P) throw InputError("C must list one library size per material");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw InputError("sigma2 must be finite and nonnegative");
    Rng rng(seed, 1);
    const double sd = std::sqrt(sigma2);
    std::vector<Matrix> materials;
    for (std::size_t p = 0; p < P; ++p) {
        Vector mean(static_cast<Eigen::Index>(L));
        for (auto& v : mean) v = rng.uniform();
        Matrix m(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(C[p]));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index l = 0; l < m.rows(); ++l) m(l, j) = std::clamp(mean[l] + sd * rng.normal(), 0.0, 1.0);
        materials.push_back(std::move(m));
    }
    return SpectralLibrary(std::move(materials));
}

/// (1 / LP) sum_p trace(sample covariance of material p). Materials with a
/// single signature contribute zero.
inline double library_variance(const SpectralLibrary& lib) {
    double total = 0.0;
    bool any = false;
    for (const auto& m : lib.material_sets()) {
        if (m.cols() < 2) continue;
        any = true;
        // shifted by the first signature so identical columns give exactly 0
        const Matrix d = m.colwise() - m.col(0);
        const double C = static_cast<double>(m.cols());
        total += (d.squaredNorm() - d.rowwise().sum().squaredNorm() / C) / (C - 1.0);
    }
    if (!any) throw InputError("library variance needs a material with at least two signatures");
    return total / static_cast<double>(lib.bands() * lib.materials());
}

/// Number of pixels resampled per step: ceil(kappa N), robust to rounding.
inline std::size_t changed_pixel_count(double kappa, std::size_t N) {
    const double x = kappa * static_cast<double>(N);
    const double r = std::round(x);
    const double c = std::abs(x - r) < 1e-9 * std::max(1.0, x) ? r : std::ceil(x);
    return std::min(N, static_cast<std::size_t>(c));
}

namespace detail {

// Dirichlet draw with mean a whose componentwise standard deviations average
// to sd. Falls back to a vertex draw when the concentration collapses.
inline Vector dirichlet_jitter(Rng& rng, const Vector& a, double sd) {
    double spread = 0.0;
    for (double v : a) spread += std::sqrt(std::max(0.0, v * (1.0 - v)));
    spread /= static_cast<double>(a.size());
    if (spread == 0.0) return a;
    const double concentration = std::max((spread / sd) * (spread / sd) - 1.0, 1e-12);
    std::vector<double> alpha(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) alpha[static_cast<std::size_t>(i)] = concentration * a[i];
    return rng.dirichlet(alpha);
}

} // namespace detail

struct SyntheticScene {
    HyperspectralSequence sequence;
    GroundTruth truth;
};

inline SyntheticScene generate_sequence(const SpectralLibrary& lib, const SynthConfig& cfg) {
    cfg.validate();
    if (lib.bands() != cfg.L || lib.materials() != cfg.P || lib.counts() != cfg.C)
        throw ShapeError("library dimensions do not match the configuration");
    const std::size_t T = cfg.T, N = cfg.N, P = cfg.P, L = cfg.L;
    Rng rng(cfg.seed, 2);

    SyntheticScene out;
    GroundTruth& truth = out.truth;
    truth.abundances = AbundanceField(T, N, P);
    truth.abundances.models = ModelField(T, N, P);
    truth.change_truth = ChangeMap(T, N);

    for (std::size_t n = 0; n < N; ++n) truth.abundances.at(0, n) = rng.dirichlet_symmetric(P, cfg.dirichlet_alpha);

    const std::size_t changed = changed_pixel_count(cfg.kappa, N);
    std::vector<std::size_t> order(N);
    std::vector<char> is_changed(N);
    for (std::size_t t = 1; t < T; ++t) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i < changed; ++i) std::swap(order[i], order[i + rng.below(N - i)]);
        std::fill(is_changed.begin(), is_changed.end(), 0);
        for (std::size_t i = 0; i < changed; ++i) is_changed[order[i]] = 1;

        for (std::size_t n = 0; n < N; ++n) {
            if (is_changed[n]) {
                truth.abundances.at(t, n) = rng.dirichlet_symmetric(P, cfg.dirichlet_alpha);
                truth.change_truth.set(t, n, true);
            } else if (cfg.delta_std > 0.0) {
                truth.abundances.at(t, n) = detail::dirichlet_jitter(rng, truth.abundances.at(t - 1, n), cfg.delta_std);
            } else {
                truth.abundances.at(t, n) = truth.abundances.at(t - 1, n);
            }
        }
    }

    ModelIndex idx{std::vector<std::uint32_t>(P)};
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t p = 0; p < P; ++p) idx[p] = static_cast<std::uint32_t>(rng.below(lib.count(p)));
            truth.abundances.models->set(t, n, idx);
        }

    std::vector<double> data(T * N * L);
    double signal = 0.0;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n) {
            VectorMap y(data.data() + (t * N + n) * L, static_cast<Eigen::Index>(L));
            y.noalias() = lib.realize(truth.abundances.models->at(t, n)) * truth.abundances.at(t, n);
            signal += y.squaredNorm();
        }

    if (std::isfinite(cfg.snr_db)) {
        std::vector<double> z(data.size());
        double zz = 0.0;
        for (auto& v : z) {
            v = rng.normal();
            zz += v * v;
        }
        const double scale = std::sqrt(signal / (std::pow(10.0, cfg.snr_db / 10.0) * zz));
        double noise = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double e = scale * z[i];
            data[i] += e;
            noise += e * e;
        }
        truth.realized_snr_db = 10.0 * std::log10(signal / noise);
    }

    out.sequence = HyperspectralSequence(T, N, L, std::move(data));
    return out;
}

/// Generates a library from the configuration (stream derived from cfg.seed)
/// and a sequence rendered from it.
inline std::pair<SpectralLibrary, SyntheticScene> generate_experiment(const SynthConfig& cfg) {
    cfg.validate();
    SpectralLibrary lib = generate_library(cfg.L, cfg.P, cfg.C, cfg.sigma2, cfg.seed);
    SyntheticScene scene = generate_sequence(lib, cfg);
    return {std::move(lib), std::move(scene)};
}

/// Signature pools with structured variability for mismatch experiments:
/// each material has a smooth continuum with three absorption-like bumps,
/// centred in its own share of the spectral range so materials stay distinct;
/// every pool member rescales the bump depths independently, applies a
/// brightness gain and a small spectral tilt, and adds white perturbation.
inline SpectralLibrary generate_signature_pools(std::size_t L, std::size_t P, std::size_t pool_size, std::uint64_t seed) {
    if (pool_size == 0) throw InputError("pool size must be positive");
    if (L < 2) throw InputError("pools need at least two bands");
    Rng rng(seed, 4);
    const auto Li = static_cast<Eigen::Index>(L);
    std::vector<Matrix> materials;
    for (std::size_t p = 0; p < P; ++p) {
        const double level = 0.05 + 0.15 * rng.uniform();
        Matrix bumps(Li, 3);
        for (Eigen::Index b = 0; b < 3; ++b) {
            const double centre = (static_cast<double>(p) + rng.uniform()) / static_cast<double>(P);
            const double width = 0.05 + 0.2 * rng.uniform();
            const double height = 0.1 + 0.4 * rng.uniform();
            for (Eigen::Index l = 0; l < Li; ++l) {
                const double x = static_cast<double>(l) / static_cast<double>(L - 1) - centre;
                bumps(l, b) = height * std::exp(-0.5 * x * x / (width * width));
            }
        }
        const double peak = (Vector::Constant(Li, level) + bumps.rowwise().sum()).maxCoeff();
        Matrix m(Li, static_cast<Eigen::Index>(pool_size));
        for (std::size_t j = 0; j < pool_size; ++j) {
            Vector depth(3);
            for (auto& d : depth) d = 0.7 + 0.6 * rng.uniform();
            const double gain = 0.8 + 0.4 * rng.uniform();
            const double tilt = 0.1 * (rng.uniform() - 0.5);
            const Vector shape = (Vector::Constant(Li, level) + bumps * depth) * (0.7 / peak);
            for (Eigen::Index l = 0; l < Li; ++l) {
                const double x = static_cast<double>(l) / static_cast<double>(L - 1) - 0.5;
                const double v = gain * shape[l] * (1.0 + tilt * x) + 0.005 * rng.normal();
                m(l, static_cast<Eigen::Index>(j)) = std::clamp(v, 0.0, 1.0);
            }
        }
        materials.push_back(std::move(m));
    }
    return SpectralLibrary(std::move(materials));
}

struct SemirealScene {
    SpectralLibrary library_a;  // renders the data
    SpectralLibrary library_b;  // disjoint library used for unmixing
    HyperspectralSequence sequence;
    GroundTruth truth;          // models index into library_a
};

/// Splits every pool into disjoint libraries of split.first and split.second
/// signatures and renders a sequence from the first. cfg.L, cfg.P and cfg.C
/// are taken from the pools and split.
inline SemirealScene generate_semireal(const SpectralLibrary& pools, std::pair<std::size_t, std::size_t> split,
                                       SynthConfig cfg) {
    if (split.first == 0 || split.second == 0) throw InputError("split sizes must be positive");
    Rng rng(cfg.seed, 3);
    std::vector<Matrix> a, b;
    for (std::size_t p = 0; p < pools.materials(); ++p) {
        const Matrix& pool = pools.material(p);
        const auto C = static_cast<std::size_t>(pool.cols());
        if (split.first + split.second > C)
            throw InputError("pool " + std::to_string(p) + " has " + std::to_string(C) +
                             " signatures, too few for a disjoint split");
        std::vector<std::size_t> order(C);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i + 1 < C; ++i) std::swap(order[i], order[i + rng.below(C - i)]);
        Matrix ma(pool.rows(), static_cast<Eigen::Index>(split.first));
        Matrix mb(pool.rows(), static_cast<Eigen::Index>(split.second));
        for (std::size_t j = 0; j < split.first; ++j) ma.col(static_cast<Eigen::Index>(j)) = pool.col(static_cast<Eigen::Index>(order[j]));
        for (std::size_t j = 0; j < split.second; ++j)
            mb.col(static_cast<Eigen::Index>(j)) = pool.col(static_cast<Eigen::Index>(order[split.first + j]));
        a.push_back(std::move(ma));
        b.push_back(std::move(mb));
    }
    SemirealScene out{SpectralLibrary(std::move(a), pools.names()), SpectralLibrary(std::move(b), pools.names()), {}, {}};
    cfg.L = pools.bands();
    cfg.P = pools.materials();
    cfg.C.assign(cfg.P, split.first);
    SyntheticScene scene = generate_sequence(out.library_a, cfg);
    out.sequence = std::move(scene.sequence);
    out.truth = std::move(scene.truth);
    return out;
}

} // namespace mtsu
