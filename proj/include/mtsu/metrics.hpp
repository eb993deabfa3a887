#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"

namespace mtsu {

/// sum_t sqrt(||X_t - X*_t||_F^2 / (T N_X)), where each sequence is stored as
/// T contiguous frames of N_X elements. Note each frame's root is summed, not
/// averaged.
inline double rmse(std::span<const double> X, std::span<const double> X_ref, std::size_t frames) {
    if (X.size() != X_ref.size()) throw ShapeError("rmse operands differ in size");
    if (frames == 0 || X.size() % frames != 0) throw ShapeError("rmse payload is not a whole number of frames");
    const std::size_t per_frame = X.size() / frames;
    const double denom = static_cast<double>(frames) * static_cast<double>(per_frame);
    double total = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
        double sq = 0.0;
        for (std::size_t i = t * per_frame; i < (t + 1) * per_frame; ++i) {
            const double d = X[i] - X_ref[i];
            sq += d * d;
        }
        total += std::sqrt(sq / denom);
    }
    return total;
}

inline double rmse_abundances(const AbundanceField& est, const AbundanceField& truth) {
    if (est.frames() != truth.frames() || est.pixels() != truth.pixels() || est.materials() != truth.materials())
        throw ShapeError("abundance fields differ in shape");
    return rmse(est.data(), truth.data(), est.frames());
}

namespace detail {
inline void require_same_grid(const ModelField& a, const ModelField& b) {
    if (a.frames() != b.frames() || a.pixels() != b.pixels() || a.materials() != b.materials())
        throw ShapeError("model fields differ in shape");
}
} // namespace detail

/// RMSE between the realized true and estimated endmember matrices; frame t
/// stacks all N matrices of size L x P.
inline double rmse_endmembers(const SpectralLibrary& lib_true, const ModelField& truth, const SpectralLibrary& lib_est,
                              const ModelField& est) {
    detail::require_same_grid(truth, est);
    if (lib_true.bands() != lib_est.bands() || lib_true.materials() != lib_est.materials())
        throw ShapeError("libraries differ in shape");
    const std::size_t T = truth.frames(), N = truth.pixels();
    const std::size_t block = lib_true.bands() * lib_true.materials();
    std::vector<double> x(T * N * block), x_ref(T * N * block);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n) {
            const Matrix a = lib_est.realize(est.at(t, n));
            const Matrix b = lib_true.realize(truth.at(t, n));
            std::copy(a.data(), a.data() + block, x.begin() + static_cast<std::ptrdiff_t>((t * N + n) * block));
            std::copy(b.data(), b.data() + block, x_ref.begin() + static_cast<std::ptrdiff_t>((t * N + n) * block));
        }
    return rmse(x, x_ref, T);
}

/// RMSE between observed pixels and their reconstruction M_hat a_hat.
inline double rmse_reconstruction(const HyperspectralSequence& seq, const SpectralLibrary& lib_est,
                                  const AbundanceField& est) {
    if (!est.models) throw InputError("reconstruction needs the estimated models");
    if (seq.frames() != est.frames() || seq.pixels() != est.pixels() || seq.bands() != lib_est.bands() ||
        est.materials() != lib_est.materials())
        throw ShapeError("sequence, library and abundance shapes disagree");
    const std::size_t T = seq.frames(), N = seq.pixels(), L = seq.bands();
    std::vector<double> rec(T * N * L);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n) {
            VectorMap r(rec.data() + (t * N + n) * L, static_cast<Eigen::Index>(L));
            r.noalias() = lib_est.realize(est.models->at(t, n)) * est.at(t, n);
        }
    return rmse(rec, seq.data(), T);
}

struct SamResult {
    double value = 0.0;        // radians
    std::size_t skipped = 0;   // terms with a zero-norm column
};

/// Mean spectral angle between true and estimated endmember columns.
/// Terms with a zero-norm column are skipped and counted.
inline SamResult sam(const SpectralLibrary& lib_true, const ModelField& truth, const SpectralLibrary& lib_est,
                     const ModelField& est) {
    detail::require_same_grid(truth, est);
    if (lib_true.bands() != lib_est.bands() || lib_true.materials() != lib_est.materials())
        throw ShapeError("libraries differ in shape");
    SamResult out;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < truth.frames(); ++t)
        for (std::size_t n = 0; n < truth.pixels(); ++n) {
            const ModelIndex it = truth.at(t, n), ie = est.at(t, n);
            for (std::size_t p = 0; p < truth.materials(); ++p) {
                const auto m = lib_true.signature(p, it[p]);
                const auto mh = lib_est.signature(p, ie[p]);
                const double nm = m.norm(), nh = mh.norm();
                if (nm == 0.0 || nh == 0.0) {
                    ++out.skipped;
                    continue;
                }
                // 2 atan2(|u - v|, |u + v|) stays accurate for nearly parallel
                // columns, where acos of the cosine loses half the digits
                const Vector u = m / nm, v = mh / nh;
                sum += 2.0 * std::atan2((u - v).norm(), (u + v).norm());
                ++used;
            }
        }
    out.value = used ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

/// Mean over frames of the fraction of pixels whose model matches exactly.
inline double ppv_m(const ModelField& truth, const ModelField& est) {
    detail::require_same_grid(truth, est);
    const std::size_t T = truth.frames(), N = truth.pixels(), P = truth.materials();
    const auto& a = truth.data();
    const auto& b = est.data();
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        std::size_t hits = 0;
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t o = (t * N + n) * P;
            if (std::equal(a.begin() + static_cast<std::ptrdiff_t>(o), a.begin() + static_cast<std::ptrdiff_t>(o + P),
                           b.begin() + static_cast<std::ptrdiff_t>(o)))
                ++hits;
        }
        total += static_cast<double>(hits) / static_cast<double>(N);
    }
    return total / static_cast<double>(T);
}

struct DetectionRates {
    double pd = std::numeric_limits<double>::quiet_NaN();
    double pfa = std::numeric_limits<double>::quiet_NaN();
    bool pd_defined = false;   // some frame t >= 1 has a true change
    bool pfa_defined = false;  // some frame t >= 1 has an unchanged pixel
};

/// Per-frame detection and false-alarm rates averaged over frames 1..T-1.
/// Frames with no positives (negatives) are left out of the PD (PFA) mean.
inline DetectionRates pd_pfa(const ChangeMap& truth, const ChangeMap& detected) {
    if (truth.frames() != detected.frames() || truth.pixels() != detected.pixels())
        throw ShapeError("change maps differ in shape");
    DetectionRates out;
    double pd_sum = 0.0, pfa_sum = 0.0;
    std::size_t pd_frames = 0, pfa_frames = 0;
    for (std::size_t t = 1; t < truth.frames(); ++t) {
        std::size_t pos = 0, tp = 0, fp = 0;
        for (std::size_t n = 0; n < truth.pixels(); ++n) {
            const bool c = truth.at(t, n), d = detected.at(t, n);
            pos += c;
            tp += c && d;
            fp += d && !c;
        }
        const std::size_t neg = truth.pixels() - pos;
        if (pos) {
            pd_sum += static_cast<double>(tp) / static_cast<double>(pos);
            ++pd_frames;
        }
        if (neg) {
            pfa_sum += static_cast<double>(fp) / static_cast<double>(neg);
            ++pfa_frames;
        }
    }
    if (pd_frames) {
        out.pd = pd_sum / static_cast<double>(pd_frames);
        out.pd_defined = true;
    }
    if (pfa_frames) {
        out.pfa = pfa_sum / static_cast<double>(pfa_frames);
        out.pfa_defined = true;
    }
    return out;
}

/// Unavailable entries are NaN.
struct MetricsReport {
    double rmse_a = std::numeric_limits<double>::quiet_NaN();
    double rmse_m = std::numeric_limits<double>::quiet_NaN();
    double rmse_y = std::numeric_limits<double>::quiet_NaN();
    double sam_m = std::numeric_limits<double>::quiet_NaN();
    double ppv_m = std::numeric_limits<double>::quiet_NaN();
    double pd = std::numeric_limits<double>::quiet_NaN();
    double pfa = std::numeric_limits<double>::quiet_NaN();
    std::size_t sam_skipped = 0;
};

/// Builds a full report. Model-based entries need est.models; PPV_M is only
/// meaningful when both sides index the same library, so it stays NaN
/// otherwise. PD/PFA need both change maps.
inline MetricsReport evaluate(const HyperspectralSequence& observed, const SpectralLibrary& lib_true,
                              const AbundanceField& truth, const ChangeMap* truth_changes,
                              const SpectralLibrary& lib_est, const AbundanceField& est, const ChangeMap* est_changes) {
    if (!truth.models) throw InputError("ground truth needs models");
    MetricsReport r;
    r.rmse_a = rmse_abundances(est, truth);
    if (est.models) {
        r.rmse_m = rmse_endmembers(lib_true, *truth.models, lib_est, *est.models);
        const SamResult s = sam(lib_true, *truth.models, lib_est, *est.models);
        r.sam_m = s.value;
        r.sam_skipped = s.skipped;
        r.rmse_y = rmse_reconstruction(observed, lib_est, est);
        if (lib_true == lib_est) r.ppv_m = ppv_m(*truth.models, *est.models);
    }
    if (truth_changes && est_changes) {
        const DetectionRates d = pd_pfa(*truth_changes, *est_changes);
        r.pd = d.pd;
        r.pfa = d.pfa;
    }
    return r;
}

} // namespace mtsu
