#pragma once

// Exhaustive multiple-endmember unmixing: one FCLS solve per endmember model,
// keeping the model with the smallest reconstruction error.

#include <chrono>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"
#include "mtsu/parallel.hpp"
#include "mtsu/solver.hpp"

namespace mtsu {

struct MesmaResult {
    ModelIndex model;
    Vector abundance;
    double residual_norm = 0.0;
    bool degenerate = false;
};

/// Solver failure on a specific endmember model.
class ModelConvergenceError : public ConvergenceError {
public:
    ModelConvergenceError(const std::string& what, ModelIndex idx) : ConvergenceError(what), model(std::move(idx)) {}
    ModelIndex model;
};

class ModelInputError : public InputError {
public:
    ModelInputError(const std::string& what, ModelIndex idx) : InputError(what), model(std::move(idx)) {}
    ModelIndex model;
};

/// Ties go to the lexicographically first model.
inline MesmaResult mesma_pixel(const SpectralLibrary& lib, const Eigen::Ref<const Vector>& y, RunLedger& ledger) {
    if (static_cast<std::size_t>(y.size()) != lib.bands())
        throw ShapeError("pixel has " + std::to_string(y.size()) + " bands, library has " + std::to_string(lib.bands()));

    MesmaResult best;
    best.residual_norm = std::numeric_limits<double>::infinity();
    ModelEnumerator it(lib);
    do {
        FclsSolution s;
        try {
            s = fcls(it.matrix(), y);
        } catch (const ConvergenceError& e) {
            throw ModelConvergenceError(std::string(e.what()) + " at model " + to_string(it.index()), it.index());
        } catch (const InputError& e) {
            throw ModelInputError(std::string(e.what()) + " at model " + to_string(it.index()), it.index());
        }
        ++ledger.fcls_calls;
        if (s.residual_norm < best.residual_norm) {
            best.residual_norm = s.residual_norm;
            best.model = it.index();
            best.abundance = std::move(s.abundance);
            best.degenerate = s.degenerate;
        }
    } while (it.next());
    return best;
}

struct MesmaSequenceResult {
    AbundanceField field;           // field.models is always set
    RunLedger ledger;
    std::vector<double> residuals;  // T x N optimal residual norms
};

inline MesmaSequenceResult mesma_sequence(const SpectralLibrary& lib, const HyperspectralSequence& seq,
                                          const ExecOptions& opts = {}) {
    if (seq.bands() != lib.bands()) throw ShapeError("sequence and library band counts differ");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t T = seq.frames(), N = seq.pixels(), P = lib.materials();

    MesmaSequenceResult out;
    out.field = AbundanceField(T, N, P);
    out.field.models = ModelField(T, N, P);
    out.residuals.assign(T * N, 0.0);

    out.ledger = parallel_chunks(T * N, opts, [&](std::size_t begin, std::size_t end, RunLedger& ledger) {
        for (std::size_t i = begin; i < end; ++i) {
            opts.check_deadline();
            const std::size_t t = i / N, n = i % N;
            MesmaResult r = mesma_pixel(lib, seq.pixel(t, n), ledger);
            out.field.at(t, n) = r.abundance;
            out.field.models->set(t, n, r.model);
            out.residuals[i] = r.residual_norm;
        }
    });
    out.ledger.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// Fixed-endmember baseline: one FCLS solve per pixel against a library whose
/// materials each hold exactly one signature.
inline MesmaSequenceResult fcls_sequence(const SpectralLibrary& endmembers, const HyperspectralSequence& seq,
                                         const ExecOptions& opts = {}) {
    if (endmembers.model_count() != 1) throw InputError("fixed-endmember unmixing needs one signature per material");
    return mesma_sequence(endmembers, seq, opts);
}

namespace detail {
inline void require_proportion(double K) {
    if (std::isnan(K) || K < 0.0) throw InputError("threshold proportion K must be nonnegative");
}

inline double scaled_mean(std::span<const double> residuals, double K) {
    if (residuals.empty()) throw InputError("threshold calibration needs at least one pixel");
    if (std::isinf(K)) return std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (double r : residuals) sum += r;
    return K * sum / static_cast<double>(residuals.size());
}
} // namespace detail

/// RE_0 = K times the mean optimal MESMA residual over the calibration set.
inline double calibrate_threshold(const SpectralLibrary& lib, std::span<const Vector> calibration, double K,
                                  RunLedger& ledger) {
    detail::require_proportion(K);
    if (calibration.empty()) throw InputError("threshold calibration needs at least one pixel");
    std::vector<double> residuals;
    residuals.reserve(calibration.size());
    for (const auto& y : calibration) residuals.push_back(mesma_pixel(lib, y, ledger).residual_norm);
    return detail::scaled_mean(residuals, K);
}

/// Same threshold from residuals that were already computed by mesma_pixel.
inline double threshold_from_residuals(std::span<const double> residuals, double K) {
    detail::require_proportion(K);
    return detail::scaled_mean(residuals, K);
}

} // namespace mtsu
