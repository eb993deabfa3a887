#pragma once

// Online multitemporal unmixing. The first frame is unmixed with MESMA. For
// every later frame each pixel picks the endmember model that best explains it
// with the previous frame's abundances held fixed, then refines the
// abundances with a single FCLS solve. Pixels whose selection residual exceeds
// the calibrated threshold RE_0 are treated as abrupt changes, flagged, and
// re-unmixed with MESMA.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"
#include "mtsu/mesma.hpp"
#include "mtsu/parallel.hpp"
#include "mtsu/solver.hpp"

namespace mtsu {

struct FmMesmaConfig {
    double k_proportion = 10.0;
    /// Pixels used to calibrate RE_0. Empty means the first frame, reusing
    /// its MESMA residuals.
    std::optional<std::vector<Vector>> calibration_pixels;
    /// With first-frame calibration, use every stride-th pixel.
    std::size_t calibration_stride = 1;
};

struct SelectionResult {
    ModelIndex model;
    double residual = 0.0;
};

/// argmin over models of ||y_next - M a_prev||, by enumeration. Costs one
/// residual evaluation per model and no FCLS solve.
inline SelectionResult select_model(const SpectralLibrary& lib, const Eigen::Ref<const Vector>& y_next,
                                    const Eigen::Ref<const Vector>& a_prev, RunLedger& ledger) {
    const std::size_t P = lib.materials();
    if (static_cast<std::size_t>(y_next.size()) != lib.bands()) throw InputError("pixel length does not match library bands");
    if (static_cast<std::size_t>(a_prev.size()) != P) throw InputError("abundance length does not match material count");
    if (!y_next.allFinite() || !a_prev.allFinite()) throw InputError("model selection input contains a non-finite value");

    // partial[p] = y - sum_{q<p} a_q m_{q, j_q}; the last material is folded
    // into the leaf norm so no full residual is ever materialized.
    std::vector<Vector> partial(P, Vector(static_cast<Eigen::Index>(lib.bands())));
    partial[0] = y_next;
    ModelIndex current{std::vector<std::uint32_t>(P, 0)};
    SelectionResult best;
    double best_sq = std::numeric_limits<double>::infinity();

    auto recurse = [&](auto&& self, std::size_t p) -> void {
        const double ap = a_prev[static_cast<Eigen::Index>(p)];
        const Matrix& sigs = lib.material(p);
        for (Eigen::Index j = 0; j < sigs.cols(); ++j) {
            current[p] = static_cast<std::uint32_t>(j);
            if (p + 1 == P) {
                const double sq = (partial[p] - ap * sigs.col(j)).squaredNorm();
                if (sq < best_sq) {
                    best_sq = sq;
                    best.model = current;
                }
            } else {
                partial[p + 1] = partial[p] - ap * sigs.col(j);
                self(self, p + 1);
            }
        }
    };
    recurse(recurse, 0);

    ledger.residual_evals += lib.model_count();
    best.residual = std::sqrt(best_sq);
    return best;
}

struct FmMesmaOutput {
    AbundanceField abundances;            // abundances.models holds the selected models
    ChangeMap changes;
    RunLedger ledger;
    double threshold = 0.0;               // RE_0
    std::vector<RunLedger> frame_ledgers; // per-frame counts; calibration outside frame 0 counted in frame 0
    std::vector<double> selection_residuals; // T x N; frame 0 holds the MESMA residuals

    const ModelField& models() const { return *abundances.models; }
};

inline FmMesmaOutput unmix_sequence(const SpectralLibrary& lib, const HyperspectralSequence& seq,
                                    const FmMesmaConfig& cfg = {}, const ExecOptions& opts = {}) {
    if (seq.bands() != lib.bands()) throw ShapeError("sequence and library band counts differ");
    if (cfg.calibration_stride == 0) throw InputError("calibration stride must be positive");
    detail::require_proportion(cfg.k_proportion);

    const auto start = std::chrono::steady_clock::now();
    const std::size_t T = seq.frames(), N = seq.pixels(), P = lib.materials();

    FmMesmaOutput out;
    out.abundances = AbundanceField(T, N, P);
    out.abundances.models = ModelField(T, N, P);
    out.changes = ChangeMap(T, N);
    out.frame_ledgers.assign(T, RunLedger{});
    out.selection_residuals.assign(T * N, 0.0);
    ModelField& models = *out.abundances.models;

    out.frame_ledgers[0] = parallel_chunks(N, opts, [&](std::size_t begin, std::size_t end, RunLedger& ledger) {
        for (std::size_t n = begin; n < end; ++n) {
            opts.check_deadline();
            MesmaResult r = mesma_pixel(lib, seq.pixel(0, n), ledger);
            out.abundances.at(0, n) = r.abundance;
            models.set(0, n, r.model);
            out.selection_residuals[n] = r.residual_norm;
        }
    });

    if (cfg.calibration_pixels) {
        out.threshold = calibrate_threshold(lib, *cfg.calibration_pixels, cfg.k_proportion, out.frame_ledgers[0]);
    } else {
        std::vector<double> residuals;
        for (std::size_t n = 0; n < N; n += cfg.calibration_stride) residuals.push_back(out.selection_residuals[n]);
        out.threshold = threshold_from_residuals(residuals, cfg.k_proportion);
    }

    for (std::size_t t = 1; t < T; ++t) {
        out.frame_ledgers[t] = parallel_chunks(N, opts, [&](std::size_t begin, std::size_t end, RunLedger& ledger) {
            for (std::size_t n = begin; n < end; ++n) {
                opts.check_deadline();
                const auto y = seq.pixel(t, n);
                SelectionResult sel = select_model(lib, y, out.abundances.at(t - 1, n), ledger);
                out.selection_residuals[t * N + n] = sel.residual;
                if (sel.residual <= out.threshold) {
                    FclsSolution s = fcls(lib.realize(sel.model), y);
                    ++ledger.fcls_calls;
                    out.abundances.at(t, n) = s.abundance;
                    models.set(t, n, sel.model);
                } else {
                    MesmaResult r = mesma_pixel(lib, y, ledger);
                    ++ledger.reprocessed_pixels;
                    out.abundances.at(t, n) = r.abundance;
                    models.set(t, n, r.model);
                    out.changes.set(t, n, true);
                }
            }
        });
    }

    for (const auto& l : out.frame_ledgers) out.ledger += l;
    out.ledger.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace mtsu
