#pragma once

// Numerical checks of the conditions under which model selection with the
// previous abundances recovers the true endmember model, and under which an
// abrupt abundance change inflates the selection residual by a factor F.

#include <cmath>
#include <limits>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"

namespace mtsu {

struct TheoremCheck {
    bool holds = false;
    TheoremBounds bounds;
};

/// Within-material signature gaps and the cross-material coherence of their
/// difference vectors. Materials with more than max_signatures entries are
/// subsampled at evenly spaced columns.
struct LibraryGeometry {
    double min_gap_sq = std::numeric_limits<double>::infinity();
    double max_gap = 0.0;
    double coherence = 0.0;
    bool has_pairs = false;
    bool subsampled = false;
};

inline LibraryGeometry library_geometry(const SpectralLibrary& lib, std::size_t max_signatures = 16) {
    LibraryGeometry g;
    std::vector<std::vector<Vector>> diffs(lib.materials());
    for (std::size_t p = 0; p < lib.materials(); ++p) {
        const Matrix& m = lib.material(p);
        std::vector<Eigen::Index> cols;
        const auto C = static_cast<std::size_t>(m.cols());
        if (C > max_signatures) {
            g.subsampled = true;
            for (std::size_t i = 0; i < max_signatures; ++i)
                cols.push_back(static_cast<Eigen::Index>(i * (C - 1) / (max_signatures - 1)));
        } else {
            for (std::size_t i = 0; i < C; ++i) cols.push_back(static_cast<Eigen::Index>(i));
        }
        for (std::size_t a = 0; a < cols.size(); ++a)
            for (std::size_t b = a + 1; b < cols.size(); ++b) {
                Vector d = m.col(cols[b]) - m.col(cols[a]);
                const double sq = d.squaredNorm();
                g.min_gap_sq = std::min(g.min_gap_sq, sq);
                g.max_gap = std::max(g.max_gap, std::sqrt(sq));
                g.has_pairs = true;
                diffs[p].push_back(std::move(d));
            }
    }
    for (std::size_t p = 0; p < diffs.size(); ++p)
        for (std::size_t q = p + 1; q < diffs.size(); ++q)
            for (const auto& dp : diffs[p])
                for (const auto& dq : diffs[q]) g.coherence = std::max(g.coherence, std::abs(dp.dot(dq)));
    if (!g.has_pairs) g.min_gap_sq = 0.0;
    return g;
}

/// Recovery condition: 2 sqrt(P) (omega_e + omega_delta) < sqrt(omega_M - (P-1) mu).
inline TheoremCheck theorem1_check(const SpectralLibrary& lib, double omega_e, double omega_delta) {
    if (!(omega_e >= 0.0) || !(omega_delta >= 0.0)) throw InputError("noise and variation bounds must be nonnegative");
    const LibraryGeometry g = library_geometry(lib);
    if (!g.has_pairs) throw InputError("no material has two signatures; the separation condition is vacuous");
    TheoremCheck out;
    out.bounds.omega_e = omega_e;
    out.bounds.omega_delta = omega_delta;
    out.bounds.omega_m = g.min_gap_sq;
    out.bounds.omega_m_prime = g.max_gap;
    out.bounds.mu = g.coherence;
    out.bounds.subsampled = g.subsampled;
    const double P = static_cast<double>(lib.materials());
    const double margin = g.min_gap_sq - (P - 1.0) * g.coherence;
    out.holds = margin > 0.0 && 2.0 * std::sqrt(P) * (omega_e + omega_delta) < std::sqrt(margin);
    return out;
}

/// Detection condition: sqrt(P) omega_M' + omega_delta + omega_e < omega_s / (F + 1).
inline TheoremCheck theorem2_check(const SpectralLibrary& lib, double omega_e, double omega_delta, double omega_s,
                                   double F) {
    if (!(omega_e >= 0.0) || !(omega_delta >= 0.0) || !(omega_s >= 0.0)) throw InputError("bounds must be nonnegative");
    if (!(F >= 1.0)) throw InputError("factor F must be at least 1");
    const LibraryGeometry g = library_geometry(lib);
    TheoremCheck out;
    out.bounds.omega_e = omega_e;
    out.bounds.omega_delta = omega_delta;
    out.bounds.omega_s = omega_s;
    out.bounds.factor_f = F;
    out.bounds.omega_m = g.min_gap_sq;
    out.bounds.omega_m_prime = g.max_gap;
    out.bounds.mu = g.coherence;
    out.bounds.subsampled = g.subsampled;
    const double P = static_cast<double>(lib.materials());
    out.holds = std::sqrt(P) * g.max_gap + omega_delta + omega_e < omega_s / (F + 1.0);
    return out;
}

/// max over models of ||M v||, by enumeration.
inline double max_model_image_norm(const SpectralLibrary& lib, const Eigen::Ref<const Vector>& v) {
    double best = 0.0;
    for_each_model(lib, [&](const ModelIndex&, const Matrix& M) { best = std::max(best, (M * v).norm()); });
    return best;
}

/// min over models of ||M v||, by enumeration.
inline double min_model_image_norm(const SpectralLibrary& lib, const Eigen::Ref<const Vector>& v) {
    double best = std::numeric_limits<double>::infinity();
    for_each_model(lib, [&](const ModelIndex&, const Matrix& M) { best = std::min(best, (M * v).norm()); });
    return best;
}

} // namespace mtsu
