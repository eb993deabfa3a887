#pragma once

// Nonnegative and fully constrained (simplex) least squares.
//
// nnls() is the Lawson-Hanson active-set method. fcls() reduces the
// simplex-constrained problem to NNLS by appending a heavily weighted row of
// ones to the endmember matrix, then renormalizes the result so it sums to
// one exactly.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"

namespace mtsu {

struct NnlsResult {
    Vector x;
    std::size_t iterations = 0;  // outer (column-adding) iterations
};

/// Largest KKT violation of x for min ||Ax - b|| s.t. x >= 0, measured on the
/// gradient g = A^T (A x - b): |g_i| on free coordinates, max(-g_i, 0) on
/// coordinates held at zero.
inline double nnls_kkt_residual(const Matrix& A, const Eigen::Ref<const Vector>& b, const Vector& x) {
    const Vector g = A.transpose() * (A * x - b);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0)
            worst = std::max(worst, std::abs(g[i]));
        else
            worst = std::max(worst, -g[i]);
    }
    return worst;
}

namespace detail {

inline void require_finite(const Matrix& A, const Eigen::Ref<const Vector>& b) {
    if (!A.allFinite() || !b.allFinite()) throw InputError("least-squares input contains a non-finite value");
}

// Unconstrained least squares restricted to the passive columns; other
// entries of the result are zero.
inline Vector passive_solve(const Matrix& A, const Eigen::Ref<const Vector>& b, const std::vector<char>& passive) {
    const Eigen::Index k = A.cols();
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    if (cols.empty()) return Vector::Zero(k);
    Matrix sub(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = A.col(cols[c]);
    const Vector zs = sub.colPivHouseholderQr().solve(b);
    Vector z = Vector::Zero(k);
    for (std::size_t c = 0; c < cols.size(); ++c) z[cols[c]] = zs[static_cast<Eigen::Index>(c)];
    return z;
}

} // namespace detail

/// Lawson-Hanson NNLS. Throws ConvergenceError when the outer loop needs more
/// than 3k iterations.
inline NnlsResult nnls_solve(const Matrix& A, const Eigen::Ref<const Vector>& b) {
    if (A.rows() < 1 || A.cols() < 1) throw InputError("nnls needs a non-empty matrix");
    if (b.size() != A.rows()) throw ShapeError("nnls right-hand side length does not match matrix rows");
    detail::require_finite(A, b);

    const Eigen::Index k = A.cols();
    const std::size_t max_outer = 3 * static_cast<std::size_t>(k);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.norm() * std::max(1.0, b.norm());

    NnlsResult out;
    out.x = Vector::Zero(k);
    std::vector<char> passive(static_cast<std::size_t>(k), 0);
    Vector w = A.transpose() * b;

    while (true) {
        Eigen::Index t = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < k; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
                wmax = w[j];
                t = j;
            }
        if (t < 0) break;
        if (++out.iterations > max_outer)
            throw ConvergenceError("nnls exceeded " + std::to_string(max_outer) + " outer iterations");

        passive[static_cast<std::size_t>(t)] = 1;
        bool first = true;
        bool stalled = false;
        while (true) {
            Vector z = detail::passive_solve(A, b, passive);
            if (first && z[t] <= 0.0) {
                // w[t] was rounding noise; nothing left to gain.
                passive[static_cast<std::size_t>(t)] = 0;
                stalled = true;
                break;
            }
            first = false;

            bool feasible = true;
            for (Eigen::Index j = 0; j < k; ++j)
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) feasible = false;
            if (feasible) {
                out.x = z;
                break;
            }

            // Step back toward x until the first passive coordinate hits zero.
            double alpha = std::numeric_limits<double>::infinity();
            Eigen::Index blocking = -1;
            for (Eigen::Index j = 0; j < k; ++j)
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
                    const double step = out.x[j] / (out.x[j] - z[j]);
                    if (step < alpha) {
                        alpha = step;
                        blocking = j;
                    }
                }
            out.x += alpha * (z - out.x);
            out.x[blocking] = 0.0;
            for (Eigen::Index j = 0; j < k; ++j)
                if (passive[static_cast<std::size_t>(j)] && out.x[j] <= 0.0) {
                    passive[static_cast<std::size_t>(j)] = 0;
                    out.x[j] = 0.0;
                }
        }
        if (stalled) break;
        w = A.transpose() * (b - A * out.x);
    }
    return out;
}

inline Vector nnls(const Matrix& A, const Eigen::Ref<const Vector>& b) { return nnls_solve(A, b).x; }

struct FclsSolution {
    Vector abundance;
    double residual_norm = 0.0;
    std::size_t iterations = 0;
    bool degenerate = false;     // NNLS returned all zeros; abundance set to uniform
    double kkt_residual = 0.0;   // KKT violation of the augmented NNLS solution
};

/// 1e3 x mean |M_ij|, the default weight of the sum-to-one row.
inline double default_fcls_weight(const Matrix& M) {
    const double w = 1e3 * M.cwiseAbs().mean();
    return w > 0.0 ? w : 1e3;
}

inline FclsSolution fcls(const Matrix& M, const Eigen::Ref<const Vector>& y, double weight) {
    if (y.size() != M.rows()) throw ShapeError("fcls pixel length does not match endmember matrix rows");
    if (!(weight > 0.0) || !std::isfinite(weight)) throw InputError("fcls weight must be positive and finite");
    const Eigen::Index L = M.rows();
    const Eigen::Index P = M.cols();

    Matrix A(L + 1, P);
    A.topRows(L) = M;
    A.row(L).setConstant(weight);
    Vector b(L + 1);
    b.head(L) = y;
    b[L] = weight;

    NnlsResult r = nnls_solve(A, b);
    FclsSolution out;
    out.iterations = r.iterations;
    out.kkt_residual = nnls_kkt_residual(A, b, r.x);
    const double s = r.x.sum();
    if (s > 0.0) {
        out.abundance = r.x / s;
    } else {
        out.abundance = Vector::Constant(P, 1.0 / static_cast<double>(P));
        out.degenerate = true;
    }
    out.residual_norm = (y - M * out.abundance).norm();
    return out;
}

inline FclsSolution fcls(const Matrix& M, const Eigen::Ref<const Vector>& y) {
    return fcls(M, y, default_fcls_weight(M));
}

/// Exhaustive search over the simplex lattice {k / resolution}. Verification
/// oracle only; P <= 4.
inline FclsSolution fcls_grid_oracle(const Matrix& M, const Eigen::Ref<const Vector>& y, std::size_t resolution) {
    const Eigen::Index P = M.cols();
    if (P < 1 || P > 4) throw UnsupportedError("grid oracle supports 1 to 4 endmembers");
    if (resolution < 1 || resolution > 400) throw UnsupportedError("grid oracle resolution must be in [1, 400]");
    if (y.size() != M.rows()) throw ShapeError("grid oracle pixel length does not match endmember matrix rows");

    // ||y - Ma||^2 = y'y - 2 c'a + a'Ga on unnormalized integer coordinates.
    const Matrix G = M.transpose() * M;
    const Vector c = M.transpose() * y;
    const double yy = y.squaredNorm();
    const double h = 1.0 / static_cast<double>(resolution);
    const auto R = static_cast<int>(resolution);

    std::vector<int> k(static_cast<std::size_t>(P), 0);
    std::vector<int> best_k(static_cast<std::size_t>(P), 0);
    double best = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
    Vector a(P);

    auto evaluate = [&] {
        for (Eigen::Index i = 0; i < P; ++i) a[i] = k[static_cast<std::size_t>(i)] * h;
        const double v = yy - 2.0 * c.dot(a) + a.dot(G * a);
        ++evaluated;
        if (v < best) {
            best = v;
            best_k = k;
        }
    };

    auto recurse = [&](auto&& self, Eigen::Index p, int remaining) -> void {
        if (p == P - 1) {
            k[static_cast<std::size_t>(p)] = remaining;
            evaluate();
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            k[static_cast<std::size_t>(p)] = v;
            self(self, p + 1, remaining - v);
        }
    };
    recurse(recurse, 0, R);

    FclsSolution out;
    out.abundance = Vector(P);
    for (Eigen::Index i = 0; i < P; ++i) out.abundance[i] = best_k[static_cast<std::size_t>(i)] * h;
    out.residual_norm = (y - M * out.abundance).norm();
    out.iterations = evaluated;
    return out;
}

/// Bound on how much the best lattice point can exceed the continuous
/// optimum: 2 ||M||_2 P / resolution.
inline double grid_gap_bound(const Matrix& M, std::size_t resolution) {
    const double spectral = Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
    return 2.0 * spectral * static_cast<double>(M.cols()) / static_cast<double>(resolution);
}

} // namespace mtsu
