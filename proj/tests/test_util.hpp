#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/rng.hpp"

namespace mtsu::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = lo + (hi - lo) * rng.uniform();
    return m;
}

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform();
    return v;
}

inline Vector random_simplex(Rng& rng, std::size_t P) { return rng.dirichlet_symmetric(P, 1.0); }

inline SpectralLibrary random_library(Rng& rng, std::size_t L, const std::vector<std::size_t>& C) {
    std::vector<Matrix> mats;
    for (auto c : C) mats.push_back(random_matrix(rng, static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(c)));
    return SpectralLibrary(std::move(mats));
}

inline ModelIndex random_model(Rng& rng, const SpectralLibrary& lib) {
    ModelIndex idx{std::vector<std::uint32_t>(lib.materials())};
    for (std::size_t p = 0; p < lib.materials(); ++p) idx[p] = static_cast<std::uint32_t>(rng.below(lib.count(p)));
    return idx;
}

} // namespace mtsu::testing

namespace mtsu {
inline void PrintTo(const ModelIndex& idx, std::ostream* os) { *os << to_string(idx); }
} // namespace mtsu
