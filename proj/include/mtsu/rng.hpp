#pragma once

// Reproducible random variates. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; every distribution is implemented here
// rather than taken from <random>, whose distributions are
// implementation-defined. Independent streams are derived from (seed, stream)
// with SplitMix64.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace mtsu {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5851F42D4C957F2DULL))) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double open_uniform() {
        double u;
        do u = uniform();
        while (u == 0.0);
        return u;
    }

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do x = engine_();
        while (x >= limit);
        return x % n;
    }

    /// Standard normal, Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// log of a Gamma(shape, 1) variate (Marsaglia-Tsang). Working in log
    /// space keeps tiny shapes from underflowing to zero.
    double log_gamma_variate(double shape) {
        if (shape < 1.0) return log_gamma_variate(shape + 1.0) + std::log(open_uniform()) / shape;
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = open_uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x || std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return std::log(d * v);
        }
    }

    /// Dirichlet(alpha). Components with alpha_i == 0 are exactly zero.
    Eigen::VectorXd dirichlet(std::span<const double> alpha) {
        const auto k = static_cast<Eigen::Index>(alpha.size());
        std::vector<double> lg(alpha.size(), -std::numeric_limits<double>::infinity());
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < alpha.size(); ++i)
            if (alpha[i] > 0.0) {
                lg[i] = log_gamma_variate(alpha[i]);
                mx = std::max(mx, lg[i]);
            }
        Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
        for (std::size_t i = 0; i < alpha.size(); ++i)
            if (alpha[i] > 0.0) a[static_cast<Eigen::Index>(i)] = std::exp(lg[i] - mx);
        return a / a.sum();
    }

    Eigen::VectorXd dirichlet_symmetric(std::size_t k, double alpha) {
        std::vector<double> al(k, alpha);
        return dirichlet(al);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mtsu
