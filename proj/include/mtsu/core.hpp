#pragma once

// Domain types shared by every module: spectral libraries, endmember models,
// image sequences, abundance fields, change maps and run ledgers.
//
// All indices are zero-based. A ModelIndex picks signature j[p] from the
// p-th material of a SpectralLibrary; models are enumerated in lexicographic
// order with the last material varying fastest.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtsu/errors.hpp"

namespace mtsu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

struct ModelIndex {
    std::vector<std::uint32_t> j;

    std::size_t size() const noexcept { return j.size(); }
    std::uint32_t operator[](std::size_t p) const { return j[p]; }
    std::uint32_t& operator[](std::size_t p) { return j[p]; }

    friend bool operator==(const ModelIndex&, const ModelIndex&) = default;
    friend auto operator<=>(const ModelIndex&, const ModelIndex&) = default;
};

inline std::string to_string(const ModelIndex& idx) {
    std::string s = "(";
    for (std::size_t p = 0; p < idx.size(); ++p) {
        if (p) s += ',';
        s += std::to_string(idx[p]);
    }
    return s + ")";
}

/// Per-material signature sets. Material p is stored as an L x C_p matrix
/// whose columns are the signatures.
class SpectralLibrary {
public:
    SpectralLibrary() = default;

    explicit SpectralLibrary(std::vector<Matrix> materials, std::vector<std::string> names = {})
        : materials_(std::move(materials)), names_(std::move(names)) {
        if (materials_.empty()) throw InputError("spectral library needs at least one material");
        bands_ = static_cast<std::size_t>(materials_.front().rows());
        if (bands_ <= materials_.size())
            throw InputError("spectral library needs more bands than materials (L > P)");
        for (std::size_t p = 0; p < materials_.size(); ++p) {
            const Matrix& m = materials_[p];
            if (static_cast<std::size_t>(m.rows()) != bands_)
                throw ShapeError("material " + std::to_string(p) + " has " + std::to_string(m.rows()) +
                                 " bands, expected " + std::to_string(bands_));
            if (m.cols() < 1) throw InputError("material " + std::to_string(p) + " has no signatures");
            for (Eigen::Index k = 0; k < m.size(); ++k) {
                const double v = m.data()[k];
                if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                    throw InputError("material " + std::to_string(p) + " has a reflectance outside [0,1]");
            }
        }
        if (names_.empty()) {
            for (std::size_t p = 0; p < materials_.size(); ++p) names_.push_back("material" + std::to_string(p));
        } else if (names_.size() != materials_.size()) {
            throw ShapeError("library names do not match material count");
        }
    }

    std::size_t bands() const noexcept { return bands_; }
    std::size_t materials() const noexcept { return materials_.size(); }
    std::size_t count(std::size_t p) const { return static_cast<std::size_t>(materials_.at(p).cols()); }

    std::vector<std::size_t> counts() const {
        std::vector<std::size_t> c;
        c.reserve(materials_.size());
        for (const auto& m : materials_) c.push_back(static_cast<std::size_t>(m.cols()));
        return c;
    }

    const Matrix& material(std::size_t p) const { return materials_.at(p); }
    const std::vector<Matrix>& material_sets() const noexcept { return materials_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    auto signature(std::size_t p, std::size_t j) const { return materials_.at(p).col(static_cast<Eigen::Index>(j)); }

    /// Product of the per-material library sizes.
    std::uint64_t model_count() const {
        std::uint64_t total = 1;
        for (const auto& m : materials_) {
            const auto c = static_cast<std::uint64_t>(m.cols());
            if (total > std::numeric_limits<std::uint64_t>::max() / c) throw InputError("model count overflows");
            total *= c;
        }
        return total;
    }

    void validate_index(const ModelIndex& idx) const {
        if (idx.size() != materials_.size())
            throw InvalidIndexError("model index " + to_string(idx) + " has wrong arity for " +
                                    std::to_string(materials_.size()) + " materials");
        for (std::size_t p = 0; p < idx.size(); ++p)
            if (idx[p] >= count(p))
                throw InvalidIndexError("model index " + to_string(idx) + " out of range at material " +
                                        std::to_string(p));
    }

    Matrix realize(const ModelIndex& idx) const {
        validate_index(idx);
        Matrix M(static_cast<Eigen::Index>(bands_), static_cast<Eigen::Index>(materials_.size()));
        for (std::size_t p = 0; p < materials_.size(); ++p) M.col(static_cast<Eigen::Index>(p)) = signature(p, idx[p]);
        return M;
    }

    /// True when no two signatures of the same material are identical, which
    /// makes ModelIndex equality equivalent to endmember-matrix equality.
    bool within_material_distinct() const {
        for (const auto& m : materials_)
            for (Eigen::Index a = 0; a < m.cols(); ++a)
                for (Eigen::Index b = a + 1; b < m.cols(); ++b)
                    if (m.col(a) == m.col(b)) return false;
        return true;
    }

    /// L x P matrix of per-material mean signatures.
    Matrix mean_endmembers() const {
        Matrix M(static_cast<Eigen::Index>(bands_), static_cast<Eigen::Index>(materials_.size()));
        for (std::size_t p = 0; p < materials_.size(); ++p) M.col(static_cast<Eigen::Index>(p)) = materials_[p].rowwise().mean();
        return M;
    }

    friend bool operator==(const SpectralLibrary& a, const SpectralLibrary& b) {
        if (a.materials_.size() != b.materials_.size() || a.bands_ != b.bands_) return false;
        for (std::size_t p = 0; p < a.materials_.size(); ++p) {
            if (a.materials_[p].cols() != b.materials_[p].cols()) return false;
            if (a.materials_[p] != b.materials_[p]) return false;
        }
        return true;
    }

private:
    std::vector<Matrix> materials_;
    std::vector<std::string> names_;
    std::size_t bands_ = 0;
};

/// Per-material mean signatures as a one-signature-per-material library.
inline SpectralLibrary mean_library(const SpectralLibrary& lib) {
    const Matrix M = lib.mean_endmembers();
    std::vector<Matrix> cols;
    for (Eigen::Index p = 0; p < M.cols(); ++p) cols.emplace_back(M.col(p));
    return SpectralLibrary(std::move(cols), lib.names());
}

inline Matrix realize_model(const SpectralLibrary& lib, const ModelIndex& idx) { return lib.realize(idx); }

/// Lexicographic rank of idx among all models of lib.
inline std::uint64_t model_rank(const SpectralLibrary& lib, const ModelIndex& idx) {
    lib.validate_index(idx);
    std::uint64_t r = 0;
    for (std::size_t p = 0; p < idx.size(); ++p) r = r * lib.count(p) + idx[p];
    return r;
}

inline ModelIndex model_from_rank(const SpectralLibrary& lib, std::uint64_t rank) {
    if (rank >= lib.model_count()) throw InvalidIndexError("model rank out of range");
    ModelIndex idx{std::vector<std::uint32_t>(lib.materials())};
    for (std::size_t p = lib.materials(); p-- > 0;) {
        idx[p] = static_cast<std::uint32_t>(rank % lib.count(p));
        rank /= lib.count(p);
    }
    return idx;
}

/// Walks every model of a library in lexicographic order, keeping the
/// realized L x P matrix up to date by rewriting only the columns that change.
class ModelEnumerator {
public:
    explicit ModelEnumerator(const SpectralLibrary& lib)
        : lib_(&lib), idx_{std::vector<std::uint32_t>(lib.materials(), 0)},
          matrix_(lib.realize(ModelIndex{std::vector<std::uint32_t>(lib.materials(), 0)})) {}

    const ModelIndex& index() const noexcept { return idx_; }
    const Matrix& matrix() const noexcept { return matrix_; }

    /// Advances to the next model; returns false after the last one.
    bool next() {
        for (std::size_t p = idx_.size(); p-- > 0;) {
            if (idx_[p] + 1 < lib_->count(p)) {
                ++idx_[p];
                matrix_.col(static_cast<Eigen::Index>(p)) = lib_->signature(p, idx_[p]);
                return true;
            }
            idx_[p] = 0;
            matrix_.col(static_cast<Eigen::Index>(p)) = lib_->signature(p, 0);
        }
        return false;
    }

private:
    const SpectralLibrary* lib_;
    ModelIndex idx_;
    Matrix matrix_;
};

template <class F>
void for_each_model(const SpectralLibrary& lib, F&& f) {
    ModelEnumerator it(lib);
    do {
        f(it.index(), it.matrix());
    } while (it.next());
}

/// T frames x N pixels x L bands, pixel-major within each frame.
class HyperspectralSequence {
public:
    HyperspectralSequence() = default;

    HyperspectralSequence(std::size_t frames, std::size_t pixels, std::size_t bands)
        : frames_(frames), pixels_(pixels), bands_(bands), data_(frames * pixels * bands, 0.0) {
        if (frames == 0 || pixels == 0 || bands == 0) throw InputError("sequence dimensions must be positive");
    }

    HyperspectralSequence(std::size_t frames, std::size_t pixels, std::size_t bands, std::vector<double> data)
        : frames_(frames), pixels_(pixels), bands_(bands), data_(std::move(data)) {
        if (frames == 0 || pixels == 0 || bands == 0) throw InputError("sequence dimensions must be positive");
        if (data_.size() != frames * pixels * bands) throw ShapeError("sequence payload does not match T*N*L");
        validate();
    }

    std::size_t frames() const noexcept { return frames_; }
    std::size_t pixels() const noexcept { return pixels_; }
    std::size_t bands() const noexcept { return bands_; }

    ConstVectorMap pixel(std::size_t t, std::size_t n) const {
        return ConstVectorMap(data_.data() + offset(t, n), static_cast<Eigen::Index>(bands_));
    }
    VectorMap pixel(std::size_t t, std::size_t n) {
        return VectorMap(data_.data() + offset(t, n), static_cast<Eigen::Index>(bands_));
    }

    std::span<const double> frame(std::size_t t) const {
        return {data_.data() + t * pixels_ * bands_, pixels_ * bands_};
    }

    const std::vector<double>& data() const noexcept { return data_; }

    void validate() const {
        for (double v : data_)
            if (!std::isfinite(v)) throw InputError("sequence contains a non-finite value");
    }

    friend bool operator==(const HyperspectralSequence&, const HyperspectralSequence&) = default;

private:
    std::size_t offset(std::size_t t, std::size_t n) const { return (t * pixels_ + n) * bands_; }

    std::size_t frames_ = 0, pixels_ = 0, bands_ = 0;
    std::vector<double> data_;
};

/// T x N grid of ModelIndex values stored contiguously.
class ModelField {
public:
    ModelField() = default;
    ModelField(std::size_t frames, std::size_t pixels, std::size_t materials)
        : frames_(frames), pixels_(pixels), materials_(materials), data_(frames * pixels * materials, 0) {}

    std::size_t frames() const noexcept { return frames_; }
    std::size_t pixels() const noexcept { return pixels_; }
    std::size_t materials() const noexcept { return materials_; }

    ModelIndex at(std::size_t t, std::size_t n) const {
        const auto* b = data_.data() + (t * pixels_ + n) * materials_;
        return ModelIndex{std::vector<std::uint32_t>(b, b + materials_)};
    }
    void set(std::size_t t, std::size_t n, const ModelIndex& idx) {
        if (idx.size() != materials_) throw ShapeError("model index arity mismatch");
        std::copy(idx.j.begin(), idx.j.end(), data_.begin() + static_cast<std::ptrdiff_t>((t * pixels_ + n) * materials_));
    }

    const std::vector<std::uint32_t>& data() const noexcept { return data_; }

    friend bool operator==(const ModelField&, const ModelField&) = default;

private:
    std::size_t frames_ = 0, pixels_ = 0, materials_ = 0;
    std::vector<std::uint32_t> data_;
};

/// Per-frame, per-pixel abundance vectors plus the selected models when the
/// producing algorithm selects them.
class AbundanceField {
public:
    AbundanceField() = default;
    AbundanceField(std::size_t frames, std::size_t pixels, std::size_t materials)
        : frames_(frames), pixels_(pixels), materials_(materials), data_(frames * pixels * materials, 0.0) {}

    std::size_t frames() const noexcept { return frames_; }
    std::size_t pixels() const noexcept { return pixels_; }
    std::size_t materials() const noexcept { return materials_; }

    ConstVectorMap at(std::size_t t, std::size_t n) const {
        return ConstVectorMap(data_.data() + (t * pixels_ + n) * materials_, static_cast<Eigen::Index>(materials_));
    }
    VectorMap at(std::size_t t, std::size_t n) {
        return VectorMap(data_.data() + (t * pixels_ + n) * materials_, static_cast<Eigen::Index>(materials_));
    }

    std::span<const double> frame(std::size_t t) const {
        return {data_.data() + t * pixels_ * materials_, pixels_ * materials_};
    }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    std::optional<ModelField> models;

    /// Largest violation of nonnegativity or unit sum over the field.
    double simplex_violation() const {
        double worst = 0.0;
        for (std::size_t t = 0; t < frames_; ++t)
            for (std::size_t n = 0; n < pixels_; ++n) {
                auto a = at(t, n);
                worst = std::max(worst, std::abs(a.sum() - 1.0));
                worst = std::max(worst, -a.minCoeff());
            }
        return worst;
    }

private:
    std::size_t frames_ = 0, pixels_ = 0, materials_ = 0;
    std::vector<double> data_;
};

/// Binary per-frame, per-pixel change indicators. Frame 0 is never flagged.
class ChangeMap {
public:
    ChangeMap() = default;
    ChangeMap(std::size_t frames, std::size_t pixels) : frames_(frames), pixels_(pixels), flags_(frames * pixels, 0) {}

    std::size_t frames() const noexcept { return frames_; }
    std::size_t pixels() const noexcept { return pixels_; }

    bool at(std::size_t t, std::size_t n) const { return flags_[t * pixels_ + n] != 0; }
    void set(std::size_t t, std::size_t n, bool v) {
        if (t == 0 && v) throw InputError("the first frame of a change map cannot be flagged");
        flags_[t * pixels_ + n] = v ? 1 : 0;
    }

    std::size_t count(std::size_t t) const {
        return static_cast<std::size_t>(std::count(flags_.begin() + static_cast<std::ptrdiff_t>(t * pixels_),
                                                   flags_.begin() + static_cast<std::ptrdiff_t>((t + 1) * pixels_), 1));
    }
    std::size_t total() const { return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), 1)); }
    double fraction(std::size_t t) const { return static_cast<double>(count(t)) / static_cast<double>(pixels_); }

    const std::vector<std::uint8_t>& data() const noexcept { return flags_; }

    friend bool operator==(const ChangeMap&, const ChangeMap&) = default;

private:
    std::size_t frames_ = 0, pixels_ = 0;
    std::vector<std::uint8_t> flags_;
};

/// Operation counts of a run. Thread-confined; merge with +=.
struct RunLedger {
    std::uint64_t fcls_calls = 0;
    std::uint64_t residual_evals = 0;
    std::uint64_t reprocessed_pixels = 0;
    double wall_time = 0.0;

    RunLedger& operator+=(const RunLedger& o) {
        fcls_calls += o.fcls_calls;
        residual_evals += o.residual_evals;
        reprocessed_pixels += o.reprocessed_pixels;
        wall_time += o.wall_time;
        return *this;
    }
};

/// Quantities appearing in the endmember-recovery and change-detection
/// guarantees.
struct TheoremBounds {
    double omega_e = 0.0;        // bound on the noise norm
    double omega_delta = 0.0;    // bound on max_M ||M delta||
    double omega_m = 0.0;        // min squared within-material gap
    double omega_m_prime = 0.0;  // max within-material gap
    double omega_s = 0.0;        // lower bound on min_M ||M s||
    double mu = 0.0;             // cross-material coherence of differences
    double factor_f = 1.0;
    bool subsampled = false;     // some material was capped before the pair search
};

} // namespace mtsu
