#pragma once

// On-disk formats.
//
// Cube directory:    cube.json {"magic":"MTSU1","T","N","L","dtype","frames":[...]}
//                    plus one raw file per frame, pixel-major (pixel outer,
//                    band inner), little-endian. dtype is "f32le" for image
//                    cubes and "f64le" for abundance fields (bands = P).
// Library directory: library.json {"P","L","names","C","files":[...]} plus one
//                    CSV per material, one signature per row, L columns,
//                    printed with 17 significant digits.
// Model field:       CSV with header t,n,j0..j{P-1}; zero-based indices.
// Change map:        CSV, one row per frame, one 0/1 column per pixel.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"
#include "mtsu/synth.hpp"

namespace mtsu::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* cube_magic = "MTSU1";

namespace detail {

template <class T>
T to_little(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

inline json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw InputError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
}

inline std::string frame_name(std::size_t t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04zu.raw", t);
    return buf;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

inline std::size_t get_size(const json& j, const char* key, const fs::path& where) {
    if (!j.contains(key) || !is_count(j[key]))
        throw InputError(where.string() + ": missing or invalid field '" + key + "'");
    return j[key].get<std::size_t>();
}

using Dims = std::array<std::size_t, 3>;

// Writes T frames of N x B values from a flat pixel-major buffer.
inline void write_raw_cube(const fs::path& dir, const std::vector<double>& data, Dims dims, const std::string& dtype) {
    const auto [T, N, B] = dims;
    if (dtype != "f32le" && dtype != "f64le") throw InputError("unsupported dtype " + dtype);
    fs::create_directories(dir);
    json manifest = {{"magic", cube_magic}, {"T", T}, {"N", N}, {"L", B}, {"dtype", dtype}};
    json frames = json::array();
    for (std::size_t t = 0; t < T; ++t) {
        const std::string name = frame_name(t);
        frames.push_back(name);
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw InputError("cannot write " + (dir / name).string());
        const double* src = data.data() + t * N * B;
        if (dtype == "f32le") {
            std::vector<float> buf(N * B);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_little(static_cast<float>(src[i]));
            out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        } else {
            std::vector<double> buf(N * B);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_little(src[i]);
            out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
        }
    }
    manifest["frames"] = frames;
    write_text(dir / "cube.json", manifest.dump(2) + "\n");
}

inline std::vector<double> read_raw_cube(const fs::path& dir, Dims& dims, std::string& dtype) {
    const fs::path mpath = dir / "cube.json";
    const json m = read_json(mpath);
    if (!m.contains("magic") || m["magic"] != cube_magic) throw InputError(mpath.string() + ": bad magic");
    const std::size_t T = get_size(m, "T", mpath);
    const std::size_t N = get_size(m, "N", mpath);
    const std::size_t B = get_size(m, "L", mpath);
    dtype = m.contains("dtype") && m["dtype"].is_string() ? m["dtype"].get<std::string>() : std::string{};
    if (dtype != "f32le" && dtype != "f64le") throw InputError(mpath.string() + ": unsupported dtype '" + dtype + "'");
    if (T == 0 || N == 0 || B == 0) throw InputError(mpath.string() + ": dimensions must be positive");
    std::vector<std::string> names;
    if (m.contains("frames")) {
        if (!m["frames"].is_array()) throw InputError(mpath.string() + ": frames must be a list");
        for (const auto& f : m["frames"]) {
            if (!f.is_string()) throw InputError(mpath.string() + ": frame names must be strings");
            names.push_back(f.get<std::string>());
        }
        if (names.size() != T) throw ShapeError(mpath.string() + ": frame list does not match T");
    } else {
        for (std::size_t t = 0; t < T; ++t) names.push_back(frame_name(t));
    }
    const std::size_t width = dtype == "f32le" ? 4 : 8;
    std::vector<double> data(T * N * B);
    for (std::size_t t = 0; t < T; ++t) {
        const fs::path fp = dir / names[t];
        if (!fs::exists(fp)) throw InputError("missing frame file " + fp.string());
        if (fs::file_size(fp) != N * B * width)
            throw ShapeError(fp.string() + ": payload has " + std::to_string(fs::file_size(fp)) + " bytes, expected " +
                             std::to_string(N * B * width));
        std::ifstream in(fp, std::ios::binary);
        double* dst = data.data() + t * N * B;
        if (width == 4) {
            std::vector<float> buf(N * B);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
            for (std::size_t i = 0; i < buf.size(); ++i) dst[i] = static_cast<double>(to_little(buf[i]));
        } else {
            std::vector<double> buf(N * B);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
            for (std::size_t i = 0; i < buf.size(); ++i) dst[i] = to_little(buf[i]);
        }
        if (!in) throw InputError("short read on " + fp.string());
    }
    dims = {T, N, B};
    return data;
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw InputError("cannot open " + p.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline double parse_double(const std::string& s, const fs::path& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(where.string() + ": cannot parse number '" + s + "'");
    }
}

inline unsigned long parse_uint(const std::string& s, const fs::path& where) {
    try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(where.string() + ": cannot parse integer '" + s + "'");
    }
}

} // namespace detail

/// Image cubes are stored as 32-bit floats; values are narrowed on write.
inline void write_cube(const fs::path& dir, const HyperspectralSequence& seq) {
    detail::write_raw_cube(dir, seq.data(), {seq.frames(), seq.pixels(), seq.bands()}, "f32le");
}

inline HyperspectralSequence read_cube(const fs::path& dir) {
    detail::Dims dims{};
    std::string dtype;
    auto data = detail::read_raw_cube(dir, dims, dtype);
    return HyperspectralSequence(dims[0], dims[1], dims[2], std::move(data));
}

/// Rounds every value through float, matching what write_cube stores.
inline HyperspectralSequence quantize_to_f32(const HyperspectralSequence& seq) {
    std::vector<double> d = seq.data();
    for (auto& v : d) v = static_cast<double>(static_cast<float>(v));
    return HyperspectralSequence(seq.frames(), seq.pixels(), seq.bands(), std::move(d));
}

inline void write_abundances(const fs::path& dir, const AbundanceField& field) {
    detail::write_raw_cube(dir, field.data(), {field.frames(), field.pixels(), field.materials()}, "f64le");
}

inline AbundanceField read_abundances(const fs::path& dir) {
    detail::Dims dims{};
    std::string dtype;
    auto data = detail::read_raw_cube(dir, dims, dtype);
    AbundanceField f(dims[0], dims[1], dims[2]);
    f.data() = std::move(data);
    return f;
}

inline void write_models(const fs::path& path, const ModelField& models) {
    std::ostringstream out;
    out << "t,n";
    for (std::size_t p = 0; p < models.materials(); ++p) out << ",j" << p;
    out << '\n';
    for (std::size_t t = 0; t < models.frames(); ++t)
        for (std::size_t n = 0; n < models.pixels(); ++n) {
            out << t << ',' << n;
            const ModelIndex idx = models.at(t, n);
            for (std::size_t p = 0; p < idx.size(); ++p) out << ',' << idx[p];
            out << '\n';
        }
    detail::write_text(path, out.str());
}

inline ModelField read_models(const fs::path& path) {
    const auto rows = detail::read_csv(path);
    if (rows.empty() || rows[0].size() < 3 || rows[0][0] != "t" || rows[0][1] != "n")
        throw InputError(path.string() + ": missing model header");
    const std::size_t P = rows[0].size() - 2;
    std::size_t T = 0, N = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != P + 2) throw ShapeError(path.string() + ": ragged model row " + std::to_string(r));
        T = std::max<std::size_t>(T, detail::parse_uint(rows[r][0], path) + 1);
        N = std::max<std::size_t>(N, detail::parse_uint(rows[r][1], path) + 1);
    }
    if (T * N != rows.size() - 1) throw ShapeError(path.string() + ": model rows do not cover a full T x N grid");
    ModelField f(T, N, P);
    ModelIndex idx{std::vector<std::uint32_t>(P)};
    for (std::size_t r = 1; r < rows.size(); ++r) {
        for (std::size_t p = 0; p < P; ++p) idx[p] = static_cast<std::uint32_t>(detail::parse_uint(rows[r][p + 2], path));
        f.set(detail::parse_uint(rows[r][0], path), detail::parse_uint(rows[r][1], path), idx);
    }
    return f;
}

inline void write_changes(const fs::path& path, const ChangeMap& changes) {
    std::string text;
    text.reserve(changes.frames() * (2 * changes.pixels() + 1));
    for (std::size_t t = 0; t < changes.frames(); ++t) {
        for (std::size_t n = 0; n < changes.pixels(); ++n) {
            if (n) text += ',';
            text += changes.at(t, n) ? '1' : '0';
        }
        text += '\n';
    }
    detail::write_text(path, text);
}

inline ChangeMap read_changes(const fs::path& path) {
    const auto rows = detail::read_csv(path);
    if (rows.empty()) throw InputError(path.string() + ": empty change map");
    ChangeMap m(rows.size(), rows[0].size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != m.pixels()) throw ShapeError(path.string() + ": ragged change map row");
        for (std::size_t n = 0; n < m.pixels(); ++n) {
            const auto& c = rows[t][n];
            if (c != "0" && c != "1") throw InputError(path.string() + ": change flags must be 0 or 1");
            m.set(t, n, c == "1");
        }
    }
    return m;
}

inline void write_library(const fs::path& dir, const SpectralLibrary& lib) {
    fs::create_directories(dir);
    json files = json::array();
    for (std::size_t p = 0; p < lib.materials(); ++p) {
        const std::string name = "material_" + std::to_string(p) + ".csv";
        files.push_back(name);
        std::string text;
        const Matrix& m = lib.material(p);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index l = 0; l < m.rows(); ++l) {
                if (l) text += ',';
                text += detail::format_double(m(l, j));
            }
            text += '\n';
        }
        detail::write_text(dir / name, text);
    }
    const json manifest = {{"P", lib.materials()}, {"L", lib.bands()}, {"names", lib.names()}, {"C", lib.counts()},
                           {"files", files}};
    detail::write_text(dir / "library.json", manifest.dump(2) + "\n");
}

inline SpectralLibrary read_library(const fs::path& dir) {
    const fs::path mpath = dir / "library.json";
    const json m = detail::read_json(mpath);
    const std::size_t P = detail::get_size(m, "P", mpath);
    const std::size_t L = detail::get_size(m, "L", mpath);
    std::vector<std::size_t> C;
    std::vector<std::string> names, files;
    try {
        C = m.at("C").get<std::vector<std::size_t>>();
        names = m.value("names", std::vector<std::string>{});
        files = m.value("files", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw InputError(mpath.string() + ": " + e.what());
    }
    if (files.empty())
        for (std::size_t p = 0; p < P; ++p) files.push_back("material_" + std::to_string(p) + ".csv");
    if (C.size() != P || files.size() != P) throw ShapeError(mpath.string() + ": C/files do not match P");
    std::vector<Matrix> materials;
    for (std::size_t p = 0; p < P; ++p) {
        const auto rows = detail::read_csv(dir / files[p]);
        if (rows.size() != C[p])
            throw ShapeError((dir / files[p]).string() + ": has " + std::to_string(rows.size()) + " rows, manifest says " +
                             std::to_string(C[p]));
        Matrix sig(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(C[p]));
        for (std::size_t j = 0; j < rows.size(); ++j) {
            if (rows[j].size() != L) throw ShapeError((dir / files[p]).string() + ": row has wrong number of bands");
            for (std::size_t l = 0; l < L; ++l)
                sig(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) = detail::parse_double(rows[j][l], dir / files[p]);
        }
        materials.push_back(std::move(sig));
    }
    return SpectralLibrary(std::move(materials), names);
}

inline void write_ledger(const fs::path& path, const RunLedger& ledger, json extra = json::object()) {
    extra["fcls_calls"] = ledger.fcls_calls;
    extra["residual_evals"] = ledger.residual_evals;
    extra["reprocessed_pixels"] = ledger.reprocessed_pixels;
    extra["wall_time"] = ledger.wall_time;
    detail::write_text(path, extra.dump(2) + "\n");
}

inline RunLedger read_ledger(const fs::path& path) {
    const json j = detail::read_json(path);
    RunLedger l;
    try {
        l.fcls_calls = j.at("fcls_calls").get<std::uint64_t>();
        l.residual_evals = j.at("residual_evals").get<std::uint64_t>();
        l.reprocessed_pixels = j.at("reprocessed_pixels").get<std::uint64_t>();
        l.wall_time = j.at("wall_time").get<double>();
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return l;
}

/// 8-bit binary graymap; each value in [0,1] maps to round(255 v).
inline void write_pgm(const fs::path& path, std::span<const double> values, std::size_t width, std::size_t height) {
    if (values.size() != width * height) throw ShapeError("graymap geometry does not match value count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "P5\n" << width << ' ' << height << "\n255\n";
    std::vector<unsigned char> px(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        px[i] = static_cast<unsigned char>(std::lround(255.0 * std::clamp(values[i], 0.0, 1.0)));
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

/// Parses a SynthConfig from JSON. Keys mirror the struct fields; "C" may be
/// a single count (applied to every material) or a list; "snr_db" may be the
/// string "inf". Unknown keys are rejected so typos fail loudly.
inline SynthConfig synth_config_from_json(const json& j) {
    if (!j.is_object()) throw InputError("config must be a JSON object");
    static const std::array<const char*, 12> known{"L",     "N",     "T",         "P",    "C",          "sigma2",
                                                   "snr_db", "kappa", "dirichlet_alpha", "delta_std", "seed", "semireal"};
    for (const auto& [key, value] : j.items())
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
            throw InputError("unknown config key '" + key + "'");
    SynthConfig cfg;
    try {
        auto size = [&](const char* key, std::size_t& dst) {
            if (!j.contains(key)) return;
            if (!detail::is_count(j[key])) throw InputError(std::string("config '") + key + "' must be a positive integer");
            dst = j[key].get<std::size_t>();
        };
        auto number = [&](const char* key, double& dst) {
            if (!j.contains(key)) return;
            const auto& v = j[key];
            if (v.is_string() && (v == "inf" || v == "Infinity")) {
                dst = std::numeric_limits<double>::infinity();
                return;
            }
            if (!v.is_number()) throw InputError(std::string("config '") + key + "' must be a number");
            dst = v.get<double>();
        };
        size("L", cfg.L);
        size("N", cfg.N);
        size("T", cfg.T);
        size("P", cfg.P);
        number("sigma2", cfg.sigma2);
        number("snr_db", cfg.snr_db);
        number("kappa", cfg.kappa);
        number("dirichlet_alpha", cfg.dirichlet_alpha);
        number("delta_std", cfg.delta_std);
        if (j.contains("seed")) {
            if (!detail::is_count(j["seed"])) throw InputError("config 'seed' must be a nonnegative integer");
            cfg.seed = j["seed"].get<std::uint64_t>();
        }
        if (j.contains("C")) {
            const auto& c = j["C"];
            if (detail::is_count(c)) {
                cfg.C.assign(cfg.P, c.get<std::size_t>());
            } else if (c.is_array()) {
                cfg.C.clear();
                for (const auto& v : c) {
                    if (!detail::is_count(v)) throw InputError("config 'C' entries must be positive integers");
                    cfg.C.push_back(v.get<std::size_t>());
                }
            } else {
                throw InputError("config 'C' must be an integer or a list");
            }
        } else {
            cfg.C.assign(cfg.P, 3);
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

} // namespace mtsu::io
