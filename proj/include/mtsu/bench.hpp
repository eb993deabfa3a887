#pragma once

// Benchmark cells: one synthetic scene per (P, C_p), unmixed by each requested
// algorithm, with wall time, operation counts and a check of the counts
// against their closed forms.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"
#include "mtsu/fm_mesma.hpp"
#include "mtsu/mesma.hpp"
#include "mtsu/parallel.hpp"
#include "mtsu/synth.hpp"

namespace mtsu {

struct BenchOptions {
    std::size_t L = 200;
    std::size_t N = 200;
    std::size_t T = 11;
    double kappa = 0.01;
    double snr_db = 40.0;
    double sigma2 = 0.12;
    double k_proportion = 10.0;
    std::uint64_t seed = 1;
    double time_budget = std::numeric_limits<double>::infinity();           // seconds per run
    std::uint64_t count_budget = std::numeric_limits<std::uint64_t>::max(); // FCLS solves per run
    unsigned threads = 1;
};

struct BenchRow {
    std::size_t P = 0, C = 0;
    std::string algorithm;
    bool exhausted = false;  // budget ran out; reported as infinity
    RunLedger ledger;
    std::uint64_t expected_fcls = 0;
    std::uint64_t expected_residual_evals = 0;
    bool identities_hold = false;
};

inline SynthConfig bench_scene_config(std::size_t P, std::size_t C, const BenchOptions& o) {
    SynthConfig cfg;
    cfg.L = o.L;
    cfg.N = o.N;
    cfg.T = o.T;
    cfg.P = P;
    cfg.C.assign(P, C);
    cfg.sigma2 = o.sigma2;
    cfg.snr_db = o.snr_db;
    cfg.kappa = o.kappa;
    cfg.seed = splitmix64(o.seed ^ (P * 1000003ULL + C));
    return cfg;
}

/// Runs one algorithm ("mesma", "fm-mesma" or "fcls") on a prepared scene.
inline BenchRow run_bench(const SpectralLibrary& lib, const HyperspectralSequence& seq, const std::string& algorithm,
                          const BenchOptions& o) {
    BenchRow row;
    row.P = lib.materials();
    row.C = lib.count(0);
    row.algorithm = algorithm;
    const std::uint64_t T = seq.frames(), N = seq.pixels(), mc = lib.model_count();

    ExecOptions exec;
    exec.threads = o.threads;
    if (std::isfinite(o.time_budget))
        exec.deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(o.time_budget));

    // Smallest number of solves the algorithm can possibly need.
    std::uint64_t lower_bound = 0;
    if (algorithm == "mesma")
        lower_bound = T * N * mc;
    else if (algorithm == "fm-mesma")
        lower_bound = N * mc + (T - 1) * N;
    else if (algorithm == "fcls")
        lower_bound = T * N;
    else
        throw InputError("unknown algorithm '" + algorithm + "'");
    if (lower_bound > o.count_budget) {
        row.exhausted = true;
        return row;
    }

    try {
        if (algorithm == "mesma") {
            auto r = mesma_sequence(lib, seq, exec);
            row.ledger = r.ledger;
            row.expected_fcls = T * N * mc;
            row.expected_residual_evals = 0;
            row.identities_hold = row.ledger.fcls_calls == row.expected_fcls && row.ledger.residual_evals == 0 &&
                                  row.ledger.reprocessed_pixels == 0;
        } else if (algorithm == "fm-mesma") {
            FmMesmaConfig cfg;
            cfg.k_proportion = o.k_proportion;
            auto r = unmix_sequence(lib, seq, cfg, exec);
            row.ledger = r.ledger;
            std::uint64_t changed = r.changes.total();
            row.expected_fcls = N * mc + ((T - 1) * N - changed) + changed * mc;
            row.expected_residual_evals = (T - 1) * N * mc;
            row.identities_hold = row.ledger.fcls_calls == row.expected_fcls &&
                                  row.ledger.residual_evals == row.expected_residual_evals &&
                                  row.ledger.reprocessed_pixels == changed;
        } else {
            auto r = fcls_sequence(mean_library(lib), seq, exec);
            row.ledger = r.ledger;
            row.expected_fcls = T * N;
            row.identities_hold = row.ledger.fcls_calls == row.expected_fcls;
        }
    } catch (const BudgetExceeded&) {
        row.exhausted = true;
        return row;
    }
    if (row.ledger.fcls_calls > o.count_budget) row.exhausted = true;
    return row;
}

inline std::string bench_csv_header() {
    return "P,C,algorithm,wall_time,fcls_calls,residual_evals,reprocessed_pixels,expected_fcls,expected_residual_evals,"
           "identities_hold";
}

inline std::string bench_csv_row(const BenchRow& r) {
    std::ostringstream out;
    out << r.P << ',' << r.C << ',' << r.algorithm << ',';
    if (r.exhausted) {
        out << "∞,∞,∞,∞,,,";
        return out.str();
    }
    out << r.ledger.wall_time << ',' << r.ledger.fcls_calls << ',' << r.ledger.residual_evals << ','
        << r.ledger.reprocessed_pixels << ',' << r.expected_fcls << ',' << r.expected_residual_evals << ','
        << (r.identities_hold ? "true" : "false");
    return out.str();
}

} // namespace mtsu
