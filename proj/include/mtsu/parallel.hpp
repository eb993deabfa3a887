#pragma once

#include <algorithm>
#include <chrono>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"

namespace mtsu {

struct ExecOptions {
    unsigned threads = 1;
    std::optional<std::chrono::steady_clock::time_point> deadline;

    void check_deadline() const {
        if (deadline && std::chrono::steady_clock::now() > *deadline) throw BudgetExceeded("time budget exhausted");
    }
};

/// Runs body(begin, end, ledger) over contiguous chunks of [0, count) and
/// returns the sum of the per-chunk ledgers. Each chunk owns its ledger, so
/// the body needs no synchronization as long as it writes disjoint outputs.
template <class Body>
RunLedger parallel_chunks(std::size_t count, const ExecOptions& opts, Body&& body) {
    const std::size_t workers = std::clamp<std::size_t>(opts.threads, 1, std::max<std::size_t>(count, 1));
    std::vector<RunLedger> ledgers(workers);
    if (workers == 1) {
        body(std::size_t{0}, count, ledgers[0]);
        return ledgers[0];
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(count, w * chunk);
        const std::size_t end = std::min(count, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
            try {
                body(begin, end, ledgers[w]);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    RunLedger total;
    for (const auto& l : ledgers) total += l;
    return total;
}

} // namespace mtsu
