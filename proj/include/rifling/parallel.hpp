#pragma once

// Bounded worker pool for independent grid points. Results come back in
// task order; a throwing task is recorded and the rest keep running.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "rifling/errors.hpp"

namespace rifling {

enum class FailureKind { None, InvalidArgument, Solver, Other };

template <class T>
struct TaskResult {
    std::optional<T> value;
    FailureKind failure = FailureKind::None;
    std::string error;

    [[nodiscard]] bool ok() const { return value.has_value(); }
};

inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

template <class F>
auto parallel_map(std::size_t n_tasks, std::size_t workers, F&& fn)
    -> std::vector<TaskResult<std::invoke_result_t<F&, std::size_t>>> {
    using T = std::invoke_result_t<F&, std::size_t>;
    std::vector<TaskResult<T>> out(n_tasks);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < n_tasks; i = next++) {
            auto& slot = out[i];
            try {
                slot.value.emplace(fn(i));
            } catch (const InvalidArgument& e) {
                slot.failure = FailureKind::InvalidArgument;
                slot.error = e.what();
            } catch (const SolverError& e) {
                slot.failure = FailureKind::Solver;
                slot.error = e.what();
            } catch (const std::exception& e) {
                slot.failure = FailureKind::Other;
                slot.error = e.what();
            }
        }
    };

    workers = std::clamp<std::size_t>(workers == 0 ? default_workers() : workers, 1, std::max<std::size_t>(n_tasks, 1));
    if (workers == 1) {
        work();
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return out;
}

}  // namespace rifling
