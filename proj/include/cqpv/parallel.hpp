#pragma once

// Index-parallel trial execution. Trial i always draws from child stream i
// of the master seed and its result lands in slot i, so the output does
// not depend on the worker count or on scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "cqpv/rng.hpp"

namespace cqpv {

template <class Result, class Fn>
std::vector<Result> run_trials(std::size_t trials, std::uint64_t master_seed, unsigned workers, Fn&& fn) {
  std::vector<Result> out(trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= trials) return;
      try {
        Rng rng(child_seed(master_seed, i));
        out[i] = fn(i, rng);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(trials);
        return;
      }
    }
  };
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(trials, 1))));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace cqpv
