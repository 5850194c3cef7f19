#pragma once

// Path-parallel runner shared by the estimators. Each worker owns a table and
// processes paths w, w + W, w + 2W, ...; tables are merged once at the end.
// Counts are integers, so the merged result does not depend on the worker
// count or on scheduling.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "genattr/attribution.hpp"
#include "genattr/errors.hpp"

namespace genattr::detail {

// Runs fn(path, worker) for every path in [0, paths). When several paths
// throw, the failure of the lowest path index is rethrown, wrapped in
// PathFailure with the original exception nested.
template <class Fn>
void run_paths(std::uint64_t paths, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min<std::uint64_t>(workers, paths));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::uint64_t> failed_at(workers, std::numeric_limits<std::uint64_t>::max());

  auto body = [&](std::size_t w) {
    for (std::uint64_t t = w; t < paths; t += workers) {
      try {
        fn(t, w);
      } catch (...) {
        errors[w] = std::current_exception();
        failed_at[w] = t;
        return;
      }
    }
  };

  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body, w);
    for (auto& th : threads) th.join();
  }

  const auto first = std::min_element(failed_at.begin(), failed_at.end());
  if (*first == std::numeric_limits<std::uint64_t>::max()) return;
  const auto& err = errors[static_cast<std::size_t>(first - failed_at.begin())];
  try {
    std::rethrow_exception(err);
  } catch (const PathFailure&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(PathFailure(*first, e.what()));
  }
}

inline AttributionTable merge_all(const std::vector<AttributionTable>& tables) {
  AttributionTable out;
  for (const auto& t : tables) out = merge_attributions(out, t);
  return out;
}

}  // namespace genattr::detail
