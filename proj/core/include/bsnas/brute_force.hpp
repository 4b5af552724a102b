#pragma once

#include <cstdint>
#include <functional>

#include "bsnas/evaluator.hpp"

namespace bsnas {

/// Visits every alive-respecting architecture: clusters in order, feasible
/// channels ascending, then (k, t) pairs in canonical order per layer
/// (last layer varies fastest).
void for_each_alive_architecture(const OperationGraph& graph,
                                 const std::function<void(const Architecture&)>& visit);

struct BruteForceResult {
  Architecture arch;
  double score = 0.0;
  BigInt count = 0;
};

/// Exhaustive argmax of `evaluator` over the alive space; ties go to the
/// smaller canonical string. Refuses (SpaceTooLargeError, with the exact
/// count) when the space holds more than `limit` architectures.
BruteForceResult brute_force_best(const SearchSpace& space, const OperationGraph& graph,
                                  const Evaluator& evaluator, std::uint64_t limit,
                                  std::uint64_t noise_seed = 0);

}  // namespace bsnas
