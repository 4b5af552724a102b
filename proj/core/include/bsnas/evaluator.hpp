#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "bsnas/operation_graph.hpp"
#include "bsnas/rng.hpp"
#include "bsnas/search_space.hpp"

namespace bsnas {

/// Maps an architecture to an estimated top-1 accuracy in [0, 1].
///
/// `evaluate` must not mutate shared state when `concurrency_safe()` holds.
/// `notify_training` is only ever called while no evaluation is in flight.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  /// `noise` is a per-call stream owned by the caller.
  [[nodiscard]] virtual double evaluate(const Architecture& arch, Rng& noise) const = 0;
  /// The supernet trained for `virtual_epochs` on the alive part of `graph`.
  virtual void notify_training(const OperationGraph& graph, double virtual_epochs) {
    (void)graph;
    (void)virtual_epochs;
  }
  [[nodiscard]] virtual bool concurrency_safe() const { return false; }
  [[nodiscard]] virtual bool deterministic() const { return true; }

  /// Mutable training state, for checkpoints. Stateless backends return null.
  [[nodiscard]] virtual nlohmann::json save_state() const { return nullptr; }
  virtual void load_state(const nlohmann::json& state) { (void)state; }
};

/// Evaluates `archs` in slot order. Slot i draws noise from
/// `noise_base.split(first_index + i)`, so results do not depend on
/// `workers`. Fans out only when the evaluator is concurrency safe.
/// Failures surface as EvaluatorError (lowest failing slot wins).
std::vector<double> evaluate_batch(const Evaluator& evaluator, std::span<const Architecture> archs,
                                   const Rng& noise_base, std::uint64_t first_index,
                                   int workers = 1);

}  // namespace bsnas
