#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "bsnas/evaluator.hpp"

namespace bsnas {

/// Parameters of the synthetic supernet. Raw fitness of an architecture is
///
///   sum_l quality[l][op_l] * g(n[l][op_l])
///   + sum_c channel_utility[c][gene_c]
///   + coupling * sum_l interaction[l][op_l][op_{l+1}]
///
/// with g(n) = n / (n + half_life) and n the virtual epochs an op has been
/// trained. Scores are floor + (ceiling - floor) * logistic(raw / scale).
struct SurrogateParams {
  double coupling = 0.2;
  double half_life = 60.0;
  double noise_sd = 0.01;
  double floor = 0.4;
  double ceiling = 0.8;
  double scale = 1.0;

  std::vector<std::vector<double>> quality;          // [layer][op]
  std::vector<std::vector<double>> channel_utility;  // [cluster][channel index]
  std::vector<std::vector<double>> interaction;      // [layer][op * O_N(l+1) + next op]

  /// Draws every table from Rng::stream(seed, "surrogate-params") in layer,
  /// cluster, interaction order; `scale` is three prior standard deviations
  /// of the raw fitness, 3 * sqrt(H + C + coupling^2 * (H - 1)).
  static SurrogateParams generate(const SearchSpace& space, std::uint64_t seed,
                                  double coupling = 0.2, double half_life = 60.0,
                                  double noise_sd = 0.01);

  friend bool operator==(const SurrogateParams&, const SurrogateParams&) = default;
};

void to_json(nlohmann::json& j, const SurrogateParams& p);
void from_json(const nlohmann::json& j, SurrogateParams& p);

class SurrogateEvaluator final : public Evaluator {
 public:
  SurrogateEvaluator(SearchSpace space, SurrogateParams params);

  [[nodiscard]] std::string name() const override { return "surrogate"; }
  /// estimate(arch) plus Normal(0, noise_sd) noise, clamped to [0, 1].
  [[nodiscard]] double evaluate(const Architecture& arch, Rng& noise) const override;
  void notify_training(const OperationGraph& graph, double virtual_epochs) override;
  [[nodiscard]] bool concurrency_safe() const override { return true; }
  [[nodiscard]] bool deterministic() const override { return params_.noise_sd == 0.0; }
  [[nodiscard]] nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

  /// Noise-free supernet estimate under the current training state.
  [[nodiscard]] double estimate(const Architecture& arch) const;
  /// Stand-alone fitness: every op fully trained, no noise.
  [[nodiscard]] double true_fitness(const Architecture& arch) const;

  [[nodiscard]] double exposure(int layer, int op) const { return exposure_.at(layer).at(op); }
  void set_exposure(int layer, int op, double epochs) { exposure_.at(layer).at(op) = epochs; }
  void reset_training();

  [[nodiscard]] const SurrogateParams& params() const { return params_; }
  [[nodiscard]] const SearchSpace& space() const { return space_; }

 private:
  [[nodiscard]] double raw_fitness(const Architecture& arch, bool fully_trained) const;
  [[nodiscard]] double squash(double raw) const;

  SearchSpace space_;
  SurrogateParams params_;
  std::vector<std::vector<double>> exposure_;
};

}  // namespace bsnas
