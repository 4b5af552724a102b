#include "bsnas/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "bsnas/errors.hpp"

namespace bsnas {

SurrogateParams SurrogateParams::generate(const SearchSpace& space, std::uint64_t seed,
                                          double coupling, double half_life, double noise_sd) {
  if (half_life <= 0.0) throw ConfigError("surrogate half_life must be positive");
  if (noise_sd < 0.0) throw ConfigError("surrogate noise_sd must be non-negative");
  SurrogateParams p;
  p.coupling = coupling;
  p.half_life = half_life;
  p.noise_sd = noise_sd;

  Rng rng = Rng::stream(seed, "surrogate-params");
  const int layers = space.layer_count();
  for (int l = 0; l < layers; ++l) {
    std::vector<double> row(space.layer_ops(l).size());
    for (auto& u : row) u = rng.normal();
    p.quality.push_back(std::move(row));
  }
  for (const auto& cluster : space.clusters()) {
    std::vector<double> row(cluster.choices.channel_choices.size());
    for (auto& v : row) v = rng.normal();
    p.channel_utility.push_back(std::move(row));
  }
  for (int l = 0; l + 1 < layers; ++l) {
    std::vector<double> row(space.layer_ops(l).size() * space.layer_ops(l + 1).size());
    for (auto& w : row) w = rng.normal();
    p.interaction.push_back(std::move(row));
  }
  // Three prior standard deviations: greedy best/worst architectures land
  // inside [floor, ceiling] instead of being pinned to it.
  p.scale = 3.0 * std::sqrt(static_cast<double>(layers) + space.cluster_count() +
                            coupling * coupling * std::max(layers - 1, 0));
  return p;
}

void to_json(nlohmann::json& j, const SurrogateParams& p) {
  j = nlohmann::json{{"coupling", p.coupling},
                     {"half_life", p.half_life},
                     {"noise_sd", p.noise_sd},
                     {"floor", p.floor},
                     {"ceiling", p.ceiling},
                     {"scale", p.scale},
                     {"quality", p.quality},
                     {"channel_utility", p.channel_utility},
                     {"interaction", p.interaction}};
}

void from_json(const nlohmann::json& j, SurrogateParams& p) {
  j.at("coupling").get_to(p.coupling);
  j.at("half_life").get_to(p.half_life);
  j.at("noise_sd").get_to(p.noise_sd);
  j.at("floor").get_to(p.floor);
  j.at("ceiling").get_to(p.ceiling);
  j.at("scale").get_to(p.scale);
  j.at("quality").get_to(p.quality);
  j.at("channel_utility").get_to(p.channel_utility);
  j.at("interaction").get_to(p.interaction);
}

SurrogateEvaluator::SurrogateEvaluator(SearchSpace space, SurrogateParams params)
    : space_(std::move(space)), params_(std::move(params)) {
  const auto layers = static_cast<std::size_t>(space_.layer_count());
  bool shape_ok = params_.quality.size() == layers &&
                  params_.channel_utility.size() == space_.clusters().size() &&
                  params_.interaction.size() == (layers > 0 ? layers - 1 : 0);
  for (std::size_t l = 0; shape_ok && l < layers; ++l) {
    const auto ops = space_.layer_ops(static_cast<int>(l)).size();
    shape_ok = params_.quality[l].size() == ops;
    if (shape_ok && l + 1 < layers) {
      shape_ok = params_.interaction[l].size() ==
                 ops * space_.layer_ops(static_cast<int>(l + 1)).size();
    }
  }
  for (std::size_t c = 0; shape_ok && c < space_.clusters().size(); ++c) {
    shape_ok = params_.channel_utility[c].size() ==
               space_.clusters()[c].choices.channel_choices.size();
  }
  if (!shape_ok) throw ConfigError("surrogate parameters do not match the search space");
  if (params_.scale <= 0.0) throw ConfigError("surrogate scale must be positive");
  reset_training();
}

void SurrogateEvaluator::reset_training() {
  exposure_.clear();
  for (int l = 0; l < space_.layer_count(); ++l) {
    exposure_.emplace_back(space_.layer_ops(l).size(), 0.0);
  }
}

double SurrogateEvaluator::raw_fitness(const Architecture& arch, bool fully_trained) const {
  require_valid(space_, arch);
  double raw = 0.0;
  int previous = -1;
  for (int l = 0; l < space_.layer_count(); ++l) {
    const int op = space_.op_index(l, space_.op_of(arch, l));
    double progress = 1.0;
    if (!fully_trained) {
      const double n = exposure_[l][op];
      progress = n / (n + params_.half_life);
    }
    raw += params_.quality[l][op] * progress;
    if (previous >= 0) {
      raw += params_.coupling *
             params_.interaction[l - 1][static_cast<std::size_t>(previous) *
                                            space_.layer_ops(l).size() +
                                        op];
    }
    previous = op;
  }
  for (int c = 0; c < space_.cluster_count(); ++c) {
    const auto& channels = space_.clusters()[c].choices.channel_choices;
    const auto index = std::find(channels.begin(), channels.end(), arch.cluster_genes[c]) -
                       channels.begin();
    raw += params_.channel_utility[c][index];
  }
  return raw;
}

double SurrogateEvaluator::squash(double raw) const {
  return params_.floor +
         (params_.ceiling - params_.floor) / (1.0 + std::exp(-raw / params_.scale));
}

double SurrogateEvaluator::estimate(const Architecture& arch) const {
  return squash(raw_fitness(arch, false));
}

double SurrogateEvaluator::true_fitness(const Architecture& arch) const {
  return squash(raw_fitness(arch, true));
}

double SurrogateEvaluator::evaluate(const Architecture& arch, Rng& noise) const {
  double score = estimate(arch);
  if (params_.noise_sd > 0.0) score += noise.normal(0.0, params_.noise_sd);
  return std::clamp(score, 0.0, 1.0);
}

void SurrogateEvaluator::notify_training(const OperationGraph& graph, double virtual_epochs) {
  if (graph.layer_count() != space_.layer_count()) {
    throw ContractViolation("training graph does not match the surrogate's space");
  }
  // Fair single-path training: a layer sees channel c with probability
  // 1/|feasible| and then one of the (k, t) pairs alive under c uniformly.
  // Exposure is measured in full-graph epochs, i.e. scaled by O_N.
  for (int c = 0; c < graph.cluster_count(); ++c) {
    const auto feasible = graph.feasible_channels(c);
    if (feasible.empty()) continue;
    for (int layer : graph.cluster_layers(c)) {
      const double ops = graph.op_count(layer);
      for (int channel : feasible) {
        const auto pairs = graph.alive_pairs(layer, channel);
        const double share = ops / (static_cast<double>(feasible.size()) * pairs.size());
        for (const auto& pair : pairs) {
          const int op = graph.op_index(layer, Op{pair.kernel, pair.expansion, channel});
          exposure_[layer][op] += virtual_epochs * share;
        }
      }
    }
  }
}

nlohmann::json SurrogateEvaluator::save_state() const { return {{"exposure", exposure_}}; }

void SurrogateEvaluator::load_state(const nlohmann::json& state) {
  if (state.is_null()) {
    reset_training();
    return;
  }
  auto exposure = state.at("exposure").get<std::vector<std::vector<double>>>();
  if (exposure.size() != exposure_.size()) {
    throw ConfigError("surrogate training state does not match the search space");
  }
  for (std::size_t l = 0; l < exposure.size(); ++l) {
    if (exposure[l].size() != exposure_[l].size()) {
      throw ConfigError("surrogate training state does not match the search space");
    }
  }
  exposure_ = std::move(exposure);
}

}  // namespace bsnas
