#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "looptune/space.hpp"
#include "looptune/surrogate.hpp"
#include "looptune/trial.hpp"

namespace looptune {

struct SearchSettings {
  std::size_t max_evals = 100;
  double kappa = 1.96;
  SurrogateKind learner = SurrogateKind::rf;
  std::size_t batch_size = 512;
  std::optional<std::size_t> n_init;  // default: max(10, 2 * parameters)
  std::uint64_t seed = 1234;
  // Metric given to failed trials before any trial has succeeded.
  double failure_penalty = 600.0;
};

// Initial random evaluations for a space, clamped to max_evals.
std::size_t initial_sample_count(const SearchSettings& settings, const ParamSpace& space);

struct SearchState {
  std::vector<TrialRecord> evaluated;   // executed trials in order
  std::optional<std::size_t> best_index;  // into evaluated; minimum ok metric
  std::size_t budget_used = 0;          // executed + skipped
  std::size_t skipped = 0;              // duplicate draws on the GP path
  bool exhausted = false;

  const TrialRecord* best() const { return best_index ? &evaluated[*best_index] : nullptr; }
  std::optional<double> worst_ok_metric() const;
  ConfigurationSet executed() const;
};

// score_i = mean_i - kappa * std_i; lower is more promising.
std::vector<double> acquisition_lcb(std::span<const Prediction> predictions, double kappa);

// First index of the minimum score.
std::size_t lcb_argmin(std::span<const double> scores);

struct Proposal {
  std::vector<Configuration> batch;
  std::vector<Prediction> predictions;
  std::vector<double> scores;
  std::size_t chosen = 0;

  const Configuration& configuration() const { return batch[chosen]; }
};

// Samples a batch of unevaluated valid configurations and picks the LCB
// argmin. std::nullopt signals that every valid configuration was evaluated.
std::optional<Proposal> propose(const ParamSpace& space, Sampler& sampler, const SearchState& state,
                                const Surrogate& model, const SearchSettings& settings);

using EvaluateFn = std::function<TrialRecord(const Configuration&)>;

struct SearchHooks {
  std::function<void(const Proposal&)> on_propose;
  std::function<void(const TrialRecord&, const SearchState&)> on_trial;
  std::function<void(const Configuration&, const SearchState&)> on_skip;
};

// Initial random phase followed by fit/propose/evaluate iterations. The GP
// learner draws one random configuration per iteration instead and spends
// budget without executing when the draw was already evaluated. `prior`
// trials (a resumed run) count against the budget.
SearchState run_search(const ParamSpace& space, const EvaluateFn& evaluate,
                       const SearchSettings& settings, const SearchHooks& hooks = {},
                       std::span<const TrialRecord> prior = {});

TrainingSet training_set(const ParamSpace& space, std::span<const TrialRecord> trials,
                         EncodingScheme scheme);

}  // namespace looptune
