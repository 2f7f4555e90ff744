#include "looptune/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

namespace looptune {

std::size_t initial_sample_count(const SearchSettings& settings, const ParamSpace& space) {
  const std::size_t n = settings.n_init.value_or(std::max<std::size_t>(10, 2 * space.size()));
  return std::min(n, settings.max_evals);
}

std::optional<double> SearchState::worst_ok_metric() const {
  std::optional<double> worst;
  for (const auto& trial : evaluated) {
    if (trial.ok() && (!worst || trial.metric > *worst)) worst = trial.metric;
  }
  return worst;
}

ConfigurationSet SearchState::executed() const {
  ConfigurationSet out;
  for (const auto& trial : evaluated) out.insert(trial.configuration);
  return out;
}

std::vector<double> acquisition_lcb(std::span<const Prediction> predictions, double kappa) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");
  std::vector<double> scores;
  scores.reserve(predictions.size());
  for (const auto& p : predictions) scores.push_back(p.mean - kappa * p.std);
  return scores;
}

std::size_t lcb_argmin(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("lcb_argmin of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

TrainingSet training_set(const ParamSpace& space, std::span<const TrialRecord> trials,
                         EncodingScheme scheme) {
  TrainingSet data;
  data.inputs.reserve(trials.size());
  data.targets.reserve(trials.size());
  for (const auto& trial : trials) {
    if (!std::isfinite(trial.metric)) continue;
    data.inputs.push_back(space.encode(trial.configuration, scheme));
    data.targets.push_back(trial.metric);
  }
  return data;
}

std::optional<Proposal> propose(const ParamSpace& space, Sampler& sampler, const SearchState& state,
                                const Surrogate& model, const SearchSettings& settings) {
  Proposal proposal;
  proposal.batch = sampler.sample(settings.batch_size, state.executed());
  if (proposal.batch.empty()) return std::nullopt;

  const EncodingScheme scheme = scheme_for(model.kind());
  std::vector<std::vector<double>> encoded;
  encoded.reserve(proposal.batch.size());
  for (const auto& cfg : proposal.batch) encoded.push_back(space.encode(cfg, scheme));
  proposal.predictions = model.predict(encoded);
  proposal.scores = acquisition_lcb(proposal.predictions, settings.kappa);
  proposal.chosen = lcb_argmin(proposal.scores);
  return proposal;
}

namespace {

void check_settings(const SearchSettings& settings) {
  if (settings.max_evals == 0) throw std::invalid_argument("max_evals must be positive");
  if (settings.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(settings.kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");
  if (settings.n_init && *settings.n_init == 0) throw std::invalid_argument("n_init must be positive");
  if (settings.n_init && *settings.n_init > settings.max_evals)
    throw std::invalid_argument("n_init must not exceed max_evals");
}

class SearchLoop {
 public:
  SearchLoop(const ParamSpace& space, const EvaluateFn& evaluate, const SearchSettings& settings,
             const SearchHooks& hooks)
      : space_(space), evaluate_(evaluate), settings_(settings), hooks_(hooks),
        sampler_(space, settings.seed) {}

  SearchState run(std::span<const TrialRecord> prior) {
    for (const auto& trial : prior) record(trial, false);

    const std::size_t n_init = initial_sample_count(settings_, space_);
    if (state_.budget_used < n_init) {
      const std::size_t want = n_init - state_.budget_used;
      const auto batch = sampler_.sample(want, executed_);
      for (const auto& cfg : batch) execute(cfg);
      if (batch.size() < want && settings_.learner != SurrogateKind::gp) {
        state_.exhausted = true;
        return std::move(state_);
      }
    }

    std::uint64_t iteration = 0;
    while (state_.budget_used < settings_.max_evals) {
      if (settings_.learner == SurrogateKind::gp) {
        gp_step();
      } else if (!model_step(iteration)) {
        state_.exhausted = true;
        break;
      }
      ++iteration;
    }
    return std::move(state_);
  }

 private:
  void gp_step() {
    Configuration cfg = sampler_.draw();
    if (executed_.contains(cfg)) {
      ++state_.budget_used;
      ++state_.skipped;
      if (hooks_.on_skip) hooks_.on_skip(cfg, state_);
      return;
    }
    execute(cfg);
  }

  bool model_step(std::uint64_t iteration) {
    const TrainingSet data =
        training_set(space_, state_.evaluated, scheme_for(settings_.learner));
    std::unique_ptr<Surrogate> model;
    try {
      model = fit(settings_.learner, data, mix_seed(settings_.seed, iteration));
    } catch (const FitError&) {
      // Too little data for this learner: fall back to a random candidate.
      const auto batch = sampler_.sample(1, executed_);
      if (batch.empty()) return false;
      execute(batch.front());
      return true;
    }
    auto proposal = propose(space_, sampler_, state_, *model, settings_);
    if (!proposal) return false;
    if (hooks_.on_propose) hooks_.on_propose(*proposal);
    execute(proposal->configuration());
    return true;
  }

  void execute(const Configuration& cfg) {
    const double penalty = penalty_metric(state_.worst_ok_metric(), settings_.failure_penalty);
    TrialRecord trial;
    try {
      trial = evaluate_(cfg);
    } catch (const std::exception& e) {
      trial = TrialRecord{};
      trial.status = TrialStatus::run_fail;
      trial.message = e.what();
      trial.metric = penalty;
    }
    trial.configuration = cfg;
    if (trial.ok() && !std::isfinite(trial.metric)) {
      trial.status = TrialStatus::run_fail;
      trial.message = "non-finite metric";
    }
    if (!trial.ok() && !std::isfinite(trial.metric)) trial.metric = penalty;
    record(trial, true);
  }

  void record(const TrialRecord& trial, bool notify) {
    state_.evaluated.push_back(trial);
    executed_.insert(trial.configuration);
    ++state_.budget_used;
    if (trial.ok()) {
      const auto* best = state_.best();
      if (!best || trial.metric < best->metric) state_.best_index = state_.evaluated.size() - 1;
    }
    if (notify && hooks_.on_trial) hooks_.on_trial(state_.evaluated.back(), state_);
  }

  const ParamSpace& space_;
  const EvaluateFn& evaluate_;
  const SearchSettings& settings_;
  const SearchHooks& hooks_;
  Sampler sampler_;
  SearchState state_;
  ConfigurationSet executed_;
};

}  // namespace

SearchState run_search(const ParamSpace& space, const EvaluateFn& evaluate,
                       const SearchSettings& settings, const SearchHooks& hooks,
                       std::span<const TrialRecord> prior) {
  check_settings(settings);
  SearchLoop loop(space, evaluate, settings, hooks);
  return loop.run(prior);
}

}  // namespace looptune
