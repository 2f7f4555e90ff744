#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "looptune/optimizer.hpp"
#include "support.hpp"

using namespace looptune;
using looptune::testing::ordinal_grid;
using looptune::testing::synthetic_surface;

namespace {

// Mean and std looked up from the first encoded coordinate.
class TableModel : public Surrogate {
 public:
  explicit TableModel(std::vector<Prediction> table, std::size_t dimension = 1)
      : Surrogate(dimension), table_(std::move(table)) {}
  SurrogateKind kind() const override { return SurrogateKind::rf; }

 protected:
  Prediction predict_one(std::span<const double> x) const override {
    return table_.at(static_cast<std::size_t>(x[0]));
  }

 private:
  std::vector<Prediction> table_;
};

ParamSpace three_letter_space() {
  Parameter p;
  p.name = "P0";
  p.kind = ParamKind::ordinal;
  p.values = {"a", "b", "c"};
  p.default_value = "a";
  return ParamSpace({p}, {}, {}, 1234);
}

TrialRecord ok_trial(double metric) {
  TrialRecord t;
  t.metric = metric;
  return t;
}

EvaluateFn synthetic_evaluator(std::size_t* calls = nullptr) {
  return [calls](const Configuration& cfg) {
    if (calls) ++*calls;
    return ok_trial(synthetic_surface(cfg));
  };
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("lcb with kappa zero picks the lowest mean") {
  const std::vector<Prediction> p{{3, 0.5}, {1, 0.1}, {2, 0.2}};
  const auto scores = acquisition_lcb(p, 0.0);
  CHECK(lcb_argmin(scores) == 1);
}

TEST_CASE("lcb with a huge kappa picks the largest std") {
  const std::vector<Prediction> p{{1, 0.1}, {9, 5.0}, {2, 0.2}};
  CHECK(lcb_argmin(acquisition_lcb(p, 1e6)) == 1);
}

TEST_CASE("lcb score is mean minus kappa times std") {
  const std::vector<Prediction> p{{2.0, 1.0}};
  CHECK(acquisition_lcb(p, 1.96)[0] == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("lcb rejects negative kappa and empty score lists") {
  const std::vector<Prediction> p{{1, 1}};
  CHECK_THROWS_AS(acquisition_lcb(p, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(lcb_argmin(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("lcb argmin breaks ties by first index") {
  CHECK(lcb_argmin(std::vector<double>{2, 1, 1, 3}) == 1);
}

TEST_CASE("lcb extremes agree with brute force over random lists") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> mean(-100, 100), sd(0, 10);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Prediction> p(len(rng));
    for (auto& x : p) x = {mean(rng), sd(rng)};
    const auto lo_mean = std::min_element(p.begin(), p.end(), [](auto& a, auto& b) {
      return a.mean < b.mean;
    });
    const auto hi_std = std::max_element(p.begin(), p.end(), [](auto& a, auto& b) {
      return a.std < b.std;
    });
    CHECK(lcb_argmin(acquisition_lcb(p, 0.0)) ==
          static_cast<std::size_t>(lo_mean - p.begin()));
    CHECK(lcb_argmin(acquisition_lcb(p, 1e6)) ==
          static_cast<std::size_t>(hi_std - p.begin()));
  }
}

TEST_CASE("lcb choice is invariant to shifting every mean") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mean(-10, 10), sd(0, 3), shift(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Prediction> p(12);
    for (auto& x : p) x = {mean(rng), sd(rng)};
    auto shifted = p;
    const double c = shift(rng);
    for (auto& x : shifted) x.mean += c;
    const auto a = acquisition_lcb(p, 1.96);
    const auto b = acquisition_lcb(shifted, 1.96);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i] + c));
    CHECK(lcb_argmin(a) == lcb_argmin(b));
  }
}

TEST_CASE("propose picks the configuration with the lowest score") {
  const ParamSpace space = three_letter_space();
  Sampler sampler(space, 7);
  SearchState state;
  const TableModel model({{5, 0}, {2, 0}, {9, 0}});
  SearchSettings settings;
  settings.kappa = 0.0;
  settings.batch_size = 3;
  const auto proposal = propose(space, sampler, state, model, settings);
  REQUIRE(proposal);
  CHECK(proposal->batch.size() == 3);
  CHECK(*proposal->configuration().at("P0") == "b");
  CHECK(proposal->predictions[proposal->chosen].mean == 2.0);
}

TEST_CASE("propose skips evaluated configurations and signals exhaustion") {
  const ParamSpace space = three_letter_space();
  Sampler sampler(space, 7);
  SearchState state;
  const TableModel model({{5, 0}, {2, 0}, {9, 0}});
  SearchSettings settings;
  settings.kappa = 0.0;

  Configuration b;
  b.set("P0", "b");
  state.evaluated.push_back(ok_trial(2));
  state.evaluated.back().configuration = b;
  auto proposal = propose(space, sampler, state, model, settings);
  REQUIRE(proposal);
  CHECK(*proposal->configuration().at("P0") == "a");

  for (const char* v : {"a", "c"}) {
    Configuration cfg;
    cfg.set("P0", v);
    state.evaluated.push_back(ok_trial(1));
    state.evaluated.back().configuration = cfg;
  }
  CHECK_FALSE(propose(space, sampler, state, model, settings));
}

TEST_CASE("initial sample count defaults to ten or twice the parameters") {
  SearchSettings settings;
  CHECK(initial_sample_count(settings, ordinal_grid(3, 4)) == 10);
  CHECK(initial_sample_count(settings, ordinal_grid(7, 2)) == 14);
  settings.max_evals = 5;
  CHECK(initial_sample_count(settings, ordinal_grid(3, 4)) == 5);
  settings.max_evals = 100;
  settings.n_init = 3;
  CHECK(initial_sample_count(settings, ordinal_grid(3, 4)) == 3);
}

TEST_CASE("invalid search settings are rejected") {
  const ParamSpace space = ordinal_grid(2, 3);
  const auto eval = [](const Configuration&) { return ok_trial(1); };
  SearchSettings s;
  s.max_evals = 0;
  CHECK_THROWS_AS(run_search(space, eval, s), std::invalid_argument);
  s = {};
  s.kappa = -1;
  CHECK_THROWS_AS(run_search(space, eval, s), std::invalid_argument);
  s = {};
  s.n_init = 200;
  CHECK_THROWS_AS(run_search(space, eval, s), std::invalid_argument);
  s = {};
  s.batch_size = 0;
  CHECK_THROWS_AS(run_search(space, eval, s), std::invalid_argument);
}

TEST_CASE("model learners stop once a small space is exhausted") {
  const ParamSpace space = ordinal_grid(3, 2);
  for (auto kind : {SurrogateKind::rf, SurrogateKind::et, SurrogateKind::gbrt}) {
    CAPTURE(to_string(kind));
    std::size_t calls = 0;
    SearchSettings s;
    s.learner = kind;
    s.max_evals = 200;
    const auto state = run_search(space, [&](const Configuration& c) {
      ++calls;
      return ok_trial(std::stoi(*c.at("P0")) + 2.0 * std::stoi(*c.at("P1")) + 0.5);
    }, s);
    CHECK(calls == 8);
    CHECK(state.evaluated.size() == 8);
    CHECK(state.exhausted);
    CHECK(state.budget_used == 8);
  }
}

TEST_CASE("the GP path spends the whole budget on a small space") {
  const ParamSpace space = ordinal_grid(3, 2);
  std::size_t calls = 0;
  std::size_t skips = 0;
  SearchSettings s;
  s.learner = SurrogateKind::gp;
  s.max_evals = 200;
  SearchHooks hooks;
  hooks.on_skip = [&](const Configuration&, const SearchState&) { ++skips; };
  const auto state = run_search(space, [&](const Configuration&) {
    ++calls;
    return ok_trial(1.0);
  }, s, hooks);
  CHECK(calls <= 8);
  CHECK(state.evaluated.size() == calls);
  CHECK(state.budget_used == 200);
  CHECK(state.skipped == 200 - calls);
  CHECK(skips == state.skipped);
}

TEST_CASE("no configuration is executed twice and best so far is monotone") {
  const ParamSpace space = ordinal_grid(3, 11);
  for (auto kind : {SurrogateKind::rf, SurrogateKind::et, SurrogateKind::gbrt,
                    SurrogateKind::gp}) {
    CAPTURE(to_string(kind));
    SearchSettings s;
    s.learner = kind;
    s.max_evals = 40;
    s.batch_size = 64;
    double best = INFINITY;
    bool monotone = true;
    SearchHooks hooks;
    hooks.on_trial = [&](const TrialRecord&, const SearchState& st) {
      const double now = st.best()->metric;
      if (now > best) monotone = false;
      best = now;
    };
    const auto state = run_search(space, synthetic_evaluator(), s, hooks);
    ConfigurationSet seen;
    for (const auto& t : state.evaluated) CHECK(seen.insert(t.configuration).second);
    CHECK(monotone);
    CHECK(state.budget_used == 40);
    const auto it = std::min_element(state.evaluated.begin(), state.evaluated.end(),
                                     [](auto& a, auto& b) { return a.metric < b.metric; });
    CHECK(state.best()->metric == it->metric);
  }
}

TEST_CASE("runs with the same seed are identical") {
  const ParamSpace space = ordinal_grid(3, 11);
  SearchSettings s;
  s.max_evals = 30;
  s.batch_size = 64;
  const auto a = run_search(space, synthetic_evaluator(), s);
  const auto b = run_search(space, synthetic_evaluator(), s);
  REQUIRE(a.evaluated.size() == b.evaluated.size());
  for (std::size_t i = 0; i < a.evaluated.size(); ++i)
    CHECK(a.evaluated[i].configuration == b.evaluated[i].configuration);
}

TEST_CASE("every model-phase trial is the LCB argmin of its batch") {
  const ParamSpace space = ordinal_grid(3, 11);
  SearchSettings s;
  s.max_evals = 30;
  s.batch_size = 32;
  std::vector<Configuration> proposed;
  SearchHooks hooks;
  hooks.on_propose = [&](const Proposal& p) {
    const auto scores = acquisition_lcb(p.predictions, s.kappa);
    CHECK(p.chosen == lcb_argmin(scores));
    for (std::size_t i = 0; i < scores.size(); ++i) CHECK(p.scores[i] == scores[i]);
    proposed.push_back(p.configuration());
  };
  const auto state = run_search(space, synthetic_evaluator(), s, hooks);
  const std::size_t n_init = initial_sample_count(s, space);
  REQUIRE(proposed.size() == 30 - n_init);
  for (std::size_t i = 0; i < proposed.size(); ++i)
    CHECK(state.evaluated[n_init + i].configuration == proposed[i]);
}

TEST_CASE("failed evaluations receive a penalty and the search continues") {
  const ParamSpace space = ordinal_grid(2, 5);
  SearchSettings s;
  s.max_evals = 12;
  s.failure_penalty = 20.0;
  int call = 0;
  const auto state = run_search(space, [&](const Configuration&) -> TrialRecord {
    ++call;
    if (call == 1) throw std::runtime_error("boom");
    if (call == 3) {
      TrialRecord t;
      t.status = TrialStatus::compile_fail;
      t.metric = NAN;
      return t;
    }
    return ok_trial(call == 2 ? 3.0 : 1.0);
  }, s);
  REQUIRE(state.evaluated.size() == 12);
  CHECK(state.evaluated[0].status == TrialStatus::run_fail);
  CHECK(state.evaluated[0].message == "boom");
  CHECK(state.evaluated[0].metric == 20.0);
  CHECK(state.evaluated[2].status == TrialStatus::compile_fail);
  CHECK(state.evaluated[2].metric == 30.0);
  CHECK(state.best()->metric == 1.0);
}

TEST_CASE("non-finite metrics from the evaluator count as failures") {
  const ParamSpace space = ordinal_grid(1, 3);
  SearchSettings s;
  s.max_evals = 3;
  const auto state = run_search(space, [](const Configuration&) { return ok_trial(NAN); }, s);
  for (const auto& t : state.evaluated) {
    CHECK(t.status == TrialStatus::run_fail);
    CHECK(t.metric == 600.0);
  }
  CHECK(state.best() == nullptr);
}

TEST_CASE("prior trials count against the budget and are not repeated") {
  const ParamSpace space = ordinal_grid(3, 11);
  SearchSettings s;
  s.max_evals = 20;
  s.batch_size = 64;
  const auto first = run_search(space, synthetic_evaluator(), s);
  std::vector<TrialRecord> prior(first.evaluated.begin(), first.evaluated.begin() + 12);
  std::size_t calls = 0;
  const auto resumed = run_search(space, synthetic_evaluator(&calls), s, {}, prior);
  CHECK(calls == 8);
  CHECK(resumed.budget_used == 20);
  ConfigurationSet seen;
  for (const auto& t : resumed.evaluated) CHECK(seen.insert(t.configuration).second);
}

TEST_CASE("a fitted forest proposes better than the median pool configuration") {
  const ParamSpace space = ordinal_grid(2, 11);
  const auto surface = [](const Configuration& c) {
    const double x = std::stoi(*c.at("P0")) - 7, y = std::stoi(*c.at("P1")) - 3;
    return 1.0 + 0.05 * x * x + 0.08 * y * y;
  };
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Sampler sampler(space, seed);
    SearchState state;
    for (const auto& cfg : sampler.sample(20)) {
      state.evaluated.push_back(ok_trial(surface(cfg)));
      state.evaluated.back().configuration = cfg;
    }
    const auto model =
        fit(SurrogateKind::rf, training_set(space, state.evaluated, EncodingScheme::tree), seed);
    std::vector<double> rest;
    const auto executed = state.executed();
    Sampler all(space, seed);
    for (const auto& cfg : all.sample(121, executed)) rest.push_back(surface(cfg));
    SearchSettings s;
    s.batch_size = 512;
    const auto proposal = propose(space, sampler, state, *model, s);
    REQUIRE(proposal);
    if (surface(proposal->configuration()) <= median(rest)) ++wins;
  }
  CHECK(wins >= 8);
}
