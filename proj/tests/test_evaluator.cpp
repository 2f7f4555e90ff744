#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>
#include <json.hpp>

#include "looptune/evaluator.hpp"
#include "support.hpp"

using namespace looptune;
using looptune::testing::fixture;
using looptune::testing::read_file;
using looptune::testing::TempDir;
using looptune::testing::write_file;

namespace {

ParamSpace marker_space(std::initializer_list<const char*> names) {
  std::vector<Parameter> ps;
  for (const char* name : names) {
    Parameter p;
    p.name = name;
    p.kind = ParamKind::ordinal;
    p.values = {"1", "2"};
    p.default_value = "1";
    ps.push_back(std::move(p));
  }
  return ParamSpace(std::move(ps), {}, {}, 1);
}

Configuration config(std::map<std::string, Configuration::Value> values) {
  return Configuration(std::move(values));
}

// Eval spec for a one-parameter shell script template written into `dir`.
EvalSpec script_spec(const TempDir& dir, const std::string& script, nlohmann::json extra = {}) {
  write_file(dir / "t.sh", script);
  nlohmann::json doc = {{"template", "t.sh"}, {"run", "sh {source}"}, {"timeout_seconds", 10}};
  for (auto& [k, v] : extra.items()) doc[k] = v;
  return parse_eval_spec(doc, dir.path());
}

}  // namespace

TEST_CASE("syr2k golden file for the best reported configuration") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  const CodeTemplate tpl(read_file(fixture("syr2k/mold.c")), space);
  const Configuration cfg = config({
      {"P0", "#pragma clang loop(j2) pack array(A) allocate(malloc)"},
      {"P1", "#pragma clang loop(i1) pack array(B) allocate(malloc)"},
      {"P2", "#pragma clang loop(i1,j1,k1,i2,j2) interchange permutation(j1,k1,i1,j2,i2)"},
      {"P3", "50"}, {"P4", "128"}, {"P5", "256"}});
  REQUIRE(space.validate(cfg).valid());
  CHECK(tpl.instantiate(cfg) == read_file(fixture("syr2k/expected/gbrt_best.c")));
}

TEST_CASE("syr2k golden file for the default configuration") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  const CodeTemplate tpl(read_file(fixture("syr2k/mold.c")), space);
  const Configuration cfg = space.default_configuration();
  CHECK_FALSE(cfg.is_active("P1"));
  CHECK(tpl.instantiate(cfg) == read_file(fixture("syr2k/expected/default.c")));
}

TEST_CASE("longest marker wins and identifier characters end a marker") {
  const ParamSpace space = [] {
    std::vector<Parameter> ps;
    for (int i = 0; i <= 10; ++i) {
      Parameter p;
      p.name = "P" + std::to_string(i);
      p.kind = ParamKind::ordinal;
      p.values = {std::to_string(i), "x" + std::to_string(i)};
      p.default_value = std::to_string(i);
      ps.push_back(std::move(p));
    }
    return ParamSpace(std::move(ps), {}, {}, 1);
  }();
  std::string text;
  for (int i = 0; i <= 9; ++i) text += "#P" + std::to_string(i) + " ";
  text += "#P10|#P1";
  const CodeTemplate tpl(text, space);
  CHECK(tpl.instantiate(space.default_configuration()) == "0 1 2 3 4 5 6 7 8 9 10|1");
}

TEST_CASE("unknown markers are rejected") {
  const ParamSpace space = marker_space({"P0", "P1"});
  CHECK_THROWS_AS(CodeTemplate("#P0 #P1 #P2", space), TemplateError);
  CHECK_THROWS_AS(CodeTemplate("#P0 #P1 #P10", space), TemplateError);
}

TEST_CASE("preprocessor lines that are not markers pass through") {
  const ParamSpace space = marker_space({"P0"});
  const CodeTemplate tpl("#include <x.h>\n#pragma once\n#P0\n", space);
  CHECK(tpl.instantiate(space.default_configuration()) == "#include <x.h>\n#pragma once\n1\n");
}

TEST_CASE("every parameter needs a marker in declaration order") {
  const ParamSpace space = marker_space({"P0", "P1"});
  CHECK_THROWS_AS(CodeTemplate("#P0 only", space), TemplateError);
  CHECK_THROWS_AS(CodeTemplate("#P1 #P0", space), TemplateError);
  CHECK_NOTHROW(CodeTemplate("#P0 #P1 #P0", space));
}

TEST_CASE("stripped template removes every marker and is idempotent") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  const CodeTemplate tpl(read_file(fixture("syr2k/mold.c")), space);
  const std::string once = tpl.stripped();
  CHECK(once.find("#P") == std::string::npos);
  const ParamSpace empty({}, {}, {}, 1);
  CHECK(CodeTemplate(once, empty).stripped() == once);
  CHECK(CodeTemplate(once, empty).instantiate(Configuration{}) == once);
}

TEST_CASE("instantiation with distinct values gives distinct sources") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  const CodeTemplate tpl(read_file(fixture("syr2k/mold.c")), space);
  Sampler sampler(space, 3);
  std::set<std::string> sources;
  const auto sample = sampler.sample(200);
  for (const auto& cfg : sample) sources.insert(tpl.instantiate(cfg));
  CHECK(sources.size() == sample.size());
}

TEST_CASE("last number and metric parsing") {
  CHECK(last_number("kernel time 0.25\nsum 3e-2\n") == doctest::Approx(0.03));
  CHECK(last_number("x=-1.5") == doctest::Approx(-1.5));
  CHECK_FALSE(last_number("no digits"));

  MetricSpec inverse{MetricMode::inverse_stdout, "accuracy: ([0-9.]+)"};
  const auto m = parse_metric(inverse, "epochs 12 batch 100\naccuracy: 0.986\n", 0.0);
  REQUIRE(m);
  CHECK(*m == doctest::Approx(1.0 / 0.986).epsilon(1e-12));

  MetricSpec regex{MetricMode::stdout_regex, "t=([0-9.]+)"};
  CHECK(*parse_metric(regex, "t=1.0 t=2.5 end 9", 0.0) == 2.5);
  CHECK_FALSE(parse_metric(regex, "nothing", 0.0));

  MetricSpec wall{MetricMode::walltime, ""};
  CHECK(*parse_metric(wall, "", 1.75) == 1.75);
}

TEST_CASE("fnv digests match published vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(content_digest("a") == "af63dc4c8601ec8c");
}

TEST_CASE("eval spec parsing resolves paths and validates fields") {
  const EvalSpec spec = load_eval_spec(fixture("mnist/eval.json"));
  CHECK(spec.template_path == fixture("mnist/train.sh"));
  CHECK(spec.space == fixture("mnist/space.json"));
  CHECK(spec.metric.mode == MetricMode::inverse_stdout);
  CHECK(spec.timeout_seconds == 60);
  CHECK(spec.spec_dir == fixture("mnist"));

  CHECK_THROWS_AS(parse_eval_spec(nlohmann::json::array(), "."), EvalSpecError);
  CHECK_THROWS_AS(parse_eval_spec({{"run", "x"}}, "."), EvalSpecError);
  CHECK_THROWS_AS(parse_eval_spec({{"template", "t"}, {"run", "x"}, {"timeout_seconds", 0}}, ".")
                      .check(),
                  EvalSpecError);
  CHECK_THROWS_AS(
      parse_eval_spec({{"template", "t"}, {"run", "x"}, {"metric", {{"mode", "stdout_regex"}}}},
                      ".")
          .check(),
      EvalSpecError);
  CHECK_THROWS_AS(parse_metric_mode("median"), EvalSpecError);
}

TEST_CASE("running a template reports the metric and writes logs") {
  TempDir dir;
  const ParamSpace space = marker_space({"P0"});
  Evaluator eval(space, script_spec(dir, "echo 'time #P0.5'\n"), dir / "work");
  const Configuration cfg = config({{"P0", "2"}});
  const TrialRecord t = eval.evaluate(cfg);
  CHECK(t.ok());
  CHECK(t.metric == 2.5);
  CHECK(t.stdout_digest == content_digest("time 2.5\n"));
  CHECK(std::filesystem::exists(eval.source_path(cfg)));
  CHECK(read_file(eval.source_path(cfg)) == "echo 'time 2.5'\n");
  const std::string stem = eval.file_stem(cfg);
  CHECK(read_file(dir / "work" / "logs" / (stem + ".run0.out")) == "time 2.5\n");
  CHECK(eval.file_stem(cfg) != eval.file_stem(config({{"P0", "1"}})));
}

TEST_CASE("repeats keep the minimum metric") {
  TempDir dir;
  const ParamSpace space = marker_space({"P0"});
  const std::string script =
      "#P0\nn=$(cat count 2>/dev/null || echo 0); n=$((n+1)); echo $n > count\n"
      "case $n in 1) echo 5;; 2) echo 3;; *) echo 4;; esac\n";
  Evaluator eval(space, script_spec(dir, script, {{"repeats", 3}}), dir / "work");
  const TrialRecord t = eval.evaluate(space.default_configuration());
  CHECK(t.ok());
  CHECK(t.metric == 3.0);
}

TEST_CASE("failure statuses carry a penalty metric") {
  TempDir dir;
  const ParamSpace space = marker_space({"P0"});

  SUBCASE("nonzero exit is a run failure") {
    Evaluator eval(space, script_spec(dir, "#P0\nexit 4\n"), dir / "work");
    const TrialRecord t = eval.evaluate(space.default_configuration());
    CHECK(t.status == TrialStatus::run_fail);
    CHECK(t.message == "exit status 4");
    CHECK(t.metric == 10.0);
  }
  SUBCASE("missing metric is a run failure") {
    Evaluator eval(space, script_spec(dir, "#P0\necho none\n"), dir / "work");
    CHECK(eval.evaluate(space.default_configuration()).status == TrialStatus::run_fail);
  }
  SUBCASE("failing compile command") {
    Evaluator eval(space,
                   script_spec(dir, "#P0\n", {{"compile", "echo 'bad line' >&2; exit 1"}}),
                   dir / "work");
    const TrialRecord t = eval.evaluate(space.default_configuration());
    CHECK(t.status == TrialStatus::compile_fail);
    CHECK(t.message.find("bad line") != std::string::npos);
  }
  SUBCASE("penalty is ten times the worst success") {
    Evaluator eval(space, script_spec(dir, "[ #P0 = 1 ] && echo 7 || exit 1\n"), dir / "work");
    CHECK(eval.evaluate(config({{"P0", "1"}})).metric == 7.0);
    const TrialRecord bad = eval.evaluate(config({{"P0", "2"}}));
    CHECK(bad.status == TrialStatus::run_fail);
    CHECK(bad.metric == 70.0);
  }
}

TEST_CASE("compile step and placeholders") {
  TempDir dir;
  const ParamSpace space = marker_space({"P0"});
  write_file(dir / "helper.sh", "echo 0.#P0 ; echo helper\n");
  const EvalSpec spec = script_spec(
      dir, "echo 0.#P0\n",
      {{"compile", "cp {source} {binary} && test -d {workdir} && test -f {spec_dir}/helper.sh"},
       {"run", "sh {binary}"}});
  Evaluator eval(space, spec, dir / "work dir");
  const TrialRecord t = eval.evaluate(config({{"P0", "2"}}));
  CHECK(t.ok());
  CHECK(t.metric == 0.2);
}

TEST_CASE("a slow run is killed and reported as a timeout") {
  const EvalSpec spec = load_eval_spec(fixture("timeout/eval.json"));
  const ParamSpace space = load_space(spec.space);
  TempDir dir;
  Evaluator eval(space, spec, dir.path());
  const auto start = std::chrono::steady_clock::now();
  const TrialRecord t = eval.evaluate(space.default_configuration());
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(t.status == TrialStatus::timeout);
  CHECK(elapsed < spec.timeout_seconds + kKillGrace);
  CHECK(t.metric == spec.timeout_seconds);
}

TEST_CASE("run_command reports exit codes, signals and output") {
  const auto ok = run_command("printf out; printf err >&2", ".", {}, 5);
  CHECK(ok.success());
  CHECK(ok.out == "out");
  CHECK(ok.err == "err");
  CHECK(run_command("exit 3", ".", {}, 5).exit_code == 3);
  const auto killed = run_command("kill -TERM $$", ".", {}, 5);
  CHECK(killed.signal == 15);
  CHECK_FALSE(killed.success());
  CHECK(run_command("echo $LT_X", ".", {{"LT_X", "v"}}, 5).out == "v\n");
  CHECK(shell_quote("a'b") == "'a'\\''b'");
}

TEST_CASE("background children do not outlive a timeout") {
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_command("sleep 30 & sleep 30", ".", {}, 0.5);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(r.timed_out);
  CHECK(elapsed < 0.5 + kKillGrace);
}
