#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "looptune/space.hpp"
#include "support.hpp"

using namespace looptune;
using looptune::testing::fixture;

namespace {

const std::string kPackA = "#pragma clang loop(j2) pack array(A) allocate(malloc)";
const std::string kPackB = "#pragma clang loop(i1) pack array(B) allocate(malloc)";
const std::string kInterchange =
    "#pragma clang loop(i1,j1,k1,i2,j2) interchange permutation(j1,k1,i1,j2,i2)";

Configuration syr2k_config(std::string p0, std::optional<std::string> p1, std::string p2,
                           std::string p3, std::string p4, std::string p5) {
  Configuration cfg;
  cfg.set("P0", std::move(p0));
  cfg.set("P1", std::move(p1));
  cfg.set("P2", std::move(p2));
  cfg.set("P3", std::move(p3));
  cfg.set("P4", std::move(p4));
  cfg.set("P5", std::move(p5));
  return cfg;
}

Parameter param(std::string name, std::vector<std::string> values,
                ParamKind kind = ParamKind::categorical) {
  Parameter p;
  p.name = std::move(name);
  p.kind = kind;
  p.values = std::move(values);
  p.default_value = p.values.front();
  return p;
}

// Random space: up to 5 parameters, each child of at most one earlier
// parameter, plus a few forbidden clauses.
ParamSpace random_space(Rng& rng) {
  const std::size_t n = 1 + rng.index(5);
  std::vector<Parameter> params;
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::string> values;
    const std::size_t size = 1 + rng.index(4);
    for (std::size_t v = 0; v < size; ++v) values.push_back("v" + std::to_string(v));
    params.push_back(param("P" + std::to_string(p), values,
                           rng.bernoulli(0.5) ? ParamKind::ordinal : ParamKind::categorical));
  }
  std::vector<ActivationCondition> conditions;
  for (std::size_t child = 1; child < n; ++child) {
    if (!rng.bernoulli(0.5)) continue;
    const std::size_t parent = rng.index(child);
    ActivationCondition c{params[child].name, params[parent].name, {}};
    for (const auto& v : params[parent].values)
      if (rng.bernoulli(0.5)) c.when.push_back(v);
    if (c.when.empty()) c.when.push_back(params[parent].values.front());
    conditions.push_back(std::move(c));
  }
  std::vector<ForbiddenClause> forbidden;
  const std::size_t clauses = rng.index(3);
  for (std::size_t f = 0; f < clauses; ++f) {
    ForbiddenClause clause;
    const std::size_t terms = 1 + rng.index(std::min<std::size_t>(2, n));
    for (std::size_t t = 0; t < terms; ++t) {
      const auto& p = params[rng.index(n)];
      clause.assignments[p.name] = p.values[rng.index(p.values.size())];
    }
    forbidden.push_back(std::move(clause));
  }
  return ParamSpace(std::move(params), std::move(conditions), std::move(forbidden), rng.next());
}

// Brute force over the full domain product. A child is inactive when its
// parent is inactive or holds a non-triggering value; distinct resulting
// configurations are collected in a set.
std::set<std::map<std::string, std::optional<std::string>>> brute_force(const ParamSpace& space) {
  const auto& params = space.parameters();
  std::set<std::map<std::string, std::optional<std::string>>> out;
  std::vector<std::size_t> digits(params.size(), 0);
  while (true) {
    std::map<std::string, std::optional<std::string>> cfg;
    for (std::size_t p = 0; p < params.size(); ++p) cfg[params[p].name] = params[p].values[digits[p]];
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& c : space.conditions()) {
        const auto& parent = cfg[c.parent];
        const bool active =
            parent && std::find(c.when.begin(), c.when.end(), *parent) != c.when.end();
        if (!active && cfg[c.child]) {
          cfg[c.child] = std::nullopt;
          changed = true;
        }
      }
    }
    bool banned = false;
    for (const auto& clause : space.forbidden()) {
      bool all = true;
      for (const auto& [name, value] : clause.assignments) all = all && cfg[name] == value;
      banned = banned || all;
    }
    if (!banned) out.insert(cfg);

    std::size_t p = params.size();
    while (p > 0 && ++digits[p - 1] == params[p - 1].values.size()) digits[--p] = 0;
    if (p == 0) break;
  }
  return out;
}

}  // namespace

TEST_CASE("syr2k space reports the pragma-space product and the condition-aware count") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  CHECK(space.size() == 6);
  CHECK(space.seed() == 1234);
  const Cardinality c = space.cardinality();
  CHECK(c.product == 10648);
  CHECK_FALSE(c.product_overflowed);
  REQUIRE(c.exact.has_value());
  // P1 collapses to one inactive state whenever P0 is off: (1 + 2) * 2 * 11^3.
  CHECK(*c.exact == 3 * 2 * 1331);
}

TEST_CASE("MNIST space product is 10x10x5x7") {
  const ParamSpace space = load_space(fixture("mnist/space.json"));
  CHECK(space.cardinality().product == 3500);
  CHECK(space.cardinality().exact == 3500);
}

TEST_CASE("single eleven-value parameter counts eleven") {
  const ParamSpace space = looptune::testing::ordinal_grid(1, 11);
  CHECK(space.cardinality().product == 11);
  CHECK(space.cardinality().exact == 11);
}

TEST_CASE("validate follows the pack condition of the syr2k space") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));

  SUBCASE("pack A off with inactive P1 is valid") {
    CHECK(space.validate(syr2k_config(" ", std::nullopt, kInterchange, "4", "8", "16")).valid());
  }
  SUBCASE("pack A off with P1 set violates the condition") {
    const Verdict v = space.validate(syr2k_config(" ", kPackB, " ", "4", "8", "16"));
    REQUIRE_FALSE(v.valid());
    CHECK(v.violations.front().subject == "P1");
  }
  SUBCASE("pack A on with P1 inactive violates the condition") {
    const Verdict v = space.validate(syr2k_config(kPackA, std::nullopt, " ", "4", "8", "16"));
    REQUIRE_FALSE(v.valid());
    CHECK(v.violations.front().subject == "P1");
  }
  SUBCASE("value outside the domain names the parameter") {
    const Verdict v = space.validate(syr2k_config(kPackA, kPackB, " ", "4", "8", "2048"));
    REQUIRE_FALSE(v.valid());
    CHECK(v.violations.front().subject == "P5");
  }
  SUBCASE("unknown parameter is a structural error") {
    Configuration cfg = syr2k_config(" ", std::nullopt, " ", "4", "8", "16");
    cfg.set("P9", "x");
    CHECK_THROWS_AS(space.validate(cfg), UnknownParameterError);
  }
}

TEST_CASE("value outside a two-value domain is invalid") {
  const ParamSpace space({param("P", {"a", "b"})}, {}, {}, 1);
  Configuration cfg;
  cfg.set("P", "c");
  CHECK_FALSE(space.validate(cfg).valid());
  cfg.set("P", "b");
  CHECK(space.validate(cfg).valid());
}

TEST_CASE("forbidden clauses invalidate fully matched configurations") {
  const ParamSpace space({param("A", {"x", "y"}), param("B", {"u", "v"})}, {},
                         {ForbiddenClause{{{"A", "y"}, {"B", "v"}}}}, 3);
  CHECK(space.cardinality().exact == 3);
  Configuration cfg;
  cfg.set("A", "y");
  cfg.set("B", "v");
  const Verdict v = space.validate(cfg);
  REQUIRE_FALSE(v.valid());
  CHECK(v.violations.front().subject == "forbidden[0]");
}

TEST_CASE("malformed spaces are rejected at construction") {
  CHECK_THROWS_AS(ParamSpace({param("A", {"x"}), param("A", {"y"})}, {}, {}, 0), SpaceError);
  CHECK_THROWS_AS(ParamSpace({param("A", {"x", "x"})}, {}, {}, 0), SpaceError);
  Parameter bad_default = param("A", {"x"});
  bad_default.default_value = "z";
  CHECK_THROWS_AS(ParamSpace({bad_default}, {}, {}, 0), SpaceError);
  CHECK_THROWS_AS(ParamSpace({param("A", {"x"})}, {{"A", "A", {"x"}}}, {}, 0), SpaceError);
  CHECK_THROWS_AS(ParamSpace({param("A", {"x"}), param("B", {"y"})},
                             {{"A", "B", {"y"}}, {"B", "A", {"x"}}}, {}, 0),
                  SpaceError);
  CHECK_THROWS_AS(ParamSpace({param("A", {"x"}), param("B", {"y"}), param("C", {"z"})},
                             {{"C", "A", {"x"}}, {"C", "B", {"y"}}}, {}, 0),
                  SpaceError);
  CHECK_THROWS_AS(ParamSpace({param("A", {"x"})}, {}, {ForbiddenClause{{{"A", "q"}}}}, 0),
                  SpaceError);
  CHECK_THROWS_AS(parse_space(nlohmann::json::parse(R"({"parameters": 3})")), SpaceError);
}

TEST_CASE("cardinality equals brute-force enumeration on random spaces") {
  Rng rng(2024);
  for (int round = 0; round < 300; ++round) {
    const ParamSpace space = random_space(rng);
    const auto oracle = brute_force(space);
    CAPTURE(round);
    REQUIRE(space.cardinality().exact.has_value());
    CHECK(*space.cardinality().exact == oracle.size());
    const auto all = space.enumerate();
    CHECK(all.size() == oracle.size());
    for (const auto& a : all) CHECK(oracle.contains(space.to_configuration(a).values()));
  }
}

TEST_CASE("sampled configurations are valid, distinct and outside the exclusion set") {
  Rng rng(77);
  for (int round = 0; round < 200; ++round) {
    const ParamSpace space = random_space(rng);
    CAPTURE(round);
    if (*space.cardinality().exact == 0) {
      Sampler sampler(space);
      CHECK_THROWS_AS(sampler.sample(3), EmptySpaceError);
      continue;
    }
    Sampler sampler(space, rng.next());
    ConfigurationSet exclude;
    const auto first = sampler.sample(2);
    exclude.insert(first.begin(), first.end());
    const auto batch = sampler.sample(1 + rng.index(40), exclude);
    ConfigurationSet seen;
    for (const auto& cfg : batch) {
      CHECK(space.validate(cfg).valid());
      CHECK_FALSE(exclude.contains(cfg));
      CHECK(seen.insert(cfg).second);
    }
    const std::uint64_t left = *space.cardinality().exact - exclude.size();
    CHECK(batch.size() <= left);
  }
}

TEST_CASE("sampling 10000 draws from the bundled spaces never yields an invalid configuration") {
  for (const char* file : {"syr2k/space.json", "mnist/space.json"}) {
    CAPTURE(file);
    const ParamSpace space = load_space(fixture(file));
    Sampler sampler(space);
    for (int i = 0; i < 10000; ++i) REQUIRE(space.validate(sampler.draw()).valid());
    const auto batch = sampler.sample(10000);
    CHECK(batch.size() == *space.cardinality().exact);
    for (const auto& cfg : batch) REQUIRE(space.validate(cfg).valid());
  }
}

TEST_CASE("deactivated parent forces the child inactive in every sample") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  Sampler sampler(space, 5);
  for (const auto& cfg : sampler.sample(2000)) {
    if (*cfg.at("P0") == kPackA) {
      CHECK(cfg.at("P1").has_value());
    } else {
      CHECK_FALSE(cfg.at("P1").has_value());
    }
  }
}

TEST_CASE("identically seeded samplers produce identical streams") {
  const ParamSpace a = load_space(fixture("syr2k/space.json"));
  const ParamSpace b = load_space(fixture("syr2k/space.json"));
  Sampler sa(a), sb(b);
  CHECK(sa.sample(50) == sb.sample(50));
  for (int i = 0; i < 100; ++i) CHECK(sa.draw() == sb.draw());
  Sampler sc(a, 99);
  Sampler sd(a);
  CHECK(sc.sample(50) != sd.sample(50));
}

TEST_CASE("two-member space with both members excluded samples nothing") {
  const ParamSpace space({param("A", {"x", "y"})}, {}, {}, 1);
  Sampler sampler(space);
  const auto both = sampler.sample(2);
  REQUIRE(both.size() == 2);
  const ConfigurationSet exclude(both.begin(), both.end());
  CHECK(sampler.sample(5, exclude).empty());
}

TEST_CASE("tree encoding uses ranks and codes, gp encoding normalizes and one-hot encodes") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  const Configuration cfg = syr2k_config(kPackA, " ", " ", "16", "2048", "4");
  const auto tree = space.encode(cfg, EncodingScheme::tree);
  CHECK(tree == std::vector<double>{0, 1, 1, 2, 10, 0});

  const auto off = space.encode(syr2k_config(" ", std::nullopt, " ", "4", "4", "4"),
                                EncodingScheme::tree);
  CHECK(off[1] == -1.0);

  const auto gp = space.encode(cfg, EncodingScheme::gp);
  REQUIRE(gp.size() == space.encoded_size(EncodingScheme::gp));
  // P0 one-hot, P1 one-hot plus activity bit, P2 one-hot, three ordinals.
  CHECK(gp.size() == 2 + 3 + 2 + 3);
  CHECK(gp[0] == 1.0);
  CHECK(gp[1] == 0.0);
  CHECK(gp[4] == 1.0);
  CHECK(gp[7] == doctest::Approx(2.0 / 10.0));
  CHECK(gp[8] == doctest::Approx(1.0));
  CHECK(gp[9] == 0.0);

  const auto gp_off = space.encode(syr2k_config(" ", std::nullopt, " ", "4", "4", "4"),
                                   EncodingScheme::gp);
  CHECK(gp_off[2] == 0.0);
  CHECK(gp_off[3] == 0.0);
  CHECK(gp_off[4] == 0.0);

  const ParamSpace two({param("C", {"first", "second"})}, {}, {}, 0);
  Configuration first;
  first.set("C", "first");
  CHECK(two.encode(first, EncodingScheme::gp) == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(space.encode(syr2k_config(" ", kPackB, " ", "4", "4", "4"), EncodingScheme::tree),
                  SpaceError);
}

TEST_CASE("decode inverts tree encoding on every valid syr2k configuration") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  const auto all = space.enumerate();
  REQUIRE(all.size() == 7986);
  for (const auto& a : all) {
    const Configuration cfg = space.to_configuration(a);
    REQUIRE(space.decode(space.encode(cfg, EncodingScheme::tree)) == cfg);
  }
}

TEST_CASE("encodings are injective over valid configurations") {
  Rng rng(31);
  std::vector<ParamSpace> spaces;
  spaces.push_back(load_space(fixture("syr2k/space.json")));
  spaces.push_back(load_space(fixture("mnist/space.json")));
  for (int i = 0; i < 100; ++i) spaces.push_back(random_space(rng));
  for (const auto& space : spaces) {
    for (auto scheme : {EncodingScheme::tree, EncodingScheme::gp}) {
      std::set<std::vector<double>> seen;
      const auto all = space.enumerate();
      for (const auto& a : all) {
        const auto x = space.encode(a, scheme);
        CHECK(x.size() == space.encoded_size(scheme));
        seen.insert(x);
      }
      CHECK(seen.size() == all.size());
    }
  }
}

TEST_CASE("space JSON round-trips through to_json") {
  const ParamSpace space = load_space(fixture("syr2k/space.json"));
  const ParamSpace again = parse_space(nlohmann::json::parse(to_json(space).dump()));
  CHECK(again.cardinality().exact == space.cardinality().exact);
  CHECK(again.seed() == space.seed());
  CHECK(describe(again.default_configuration(), again) ==
        describe(space.default_configuration(), space));
  CHECK(space.validate(space.default_configuration()).valid());
}
