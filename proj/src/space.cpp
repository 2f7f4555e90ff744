#include "looptune/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace looptune {

std::string_view to_string(ParamKind kind) {
  return kind == ParamKind::ordinal ? "ordinal" : "categorical";
}

ParamKind parse_param_kind(std::string_view text) {
  if (text == "ordinal") return ParamKind::ordinal;
  if (text == "categorical") return ParamKind::categorical;
  throw SpaceError("unknown parameter kind '" + std::string(text) + "'");
}

std::optional<std::size_t> Parameter::index_of(std::string_view value) const {
  auto it = std::find(values.begin(), values.end(), value);
  if (it == values.end()) return std::nullopt;
  return static_cast<std::size_t>(it - values.begin());
}

bool Configuration::is_active(const std::string& name) const {
  auto it = values_.find(name);
  return it != values_.end() && it->second.has_value();
}

// =================================================================================================

ParamSpace::ParamSpace(std::vector<Parameter> parameters,
                       std::vector<ActivationCondition> conditions,
                       std::vector<ForbiddenClause> forbidden, std::uint64_t seed)
    : parameters_(std::move(parameters)),
      conditions_(std::move(conditions)),
      forbidden_(std::move(forbidden)),
      seed_(seed) {
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    const auto& p = parameters_[i];
    if (p.name.empty()) throw SpaceError("parameter " + std::to_string(i) + " has an empty name");
    if (!index_.emplace(p.name, i).second) {
      throw SpaceError("duplicate parameter name '" + p.name + "'");
    }
    if (p.values.empty()) throw SpaceError("parameter '" + p.name + "' has no values");
    std::set<std::string> seen;
    for (const auto& v : p.values) {
      if (!seen.insert(v).second) {
        throw SpaceError("parameter '" + p.name + "' repeats value '" + v + "'");
      }
    }
    if (!p.index_of(p.default_value)) {
      throw SpaceError("default '" + p.default_value + "' of parameter '" + p.name +
                       "' is not one of its values");
    }
  }

  parent_condition_.assign(parameters_.size(), std::nullopt);
  for (std::size_t c = 0; c < conditions_.size(); ++c) {
    const auto& cond = conditions_[c];
    auto child = find(cond.child);
    auto parent = find(cond.parent);
    if (!child) throw SpaceError("condition references unknown child '" + cond.child + "'");
    if (!parent) throw SpaceError("condition references unknown parent '" + cond.parent + "'");
    if (*child == *parent) throw SpaceError("parameter '" + cond.child + "' conditions itself");
    if (parent_condition_[*child]) {
      throw SpaceError("parameter '" + cond.child + "' is the child of more than one condition");
    }
    if (cond.when.empty()) {
      throw SpaceError("condition on '" + cond.child + "' has no triggering values");
    }
    std::vector<bool> trig(parameters_[*parent].values.size(), false);
    for (const auto& v : cond.when) {
      auto idx = parameters_[*parent].index_of(v);
      if (!idx) {
        throw SpaceError("condition on '" + cond.child + "' triggers on '" + v +
                         "', which is not a value of '" + cond.parent + "'");
      }
      trig[*idx] = true;
    }
    parent_condition_[*child] = c;
    triggers_.push_back(std::move(trig));
  }

  // Parents before children; a pass without progress means a cycle.
  std::vector<bool> placed(parameters_.size(), false);
  while (topo_order_.size() < parameters_.size()) {
    bool progress = false;
    for (std::size_t i = 0; i < parameters_.size(); ++i) {
      if (placed[i]) continue;
      const auto& cond = parent_condition_[i];
      if (!cond || placed[index_.find(conditions_[*cond].parent)->second]) {
        placed[i] = true;
        topo_order_.push_back(i);
        progress = true;
      }
    }
    if (!progress) throw SpaceError("activation conditions form a cycle");
  }

  for (std::size_t f = 0; f < forbidden_.size(); ++f) {
    const auto& clause = forbidden_[f];
    if (clause.assignments.empty()) {
      throw SpaceError("forbidden clause " + std::to_string(f) + " is empty");
    }
    std::vector<std::pair<std::size_t, int>> idx;
    for (const auto& [name, value] : clause.assignments) {
      auto p = find(name);
      if (!p) throw SpaceError("forbidden clause references unknown parameter '" + name + "'");
      auto v = parameters_[*p].index_of(value);
      if (!v) {
        throw SpaceError("forbidden clause references unknown value '" + value + "' of '" + name +
                         "'");
      }
      idx.emplace_back(*p, static_cast<int>(*v));
    }
    forbidden_index_.push_back(std::move(idx));
  }

  cardinality_.product = 1;
  for (const auto& p : parameters_) {
    if (cardinality_.product > std::numeric_limits<std::uint64_t>::max() / p.values.size()) {
      cardinality_.product_overflowed = true;
      cardinality_.product = std::numeric_limits<std::uint64_t>::max();
      break;
    }
    cardinality_.product *= p.values.size();
  }
  if (!cardinality_.product_overflowed && cardinality_.product <= kEnumerationBound) {
    std::uint64_t count = 0;
    for_each_canonical([&](const Assignment&) { ++count; });
    cardinality_.exact = count;
  }
}

std::optional<std::size_t> ParamSpace::find(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Parameter& ParamSpace::parameter(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw UnknownParameterError("unknown parameter '" + std::string(name) + "'");
  return parameters_[*idx];
}

bool ParamSpace::forbidden_match(const Assignment& assignment) const {
  for (const auto& clause : forbidden_index_) {
    bool all = std::all_of(clause.begin(), clause.end(),
                           [&](const auto& pv) { return assignment[pv.first] == pv.second; });
    if (all) return true;
  }
  return false;
}

void ParamSpace::normalize(Assignment& assignment) const {
  for (std::size_t p : topo_order_) {
    const auto& cond = parent_condition_[p];
    bool active = true;
    if (cond) {
      std::size_t parent = index_.find(conditions_[*cond].parent)->second;
      int pv = assignment[parent];
      active = pv >= 0 && triggers_[*cond][static_cast<std::size_t>(pv)];
    }
    if (!active) {
      assignment[p] = -1;
    } else if (assignment[p] < 0) {
      assignment[p] = 0;
    }
  }
}

bool ParamSpace::is_valid(const Assignment& assignment) const {
  if (assignment.size() != parameters_.size()) return false;
  Assignment normalized = assignment;
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    int v = assignment[p];
    if (v < -1 || v >= static_cast<int>(parameters_[p].values.size())) return false;
  }
  normalize(normalized);
  // normalize() only changes entries whose activity disagrees with the rules.
  return normalized == assignment && !forbidden_match(assignment);
}

// Visits each structurally distinct valid assignment once. A full assignment
// over all domains is canonical when every inactive parameter sits on choice
// 0, so each distinct configuration is produced by exactly one canonical
// full assignment.
template <typename Visit>
void ParamSpace::for_each_canonical(Visit&& visit) const {
  const std::size_t n = parameters_.size();
  Assignment full(n, 0);
  Assignment normalized(n, 0);
  while (true) {
    normalized = full;
    normalize(normalized);
    bool canonical = true;
    for (std::size_t p = 0; p < n; ++p) {
      if (normalized[p] < 0 && full[p] != 0) {
        canonical = false;
        break;
      }
    }
    if (canonical && !forbidden_match(normalized)) visit(normalized);

    std::size_t p = n;
    while (p > 0) {
      --p;
      if (++full[p] < static_cast<int>(parameters_[p].values.size())) break;
      full[p] = 0;
      if (p == 0) return;
    }
    if (n == 0) return;
  }
}

std::vector<Assignment> ParamSpace::enumerate() const {
  if (cardinality_.product_overflowed || cardinality_.product > kEnumerationBound) {
    throw SpaceError("space too large to enumerate (" + std::to_string(cardinality_.product) +
                     " domain states)");
  }
  std::vector<Assignment> out;
  out.reserve(cardinality_.exact.value_or(0));
  for_each_canonical([&](const Assignment& a) { out.push_back(a); });
  return out;
}

Verdict ParamSpace::validate(const Configuration& cfg) const {
  for (const auto& [name, value] : cfg.values()) {
    if (!find(name)) throw UnknownParameterError("unknown parameter '" + name + "'");
  }

  Verdict verdict;
  Assignment assignment(parameters_.size(), -1);
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    const auto& param = parameters_[p];
    if (!cfg.contains(param.name)) {
      verdict.violations.push_back({param.name, "no value assigned"});
      continue;
    }
    const auto& value = cfg.at(param.name);
    if (!value) continue;
    auto idx = param.index_of(*value);
    if (!idx) {
      verdict.violations.push_back({param.name, "value '" + *value + "' is not in the domain"});
      continue;
    }
    assignment[p] = static_cast<int>(*idx);
  }

  for (std::size_t p : topo_order_) {
    const auto& cond = parent_condition_[p];
    if (!cond) {
      if (cfg.contains(parameters_[p].name) && !cfg.at(parameters_[p].name)) {
        verdict.violations.push_back({parameters_[p].name, "unconditional parameter is inactive"});
      }
      continue;
    }
    const auto& c = conditions_[*cond];
    std::size_t parent = index_.find(c.parent)->second;
    int pv = assignment[parent];
    bool should_be_active = pv >= 0 && triggers_[*cond][static_cast<std::size_t>(pv)];
    bool is_active = cfg.contains(c.child) && cfg.at(c.child).has_value();
    if (should_be_active && !is_active && cfg.contains(c.child)) {
      verdict.violations.push_back(
          {c.child, "inactive although condition on '" + c.parent + "' is satisfied"});
    } else if (!should_be_active && is_active) {
      verdict.violations.push_back(
          {c.child, "active although condition on '" + c.parent + "' is not satisfied"});
    }
  }

  for (std::size_t f = 0; f < forbidden_index_.size(); ++f) {
    const auto& clause = forbidden_index_[f];
    bool all = std::all_of(clause.begin(), clause.end(),
                           [&](const auto& pv) { return assignment[pv.first] == pv.second; });
    if (all) {
      verdict.violations.push_back(
          {"forbidden[" + std::to_string(f) + "]", "configuration matches a forbidden clause"});
    }
  }
  return verdict;
}

Configuration ParamSpace::to_configuration(const Assignment& assignment) const {
  Configuration cfg;
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    int v = assignment[p];
    if (v < 0) {
      cfg.set(parameters_[p].name, std::nullopt);
    } else {
      cfg.set(parameters_[p].name, parameters_[p].values[static_cast<std::size_t>(v)]);
    }
  }
  return cfg;
}

Assignment ParamSpace::to_assignment(const Configuration& cfg) const {
  for (const auto& [name, value] : cfg.values()) {
    if (!find(name)) throw UnknownParameterError("unknown parameter '" + name + "'");
  }
  Assignment out(parameters_.size(), -1);
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    const auto& param = parameters_[p];
    if (!cfg.contains(param.name)) throw SpaceError("no value for parameter '" + param.name + "'");
    const auto& value = cfg.at(param.name);
    if (!value) continue;
    auto idx = param.index_of(*value);
    if (!idx) {
      throw SpaceError("value '" + *value + "' is not in the domain of '" + param.name + "'");
    }
    out[p] = static_cast<int>(*idx);
  }
  return out;
}

Configuration ParamSpace::default_configuration() const {
  Assignment a(parameters_.size());
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    a[p] = static_cast<int>(*parameters_[p].index_of(parameters_[p].default_value));
  }
  normalize(a);
  return to_configuration(a);
}

// -------------------------------------------------------------------------------------------------
// Encoding

std::size_t ParamSpace::encoded_size(EncodingScheme scheme) const {
  if (scheme == EncodingScheme::tree) return parameters_.size();
  std::size_t n = 0;
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    n += parameters_[p].kind == ParamKind::ordinal ? 1 : parameters_[p].values.size();
    if (is_conditional(p)) ++n;
  }
  return n;
}

std::vector<double> ParamSpace::encode(const Configuration& cfg, EncodingScheme scheme) const {
  auto verdict = validate(cfg);
  if (!verdict.valid()) {
    const auto& v = verdict.violations.front();
    throw SpaceError("cannot encode invalid configuration: " + v.subject + ": " + v.message);
  }
  return encode(to_assignment(cfg), scheme);
}

std::vector<double> ParamSpace::encode(const Assignment& assignment, EncodingScheme scheme) const {
  std::vector<double> out;
  out.reserve(encoded_size(scheme));
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    const auto& param = parameters_[p];
    int v = assignment[p];
    if (scheme == EncodingScheme::tree) {
      out.push_back(static_cast<double>(v));
      continue;
    }
    if (param.kind == ParamKind::ordinal) {
      double span = static_cast<double>(param.values.size() - 1);
      out.push_back(v < 0 || span == 0.0 ? 0.0 : static_cast<double>(v) / span);
    } else {
      for (std::size_t k = 0; k < param.values.size(); ++k) {
        out.push_back(v >= 0 && static_cast<std::size_t>(v) == k ? 1.0 : 0.0);
      }
    }
    if (is_conditional(p)) out.push_back(v >= 0 ? 1.0 : 0.0);
  }
  return out;
}

Configuration ParamSpace::decode(const std::vector<double>& encoded) const {
  if (encoded.size() != parameters_.size()) {
    throw SpaceError("encoded vector has length " + std::to_string(encoded.size()) + ", expected " +
                     std::to_string(parameters_.size()));
  }
  Assignment a(parameters_.size());
  for (std::size_t p = 0; p < parameters_.size(); ++p) {
    double r = std::round(encoded[p]);
    if (r != encoded[p] || r < -1.0 ||
        r >= static_cast<double>(parameters_[p].values.size())) {
      throw SpaceError("component " + std::to_string(p) + " does not encode a choice");
    }
    a[p] = static_cast<int>(r);
  }
  if (!is_valid(a)) throw SpaceError("decoded assignment is not a valid configuration");
  return to_configuration(a);
}

// =================================================================================================
// Sampling

Sampler::Sampler(const ParamSpace& space, std::uint64_t seed) : space_(&space), rng_(seed) {}

bool Sampler::draw_raw(Assignment& out) {
  const auto& params = space_->parameters();
  out.assign(params.size(), 0);
  for (std::size_t p = 0; p < params.size(); ++p) {
    out[p] = static_cast<int>(rng_.index(params[p].values.size()));
  }
  space_->normalize(out);
  return space_->is_valid(out);
}

Assignment Sampler::draw_assignment() {
  constexpr int kMaxRejections = 10'000;
  Assignment a;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    if (draw_raw(a)) return a;
  }
  // Forbidden clauses reject almost everything: fall back to the enumerated set.
  auto card = space_->cardinality();
  if (!card.exact) throw EmptySpaceError("no valid configuration found by rejection sampling");
  if (*card.exact == 0) throw EmptySpaceError("space has no valid configurations");
  if (!valid_cache_) valid_cache_ = space_->enumerate();
  return (*valid_cache_)[rng_.index(valid_cache_->size())];
}

Configuration Sampler::draw() { return space_->to_configuration(draw_assignment()); }

std::vector<Configuration> Sampler::sample(std::size_t count, const ConfigurationSet& exclude) {
  if (count == 0) throw std::invalid_argument("sample count must be positive");
  auto card = space_->cardinality();
  if (card.exact && *card.exact == 0) throw EmptySpaceError("space has no valid configurations");

  std::set<Assignment> excluded;
  for (const auto& cfg : exclude) {
    try {
      auto a = space_->to_assignment(cfg);
      if (space_->is_valid(a)) excluded.insert(std::move(a));
    } catch (const SpaceError&) {
      // Configurations outside the space cannot collide with samples.
    }
  }

  std::vector<Configuration> out;
  if (card.exact) {
    const std::uint64_t remaining = *card.exact - excluded.size();
    if (remaining <= 4 * static_cast<std::uint64_t>(count)) {
      // Dense regime: take a seeded partial shuffle of what is left.
      if (!valid_cache_) valid_cache_ = space_->enumerate();
      std::vector<const Assignment*> pool;
      pool.reserve(remaining);
      for (const auto& a : *valid_cache_) {
        if (!excluded.contains(a)) pool.push_back(&a);
      }
      const std::size_t take = std::min<std::size_t>(count, pool.size());
      for (std::size_t i = 0; i < take; ++i) {
        std::size_t j = i + rng_.index(pool.size() - i);
        std::swap(pool[i], pool[j]);
        out.push_back(space_->to_configuration(*pool[i]));
      }
      return out;
    }
  }

  const std::size_t max_attempts = 1000 + 100 * count;
  std::set<Assignment> taken;
  Assignment a;
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < count; ++attempt) {
    if (!draw_raw(a)) continue;
    if (excluded.contains(a) || !taken.insert(a).second) continue;
    out.push_back(space_->to_configuration(a));
  }
  if (out.empty() && excluded.empty()) {
    throw EmptySpaceError("no valid configuration found by rejection sampling");
  }
  return out;
}

// =================================================================================================
// JSON

namespace {

std::string value_text(const nlohmann::json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw SpaceError(where + ": values must be strings or numbers");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpaceError("cannot open space file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ParamSpace parse_space(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SpaceError("space document must be a JSON object");
  if (!doc.contains("parameters") || !doc["parameters"].is_array()) {
    throw SpaceError("space document needs a 'parameters' array");
  }
  std::vector<Parameter> params;
  for (const auto& jp : doc["parameters"]) {
    if (!jp.is_object()) throw SpaceError("each parameter must be an object");
    Parameter p;
    if (!jp.contains("name") || !jp["name"].is_string()) {
      throw SpaceError("parameter without a string 'name'");
    }
    p.name = jp["name"].get<std::string>();
    p.kind = parse_param_kind(jp.value("kind", std::string("categorical")));
    if (!jp.contains("values") || !jp["values"].is_array()) {
      throw SpaceError("parameter '" + p.name + "' needs a 'values' array");
    }
    for (const auto& v : jp["values"]) p.values.push_back(value_text(v, "parameter '" + p.name + "'"));
    if (jp.contains("default")) {
      p.default_value = value_text(jp["default"], "parameter '" + p.name + "'");
    } else if (!p.values.empty()) {
      p.default_value = p.values.front();
    }
    params.push_back(std::move(p));
  }

  std::vector<ActivationCondition> conds;
  if (doc.contains("conditions")) {
    if (!doc["conditions"].is_array()) throw SpaceError("'conditions' must be an array");
    for (const auto& jc : doc["conditions"]) {
      if (!jc.is_object() || !jc.contains("child") || !jc.contains("parent") ||
          !jc.contains("when") || !jc["when"].is_array()) {
        throw SpaceError("each condition needs 'child', 'parent' and a 'when' array");
      }
      ActivationCondition c;
      c.child = jc["child"].get<std::string>();
      c.parent = jc["parent"].get<std::string>();
      for (const auto& v : jc["when"]) c.when.push_back(value_text(v, "condition on '" + c.child + "'"));
      conds.push_back(std::move(c));
    }
  }

  std::vector<ForbiddenClause> forbidden;
  if (doc.contains("forbidden")) {
    if (!doc["forbidden"].is_array()) throw SpaceError("'forbidden' must be an array");
    for (const auto& jf : doc["forbidden"]) {
      if (!jf.is_object()) throw SpaceError("each forbidden clause must be an object");
      ForbiddenClause f;
      for (const auto& [name, v] : jf.items()) f.assignments[name] = value_text(v, "forbidden clause");
      forbidden.push_back(std::move(f));
    }
  }

  std::uint64_t seed = 0;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer()) {
      throw SpaceError("'seed' must be a non-negative integer");
    }
    seed = doc["seed"].get<std::uint64_t>();
  }
  return ParamSpace(std::move(params), std::move(conds), std::move(forbidden), seed);
}

ParamSpace load_space(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw SpaceError("space file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_space(doc);
}

nlohmann::ordered_json to_json(const ParamSpace& space) {
  nlohmann::ordered_json doc;
  doc["seed"] = space.seed();
  doc["parameters"] = nlohmann::ordered_json::array();
  for (const auto& p : space.parameters()) {
    nlohmann::ordered_json jp;
    jp["name"] = p.name;
    jp["kind"] = std::string(to_string(p.kind));
    jp["values"] = p.values;
    jp["default"] = p.default_value;
    doc["parameters"].push_back(std::move(jp));
  }
  doc["conditions"] = nlohmann::ordered_json::array();
  for (const auto& c : space.conditions()) {
    doc["conditions"].push_back({{"child", c.child}, {"parent", c.parent}, {"when", c.when}});
  }
  doc["forbidden"] = nlohmann::ordered_json::array();
  for (const auto& f : space.forbidden()) doc["forbidden"].push_back(f.assignments);
  return doc;
}

nlohmann::ordered_json to_json(const Configuration& cfg, const ParamSpace& space) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& p : space.parameters()) {
    if (!cfg.contains(p.name)) continue;
    const auto& v = cfg.at(p.name);
    out[p.name] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  return out;
}

Configuration configuration_from_json(const nlohmann::ordered_json& doc) {
  return configuration_from_json(nlohmann::json::parse(doc.dump()));
}

Configuration configuration_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SpaceError("configuration must be a JSON object");
  Configuration cfg;
  for (const auto& [name, v] : doc.items()) {
    if (v.is_null()) {
      cfg.set(name, std::nullopt);
    } else {
      cfg.set(name, value_text(v, "configuration"));
    }
  }
  return cfg;
}

std::string describe(const Configuration& cfg, const ParamSpace& space) {
  std::string out;
  for (const auto& p : space.parameters()) {
    if (!out.empty()) out += ", ";
    out += p.name + "=";
    if (!cfg.contains(p.name)) {
      out += "<missing>";
    } else if (const auto& v = cfg.at(p.name)) {
      out += "'" + *v + "'";
    } else {
      out += "<inactive>";
    }
  }
  return out;
}

}  // namespace looptune
