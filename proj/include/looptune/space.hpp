#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "looptune/rng.hpp"

namespace looptune {

// Malformed space definition (duplicate names, cycles, bad defaults, ...).
class SpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration names a parameter the space does not define. This is a
// structural error, distinct from an ordinary validity violation.
class UnknownParameterError : public SpaceError {
 public:
  using SpaceError::SpaceError;
};

class EmptySpaceError : public SpaceError {
 public:
  using SpaceError::SpaceError;
};

enum class ParamKind { categorical, ordinal };

std::string_view to_string(ParamKind kind);
ParamKind parse_param_kind(std::string_view text);

struct Parameter {
  std::string name;
  ParamKind kind = ParamKind::categorical;
  std::vector<std::string> values;
  std::string default_value;

  std::optional<std::size_t> index_of(std::string_view value) const;
};

// `child` is active only while `parent` is active and holds one of `when`.
struct ActivationCondition {
  std::string child;
  std::string parent;
  std::vector<std::string> when;
};

// A configuration is forbidden when every listed assignment holds.
struct ForbiddenClause {
  std::map<std::string, std::string> assignments;
};

// Full assignment of parameter name to value. std::nullopt marks a parameter
// deactivated by its condition.
class Configuration {
 public:
  using Value = std::optional<std::string>;

  Configuration() = default;
  explicit Configuration(std::map<std::string, Value> values) : values_(std::move(values)) {}

  void set(const std::string& name, Value value) { values_[name] = std::move(value); }
  const Value& at(const std::string& name) const { return values_.at(name); }
  bool contains(const std::string& name) const { return values_.contains(name); }
  bool is_active(const std::string& name) const;

  const std::map<std::string, Value>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  auto operator<=>(const Configuration&) const = default;
  bool operator==(const Configuration&) const = default;

 private:
  std::map<std::string, Value> values_;
};

using ConfigurationSet = std::set<Configuration>;

// Choice index per parameter in declaration order, -1 for inactive.
using Assignment = std::vector<int>;

struct Violation {
  std::string subject;  // parameter name or "forbidden[i]"
  std::string message;
};

struct Verdict {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
};

struct Cardinality {
  // Product of all domain sizes, ignoring conditions and forbidden clauses.
  std::uint64_t product = 0;
  bool product_overflowed = false;
  // Distinct valid configurations; set only when the domain product is within
  // the enumeration bound.
  std::optional<std::uint64_t> exact;
};

enum class EncodingScheme { tree, gp };

class ParamSpace {
 public:
  static constexpr std::uint64_t kEnumerationBound = 1'000'000;

  ParamSpace(std::vector<Parameter> parameters, std::vector<ActivationCondition> conditions,
             std::vector<ForbiddenClause> forbidden, std::uint64_t seed);

  const std::vector<Parameter>& parameters() const { return parameters_; }
  const std::vector<ActivationCondition>& conditions() const { return conditions_; }
  const std::vector<ForbiddenClause>& forbidden() const { return forbidden_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return parameters_.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  const Parameter& parameter(std::string_view name) const;
  // True when the parameter is the child of some condition.
  bool is_conditional(std::size_t param) const { return parent_condition_[param].has_value(); }

  Verdict validate(const Configuration& cfg) const;
  bool is_valid(const Assignment& assignment) const;

  Configuration to_configuration(const Assignment& assignment) const;
  // Throws UnknownParameterError / SpaceError when cfg cannot be represented.
  Assignment to_assignment(const Configuration& cfg) const;

  // Applies activation rules in place: inactive children become -1, and
  // children that just became active with -1 take choice 0.
  void normalize(Assignment& assignment) const;

  Configuration default_configuration() const;

  Cardinality cardinality() const { return cardinality_; }

  // Every valid assignment in mixed-radix order. Throws SpaceError when the
  // domain product exceeds kEnumerationBound.
  std::vector<Assignment> enumerate() const;

  std::size_t encoded_size(EncodingScheme scheme) const;
  std::vector<double> encode(const Configuration& cfg, EncodingScheme scheme) const;
  std::vector<double> encode(const Assignment& assignment, EncodingScheme scheme) const;
  Configuration decode(const std::vector<double>& encoded) const;  // tree scheme

 private:
  bool forbidden_match(const Assignment& assignment) const;
  template <typename Visit>
  void for_each_canonical(Visit&& visit) const;

  std::vector<Parameter> parameters_;
  std::vector<ActivationCondition> conditions_;
  std::vector<ForbiddenClause> forbidden_;
  std::uint64_t seed_ = 0;

  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::optional<std::size_t>> parent_condition_;
  std::vector<std::vector<bool>> triggers_;  // per condition, over parent choices
  std::vector<std::size_t> topo_order_;
  std::vector<std::vector<std::pair<std::size_t, int>>> forbidden_index_;
  Cardinality cardinality_;
};

// Seeded sampler over a space. Holds mutable generator state; confine each
// instance to one thread.
class Sampler {
 public:
  explicit Sampler(const ParamSpace& space) : Sampler(space, space.seed()) {}
  Sampler(const ParamSpace& space, std::uint64_t seed);

  // One valid configuration, drawn with replacement.
  Configuration draw();
  Assignment draw_assignment();

  // Up to `count` distinct valid configurations, none in `exclude`. Returns
  // fewer when the space minus `exclude` is smaller than `count`.
  std::vector<Configuration> sample(std::size_t count, const ConfigurationSet& exclude = {});

 private:
  bool draw_raw(Assignment& out);

  const ParamSpace* space_;
  Rng rng_;
  std::optional<std::vector<Assignment>> valid_cache_;
};

ParamSpace parse_space(const nlohmann::json& doc);
ParamSpace load_space(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ParamSpace& space);

nlohmann::ordered_json to_json(const Configuration& cfg, const ParamSpace& space);
Configuration configuration_from_json(const nlohmann::json& doc);
Configuration configuration_from_json(const nlohmann::ordered_json& doc);

// "P0=value, P1=<inactive>, ..." in declaration order.
std::string describe(const Configuration& cfg, const ParamSpace& space);

}  // namespace looptune
