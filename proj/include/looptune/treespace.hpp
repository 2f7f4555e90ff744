#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "looptune/trial.hpp"

namespace looptune {

// A transformation whose targets are missing, non-transformable, or not a
// perfect nest.
class LoopShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TreeSearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoopNode {
  std::string name;
  std::vector<LoopNode> children;
  bool transformable = true;
  std::string anchor;  // source loop whose `loop id` line receives the pragmas

  bool operator==(const LoopNode&) const = default;
};

// Forest of loops with a generator for fresh names ("loopN").
class LoopNest {
 public:
  LoopNest() = default;
  // Fresh names start after the largest numeric suffix among `roots`.
  explicit LoopNest(std::vector<LoopNode> roots);

  const std::vector<LoopNode>& roots() const { return roots_; }
  std::vector<LoopNode>& roots() { return roots_; }

  const LoopNode* find(const std::string& name) const;
  LoopNode* find(const std::string& name);
  // Parent of `name`, nullptr for roots or unknown names.
  const LoopNode* parent_of(const std::string& name) const;

  std::vector<std::string> names() const;  // preorder
  std::size_t size() const;
  std::size_t depth() const;

  std::string fresh_name();

 private:
  std::vector<LoopNode> roots_;
  std::uint64_t next_id_ = 1;
};

// {"loops": [{"name": "loop1", "children": [...], "transformable": true}]}
LoopNest parse_loop_nest(const nlohmann::json& doc);
LoopNest load_loop_nest(const std::filesystem::path& path);
nlohmann::json to_json(const LoopNest& nest);

enum class TransformKind { tile, interchange, parallelize };

struct Transformation {
  TransformKind kind = TransformKind::tile;
  std::vector<std::string> targets;  // outermost first
  std::vector<int> sizes;            // tile: one per target
  // interchange: new position k holds targets[permutation[k]]
  std::vector<std::size_t> permutation;

  bool operator==(const Transformation&) const = default;
};

struct AppliedTransform {
  LoopNest nest;
  std::string pragma;
  std::string anchor;
};

// Throws LoopShapeError when the targets do not fit the kind.
AppliedTransform apply_transform(const LoopNest& nest, const Transformation& t);

// Loops that start a nest: roots, and loops whose parent has several
// children or cannot be transformed.
std::vector<std::string> nest_heads(const LoopNest& nest);
// Longest chain of transformable loops from `head` where each loop has
// exactly one child.
std::vector<std::string> perfect_chain(const LoopNest& nest, const std::string& head);

inline constexpr std::size_t kDefaultMaxBand = 3;

// Every single-step transformation: tilings of each nest prefix with sizes
// from `tile_choices` (lexicographic), non-identity interchanges of prefixes
// of two or more loops, then parallelization of each transformable root.
// Prefixes are at most `max_band` loops long.
std::vector<Transformation> candidate_transforms(const LoopNest& nest,
                                                 const std::vector<int>& tile_choices,
                                                 std::size_t max_band = kDefaultMaxBand);

enum class NodeStatus { unexplored, evaluated, rejected };

struct SearchNode {
  std::optional<std::size_t> parent;
  std::optional<Transformation> applied;  // none for the root
  std::string pragma;
  std::string anchor;
  std::optional<LoopNest> nest;  // built on demand, see TransformTree::nest
  std::size_t depth = 0;
  NodeStatus status = NodeStatus::unexplored;
  double metric = 0.0;
  std::vector<std::size_t> children;
  bool expanded = false;
};

// Search tree of transformation stacks. Node 0 is the untransformed source.
class TransformTree {
 public:
  explicit TransformTree(LoopNest root);

  const SearchNode& node(std::size_t i) const { return nodes_[i]; }
  SearchNode& node(std::size_t i) { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

  // Loop nest after the node's transformation stack; cached once built.
  const LoopNest& nest(std::size_t i);

  // Adds one child per distinct pragma among the candidate transforms.
  // Returns the indices of the children (empty if already expanded).
  std::vector<std::size_t> derive_children(std::size_t i, const std::vector<int>& tile_choices,
                                           std::size_t max_band = kDefaultMaxBand);

  // Pragmas applied along the path from the root, oldest first, paired with
  // their anchors.
  std::vector<std::pair<std::string, std::string>> stack(std::size_t i) const;

 private:
  std::vector<SearchNode> nodes_;
};

inline const std::vector<int> kDefaultTileChoices = {2, 4};

// Inserts each pragma on its own line above the `#pragma clang loop id(<anchor>)`
// line, newest pragma first, with the id line's indentation.
std::string insert_pragmas(const std::string& source,
                           const std::vector<std::pair<std::string, std::string>>& stack);

struct TreeSearchSettings {
  std::size_t budget = 200;  // valid evaluations
  std::vector<int> tile_choices = kDefaultTileChoices;
  std::size_t max_depth = 4;
  std::size_t max_band = kDefaultMaxBand;
  double exploit_probability = 0.7;
  std::uint64_t seed = 1234;
};

struct TreeSearchResult {
  TransformTree tree;
  std::vector<std::size_t> order;  // experiment order (node indices)
  std::size_t total = 0;           // experiments run
  std::size_t valid = 0;           // experiments with status ok
  std::size_t best = 0;            // node index
  bool exhausted = false;          // stopped because no unexplored node was left
};

// Evaluates the node's transformation stack.
using ExperimentFn = std::function<TrialRecord(const TransformTree&, std::size_t node)>;
using ExperimentHook =
    std::function<void(const TransformTree&, std::size_t node, const TrialRecord&)>;

// Epsilon-greedy descent: with probability exploit_probability expand an
// unexplored child of the best node, otherwise any unexplored node. Failed
// experiments reject their node and its subtree. Throws TreeSearchError when
// the root does not evaluate successfully.
TreeSearchResult tree_search(const LoopNest& root, const ExperimentFn& experiment,
                             const TreeSearchSettings& settings, const ExperimentHook& hook = {});

}  // namespace looptune
