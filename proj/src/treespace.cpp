#include "looptune/treespace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "looptune/rng.hpp"

namespace looptune {

namespace {

std::uint64_t numeric_suffix(const std::string& name) {
  std::size_t pos = name.size();
  while (pos > 0 && std::isdigit(static_cast<unsigned char>(name[pos - 1]))) --pos;
  if (pos == name.size() || name.size() - pos > 18) return 0;
  return std::stoull(name.substr(pos));
}

template <typename Node, typename Fn>
void preorder(Node& node, Fn&& fn) {
  fn(node);
  for (auto& child : node.children) preorder(child, fn);
}

template <typename Node>
Node* find_in(std::vector<Node>& nodes, const std::string& name) {
  for (auto& node : nodes) {
    if (node.name == name) return &node;
    if (auto* hit = find_in(node.children, name)) return hit;
  }
  return nullptr;
}

const LoopNode* parent_in(const std::vector<LoopNode>& nodes, const LoopNode* parent,
                          const std::string& name) {
  for (const auto& node : nodes) {
    if (node.name == name) return parent;
    if (const auto* hit = parent_in(node.children, &node, name)) return hit;
  }
  return nullptr;
}

std::size_t depth_of(const std::vector<LoopNode>& nodes) {
  std::size_t best = 0;
  for (const auto& node : nodes) best = std::max(best, 1 + depth_of(node.children));
  return best;
}

LoopNode parse_node(const nlohmann::json& doc) {
  LoopNode node;
  node.name = doc.at("name").get<std::string>();
  node.transformable = doc.value("transformable", true);
  if (doc.contains("children")) {
    for (const auto& child : doc.at("children")) node.children.push_back(parse_node(child));
  }
  return node;
}

nlohmann::json node_json(const LoopNode& node) {
  nlohmann::json out;
  out["name"] = node.name;
  if (!node.transformable) out["transformable"] = false;
  out["children"] = nlohmann::json::array();
  for (const auto& child : node.children) out["children"].push_back(node_json(child));
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::string join(const std::vector<int>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(items[i]);
  }
  return out;
}

// Checks that targets exist, are transformable and form a perfect chain.
// Returns the outermost target inside `nest`.
LoopNode* checked_chain(LoopNest& nest, const std::vector<std::string>& targets) {
  if (targets.empty()) throw LoopShapeError("transformation without targets");
  std::set<std::string> seen;
  for (const auto& name : targets) {
    if (!seen.insert(name).second) throw LoopShapeError("loop '" + name + "' targeted twice");
    const LoopNode* node = nest.find(name);
    if (!node) throw LoopShapeError("no loop named '" + name + "'");
    if (!node->transformable) throw LoopShapeError("loop '" + name + "' is not transformable");
  }
  LoopNode* head = nest.find(targets.front());
  const LoopNode* cur = head;
  for (std::size_t i = 1; i < targets.size(); ++i) {
    if (cur->children.size() != 1 || cur->children.front().name != targets[i])
      throw LoopShapeError("loops " + join(targets) + " do not form a perfect nest");
    cur = &cur->children.front();
  }
  return head;
}

const LoopNode& innermost(const LoopNode& head, std::size_t length) {
  const LoopNode* cur = &head;
  for (std::size_t i = 1; i < length; ++i) cur = &cur->children.front();
  return *cur;
}

// Nests `names` outermost first and hangs `leaves` below the last one.
LoopNode build_chain(const std::vector<std::string>& names, std::vector<LoopNode> leaves,
                     const std::string& anchor) {
  LoopNode node;
  for (std::size_t i = names.size(); i-- > 0;) {
    LoopNode outer;
    outer.name = names[i];
    outer.anchor = anchor;
    outer.children = (i + 1 == names.size()) ? std::move(leaves) : std::vector<LoopNode>{node};
    node = std::move(outer);
  }
  return node;
}

}  // namespace

LoopNest::LoopNest(std::vector<LoopNode> roots) : roots_(std::move(roots)) {
  std::uint64_t max_suffix = 0;
  std::set<std::string> names;
  for (auto& root : roots_) {
    const std::string anchor = root.name;
    preorder(root, [&](LoopNode& node) {
      if (node.name.empty()) throw LoopShapeError("loop without a name");
      if (!names.insert(node.name).second)
        throw LoopShapeError("duplicate loop name '" + node.name + "'");
      if (node.anchor.empty()) node.anchor = anchor;
      max_suffix = std::max(max_suffix, numeric_suffix(node.name));
    });
  }
  next_id_ = max_suffix + 1;
}

const LoopNode* LoopNest::find(const std::string& name) const {
  return find_in(const_cast<std::vector<LoopNode>&>(roots_), name);
}

LoopNode* LoopNest::find(const std::string& name) { return find_in(roots_, name); }

const LoopNode* LoopNest::parent_of(const std::string& name) const {
  return parent_in(roots_, nullptr, name);
}

std::vector<std::string> LoopNest::names() const {
  std::vector<std::string> out;
  for (const auto& root : roots_) preorder(root, [&](const LoopNode& n) { out.push_back(n.name); });
  return out;
}

std::size_t LoopNest::size() const { return names().size(); }

std::size_t LoopNest::depth() const { return depth_of(roots_); }

std::string LoopNest::fresh_name() {
  std::string name;
  do {
    name = "loop" + std::to_string(next_id_++);
  } while (find(name));
  return name;
}

LoopNest parse_loop_nest(const nlohmann::json& doc) {
  std::vector<LoopNode> roots;
  try {
    for (const auto& item : doc.at("loops")) roots.push_back(parse_node(item));
  } catch (const nlohmann::json::exception& e) {
    throw LoopShapeError(std::string("malformed loop annotation: ") + e.what());
  }
  if (roots.empty()) throw LoopShapeError("loop annotation lists no loops");
  return LoopNest(std::move(roots));
}

LoopNest load_loop_nest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoopShapeError("cannot read '" + path.string() + "'");
  try {
    return parse_loop_nest(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw LoopShapeError("cannot parse '" + path.string() + "': " + e.what());
  }
}

nlohmann::json to_json(const LoopNest& nest) {
  nlohmann::json out;
  out["loops"] = nlohmann::json::array();
  for (const auto& root : nest.roots()) out["loops"].push_back(node_json(root));
  return out;
}

AppliedTransform apply_transform(const LoopNest& nest, const Transformation& t) {
  AppliedTransform result{nest, {}, {}};
  LoopNest& out = result.nest;
  LoopNode* head = checked_chain(out, t.targets);
  const std::size_t n = t.targets.size();
  result.anchor = head->anchor;
  const std::string loops = "#pragma clang loop(" + join(t.targets) + ")";

  switch (t.kind) {
    case TransformKind::tile: {
      if (t.sizes.size() != n) throw LoopShapeError("tile needs one size per loop");
      if (std::any_of(t.sizes.begin(), t.sizes.end(), [](int s) { return s < 1; }))
        throw LoopShapeError("tile sizes must be positive");
      std::vector<std::string> floors, tiles;
      for (std::size_t i = 0; i < n; ++i) floors.push_back(out.fresh_name());
      for (std::size_t i = 0; i < n; ++i) tiles.push_back(out.fresh_name());
      std::vector<std::string> chain = floors;
      chain.insert(chain.end(), tiles.begin(), tiles.end());
      *head = build_chain(chain, innermost(*head, n).children, result.anchor);
      result.pragma = loops + " tile sizes(" + join(t.sizes) + ") floor_ids(" + join(floors) +
                      ") tile_ids(" + join(tiles) + ")";
      break;
    }
    case TransformKind::interchange: {
      std::vector<std::size_t> sorted = t.permutation;
      std::sort(sorted.begin(), sorted.end());
      std::vector<std::size_t> identity(n);
      std::iota(identity.begin(), identity.end(), 0);
      if (sorted != identity) throw LoopShapeError("permutation is not a bijection over targets");
      std::vector<std::string> order, fresh;
      for (std::size_t k = 0; k < n; ++k) {
        order.push_back(t.targets[t.permutation[k]]);
        fresh.push_back(out.fresh_name());
      }
      *head = build_chain(fresh, innermost(*head, n).children, result.anchor);
      result.pragma = loops + " interchange permutation(" + join(order) + ") permuted_ids(" +
                      join(fresh) + ")";
      break;
    }
    case TransformKind::parallelize: {
      if (n != 1) throw LoopShapeError("parallelize targets exactly one loop");
      head->name = out.fresh_name();
      head->transformable = false;
      result.pragma = loops + " parallelize_thread";
      break;
    }
  }
  return result;
}

std::vector<std::string> nest_heads(const LoopNest& nest) {
  std::vector<std::string> heads;
  for (const auto& root : nest.roots()) {
    heads.push_back(root.name);
    preorder(root, [&](const LoopNode& node) {
      if (node.children.size() == 1 && node.transformable) return;
      for (const auto& child : node.children) heads.push_back(child.name);
    });
  }
  return heads;
}

std::vector<std::string> perfect_chain(const LoopNest& nest, const std::string& head) {
  std::vector<std::string> chain;
  const LoopNode* cur = nest.find(head);
  if (!cur || !cur->transformable) return chain;
  chain.push_back(cur->name);
  while (cur->children.size() == 1 && cur->children.front().transformable) {
    cur = &cur->children.front();
    chain.push_back(cur->name);
  }
  return chain;
}

std::vector<Transformation> candidate_transforms(const LoopNest& nest,
                                                 const std::vector<int>& tile_choices,
                                                 std::size_t max_band) {
  std::vector<std::vector<std::string>> chains;
  for (const auto& head : nest_heads(nest)) {
    auto chain = perfect_chain(nest, head);
    if (chain.size() > max_band) chain.resize(max_band);
    if (!chain.empty()) chains.push_back(std::move(chain));
  }

  std::vector<Transformation> out;
  if (!tile_choices.empty()) {
    for (const auto& chain : chains) {
      for (std::size_t k = 1; k <= chain.size(); ++k) {
        const std::vector<std::string> targets(chain.begin(), chain.begin() + k);
        std::vector<std::size_t> digits(k, 0);
        while (true) {
          Transformation t{TransformKind::tile, targets, {}, {}};
          for (auto d : digits) t.sizes.push_back(tile_choices[d]);
          out.push_back(std::move(t));
          std::size_t pos = k;
          while (pos > 0 && ++digits[pos - 1] == tile_choices.size()) digits[--pos] = 0;
          if (pos == 0) break;
        }
      }
    }
  }
  for (const auto& chain : chains) {
    for (std::size_t k = 2; k <= chain.size(); ++k) {
      const std::vector<std::string> targets(chain.begin(), chain.begin() + k);
      std::vector<std::size_t> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      while (std::next_permutation(perm.begin(), perm.end())) {
        out.push_back({TransformKind::interchange, targets, {}, perm});
      }
    }
  }
  for (const auto& root : nest.roots()) {
    if (root.transformable) out.push_back({TransformKind::parallelize, {root.name}, {}, {}});
  }
  return out;
}

TransformTree::TransformTree(LoopNest root) {
  SearchNode node;
  node.nest = std::move(root);
  nodes_.push_back(std::move(node));
}

const LoopNest& TransformTree::nest(std::size_t i) {
  if (!nodes_[i].nest) {
    const LoopNest& parent = nest(*nodes_[i].parent);
    nodes_[i].nest = apply_transform(parent, *nodes_[i].applied).nest;
  }
  return *nodes_[i].nest;
}

std::vector<std::size_t> TransformTree::derive_children(std::size_t i,
                                                        const std::vector<int>& tile_choices,
                                                        std::size_t max_band) {
  if (nodes_[i].expanded) return {};
  nodes_[i].expanded = true;
  const LoopNest parent_nest = nest(i);
  const std::size_t depth = nodes_[i].depth;
  std::set<std::string> seen;
  std::vector<std::size_t> added;
  for (const auto& t : candidate_transforms(parent_nest, tile_choices, max_band)) {
    AppliedTransform applied = apply_transform(parent_nest, t);
    if (!seen.insert(applied.pragma).second) continue;
    SearchNode child;
    child.parent = i;
    child.applied = t;
    child.pragma = std::move(applied.pragma);
    child.anchor = std::move(applied.anchor);
    child.depth = depth + 1;
    nodes_.push_back(std::move(child));
    added.push_back(nodes_.size() - 1);
  }
  nodes_[i].children = added;
  return added;
}

std::vector<std::pair<std::string, std::string>> TransformTree::stack(std::size_t i) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::optional<std::size_t> cur = i; cur && nodes_[*cur].parent; cur = nodes_[*cur].parent)
    out.emplace_back(nodes_[*cur].pragma, nodes_[*cur].anchor);
  std::reverse(out.begin(), out.end());
  return out;
}

std::string insert_pragmas(const std::string& source,
                           const std::vector<std::pair<std::string, std::string>>& stack) {
  std::vector<std::string> lines;
  {
    std::istringstream in(source);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  const bool trailing_newline = !source.empty() && source.back() == '\n';

  std::vector<std::vector<std::string>> before(lines.size());
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
    const auto& [pragma, anchor] = *it;
    const std::regex id_line("^([ \t]*)#pragma[ \t]+clang[ \t]+loop[ \t]+id\\([ \t]*" + anchor +
                             "[ \t]*\\)[ \t]*$");
    bool placed = false;
    for (std::size_t i = 0; i < lines.size() && !placed; ++i) {
      std::smatch m;
      if (std::regex_match(lines[i], m, id_line)) {
        before[i].push_back(m[1].str() + pragma);
        placed = true;
      }
    }
    if (!placed) throw LoopShapeError("source has no '#pragma clang loop id(" + anchor + ")' line");
  }

  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (const auto& p : before[i]) out += p + "\n";
    out += lines[i];
    if (i + 1 < lines.size() || trailing_newline) out += "\n";
  }
  return out;
}

TreeSearchResult tree_search(const LoopNest& root, const ExperimentFn& experiment,
                             const TreeSearchSettings& settings, const ExperimentHook& hook) {
  if (settings.budget < 1) throw std::invalid_argument("budget must be at least 1");
  if (settings.max_band < 1) throw std::invalid_argument("max_band must be at least 1");
  TreeSearchResult result{TransformTree(root), {}, 0, 0, 0, false};
  TransformTree& tree = result.tree;
  Rng rng(settings.seed);
  std::vector<std::size_t> frontier;

  auto run = [&](std::size_t i) {
    TrialRecord trial = experiment(tree, i);
    ++result.total;
    result.order.push_back(i);
    SearchNode& node = tree.node(i);
    if (trial.ok()) {
      ++result.valid;
      node.status = NodeStatus::evaluated;
      node.metric = trial.metric;
      if (node.depth < settings.max_depth) {
        const auto kids = tree.derive_children(i, settings.tile_choices, settings.max_band);
        frontier.insert(frontier.end(), kids.begin(), kids.end());
      }
    } else {
      node.status = NodeStatus::rejected;
    }
    if (hook) hook(tree, i, trial);
    return trial.ok();
  };

  if (!run(0)) throw TreeSearchError("the untransformed source does not evaluate successfully");

  while (result.valid < settings.budget) {
    if (frontier.empty()) {
      result.exhausted = true;
      break;
    }
    std::size_t pick = frontier.size();
    if (rng.bernoulli(settings.exploit_probability)) {
      std::vector<std::size_t> options;
      for (std::size_t k = 0; k < frontier.size(); ++k) {
        if (tree.node(frontier[k]).parent == result.best) options.push_back(k);
      }
      if (!options.empty()) pick = options[rng.index(options.size())];
    }
    if (pick == frontier.size()) pick = rng.index(frontier.size());
    const std::size_t i = frontier[pick];
    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
    if (run(i) && tree.node(i).metric < tree.node(result.best).metric) result.best = i;
  }
  return result;
}

}  // namespace looptune
