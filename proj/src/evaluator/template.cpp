#include "looptune/evaluator.hpp"

#include <cctype>

namespace looptune {

namespace {

bool identifier_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Length of a `P<digits>` token at `pos` ending on an identifier boundary, or 0.
std::size_t numbered_marker_length(const std::string& text, std::size_t pos) {
  if (pos >= text.size() || text[pos] != 'P') return 0;
  std::size_t end = pos + 1;
  while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
  if (end == pos + 1) return 0;
  if (end < text.size() && identifier_char(text[end])) return 0;
  return end - pos;
}

}  // namespace

CodeTemplate::CodeTemplate(std::string text, const ParamSpace& space) : text_(std::move(text)) {
  for (const auto& p : space.parameters()) names_.push_back(p.name);

  std::vector<std::size_t> first_seen(names_.size(), std::string::npos);
  std::string literal;
  std::size_t pos = 0;
  while (pos < text_.size()) {
    if (text_[pos] != '#') {
      literal += text_[pos++];
      continue;
    }
    int match = -1;
    std::size_t match_len = 0;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const std::string& name = names_[i];
      if (name.size() <= match_len || text_.compare(pos + 1, name.size(), name) != 0) continue;
      const std::size_t end = pos + 1 + name.size();
      if (end < text_.size() && identifier_char(text_[end])) continue;
      match = static_cast<int>(i);
      match_len = name.size();
    }
    if (match < 0) {
      if (const std::size_t len = numbered_marker_length(text_, pos + 1)) {
        throw TemplateError("template marker '#" + text_.substr(pos + 1, len) +
                            "' names no parameter of the space");
      }
      literal += text_[pos++];
      continue;
    }
    if (!literal.empty()) pieces_.push_back({std::move(literal), -1});
    literal.clear();
    pieces_.push_back({{}, match});
    if (first_seen[match] == std::string::npos) first_seen[match] = pos;
    pos += 1 + match_len;
  }
  if (!literal.empty()) pieces_.push_back({std::move(literal), -1});

  std::size_t previous = 0;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (first_seen[i] == std::string::npos)
      throw TemplateError("parameter '" + names_[i] + "' has no marker in the template");
    if (i > 0 && first_seen[i] < previous)
      throw TemplateError("marker '#" + names_[i] + "' first appears before '#" + names_[i - 1] +
                          "'; markers must follow parameter declaration order");
    previous = first_seen[i];
  }
}

std::string CodeTemplate::instantiate(const Configuration& cfg) const {
  std::string out;
  out.reserve(text_.size());
  for (const auto& piece : pieces_) {
    if (piece.param < 0) {
      out += piece.literal;
      continue;
    }
    const std::string& name = names_[static_cast<std::size_t>(piece.param)];
    if (!cfg.contains(name))
      throw TemplateError("configuration has no value for parameter '" + name + "'");
    if (const auto& value = cfg.at(name)) out += *value;
  }
  return out;
}

std::string CodeTemplate::stripped() const {
  std::string out;
  for (const auto& piece : pieces_) out += piece.literal;
  return out;
}

}  // namespace looptune
