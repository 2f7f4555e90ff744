#include "commands.hpp"
#include "looptune/cli.hpp"
#include "looptune/space.hpp"

namespace looptune::cli {

namespace {

// 10648 -> "10,648"
std::string grouped(std::uint64_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

}  // namespace

int cmd_space(const SpaceOptions& o, Streams io) {
  const ParamSpace space = load_space(o.file);
  nlohmann::ordered_json doc;
  doc["command"] = "space";
  doc["action"] = o.action;

  if (o.action == "validate") {
    io.out << "ok: " << space.size() << " parameters, " << space.conditions().size()
           << " conditions, " << space.forbidden().size() << " forbidden clauses\n";
    io.out << "default: " << describe(space.default_configuration(), space) << '\n';
    doc["valid"] = true;
    doc["parameters"] = space.size();
    doc["conditions"] = space.conditions().size();
    doc["forbidden"] = space.forbidden().size();
  } else if (o.action == "count") {
    const Cardinality c = space.cardinality();
    std::string factors;
    for (const auto& p : space.parameters())
      factors += (factors.empty() ? "" : "x") + std::to_string(p.values.size());
    if (c.product_overflowed) {
      io.out << "product: " << factors << " (exceeds 64 bits)\n";
    } else {
      io.out << "product: " << factors << " = " << grouped(c.product) << '\n';
    }
    if (c.exact) {
      io.out << "exact: " << grouped(*c.exact)
             << " valid configurations after conditions and forbidden clauses\n";
    } else {
      io.out << "exact: not enumerated (product above " << grouped(ParamSpace::kEnumerationBound)
             << "); the product is an upper bound\n";
    }
    doc["product"] = c.product_overflowed ? nullptr : nlohmann::ordered_json(c.product);
    doc["product_overflowed"] = c.product_overflowed;
    doc["exact"] = c.exact ? nlohmann::ordered_json(*c.exact) : nullptr;
  } else {
    Sampler sampler(space, o.seed.value_or(space.seed()));
    const auto batch = sampler.sample(o.count);
    for (const auto& cfg : batch) io.out << to_json(cfg, space).dump() << '\n';
    doc["requested"] = o.count;
    doc["sampled"] = batch.size();
  }
  emit(io, doc);
  return kExitOk;
}

}  // namespace looptune::cli
