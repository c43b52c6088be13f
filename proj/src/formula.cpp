#include "varex/formula.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

namespace varex {

namespace {

void requireSameContext(const FormulaContext* ctx, Formula f) {
  if (!f.valid() || f.context() != ctx)
    throw EngineBug("formula used with a foreign or null context");
}

uint64_t pow2Saturated(uint32_t e) {
  return e >= 64 ? UINT64_MAX : (uint64_t(1) << e);
}

uint64_t mulSaturated(uint64_t a, uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > UINT64_MAX / b) return UINT64_MAX;
  return a * b;
}

uint64_t addSaturated(uint64_t a, uint64_t b) {
  return a > UINT64_MAX - b ? UINT64_MAX : a + b;
}

}  // namespace

bool ConfigAssignment::get(std::string_view optionName) const {
  auto idx = ctx_->optionIndex(optionName);
  if (!idx) throw VarexError("unknown option: " + std::string(optionName));
  return get(*idx);
}

std::string ConfigAssignment::toString() const {
  std::string out;
  const auto& names = ctx_->options();
  for (size_t i = 0; i < bits_.size(); ++i) {
    if (i) out += ",";
    out += names[i];
    out += bits_[i] ? "=1" : "=0";
  }
  return out;
}

FormulaContext::FormulaContext(std::vector<std::string> optionNames)
    : options_(std::move(optionNames)) {
  for (uint32_t i = 0; i < options_.size(); ++i) {
    if (!optionIndex_.emplace(options_[i], i).second)
      throw VarexError("duplicate option: " + options_[i]);
  }
  uint32_t n = uint32_t(options_.size());
  nodes_.push_back({n, 0, 0});  // false terminal
  nodes_.push_back({n, 1, 1});  // true terminal
}

std::optional<uint32_t> FormulaContext::optionIndex(
    std::string_view name) const {
  auto it = optionIndex_.find(std::string(name));
  if (it == optionIndex_.end()) return std::nullopt;
  return it->second;
}

Formula FormulaContext::option(std::string_view name) const {
  auto idx = optionIndex(name);
  if (!idx) throw VarexError("undeclared option: " + std::string(name));
  return option(*idx);
}

Formula FormulaContext::option(uint32_t index) const {
  if (index >= options_.size()) throw EngineBug("option index out of range");
  return Formula(this, mkNode(index, 0, 1));
}

uint32_t FormulaContext::mkNode(uint32_t var, uint32_t lo, uint32_t hi) const {
  if (lo == hi) return lo;
  NodeKey key{var, lo, hi};
  auto it = unique_.find(key);
  if (it != unique_.end()) return it->second;
  nodes_.push_back({var, lo, hi});
  uint32_t idx = uint32_t(nodes_.size() - 1);
  unique_.emplace(key, idx);
  return idx;
}

uint32_t FormulaContext::applyAnd(uint32_t a, uint32_t b) const {
  if (a == 0 || b == 0) return 0;
  if (a == 1) return b;
  if (b == 1) return a;
  if (a == b) return a;
  if (a > b) std::swap(a, b);
  auto key = std::make_pair(a, b);
  auto it = andCache_.find(key);
  if (it != andCache_.end()) return it->second;
  uint32_t va = varOf(a), vb = varOf(b);
  uint32_t v = std::min(va, vb);
  uint32_t alo = va == v ? nodes_[a].lo : a;
  uint32_t ahi = va == v ? nodes_[a].hi : a;
  uint32_t blo = vb == v ? nodes_[b].lo : b;
  uint32_t bhi = vb == v ? nodes_[b].hi : b;
  uint32_t r = mkNode(v, applyAnd(alo, blo), applyAnd(ahi, bhi));
  andCache_.emplace(key, r);
  return r;
}

uint32_t FormulaContext::applyOr(uint32_t a, uint32_t b) const {
  if (a == 1 || b == 1) return 1;
  if (a == 0) return b;
  if (b == 0) return a;
  if (a == b) return a;
  if (a > b) std::swap(a, b);
  auto key = std::make_pair(a, b);
  auto it = orCache_.find(key);
  if (it != orCache_.end()) return it->second;
  uint32_t va = varOf(a), vb = varOf(b);
  uint32_t v = std::min(va, vb);
  uint32_t alo = va == v ? nodes_[a].lo : a;
  uint32_t ahi = va == v ? nodes_[a].hi : a;
  uint32_t blo = vb == v ? nodes_[b].lo : b;
  uint32_t bhi = vb == v ? nodes_[b].hi : b;
  uint32_t r = mkNode(v, applyOr(alo, blo), applyOr(ahi, bhi));
  orCache_.emplace(key, r);
  return r;
}

uint32_t FormulaContext::applyNot(uint32_t a) const {
  if (a == 0) return 1;
  if (a == 1) return 0;
  auto it = notCache_.find(a);
  if (it != notCache_.end()) return it->second;
  uint32_t r = mkNode(varOf(a), applyNot(nodes_[a].lo), applyNot(nodes_[a].hi));
  notCache_.emplace(a, r);
  return r;
}

Formula FormulaContext::conj(Formula a, Formula b) const {
  requireSameContext(this, a);
  requireSameContext(this, b);
  return Formula(this, applyAnd(a.node_, b.node_));
}

Formula FormulaContext::disj(Formula a, Formula b) const {
  requireSameContext(this, a);
  requireSameContext(this, b);
  return Formula(this, applyOr(a.node_, b.node_));
}

Formula FormulaContext::neg(Formula a) const {
  requireSameContext(this, a);
  return Formula(this, applyNot(a.node_));
}

bool FormulaContext::evaluate(Formula f, const ConfigAssignment& cfg) const {
  requireSameContext(this, f);
  if (cfg.context() != this || cfg.size() != options_.size())
    throw VarexError("assignment is not total over this option set");
  uint32_t node = f.node_;
  while (!terminal(node)) {
    const Node& n = nodes_[node];
    node = cfg.get(n.var) ? n.hi : n.lo;
  }
  return node == 1;
}

uint64_t FormulaContext::solutionsFrom(uint32_t node) const {
  if (node == 0) return 0;
  if (node == 1) return 1;
  auto it = countCache_.find(node);
  if (it != countCache_.end()) return it->second;
  const Node& n = nodes_[node];
  uint64_t lo = mulSaturated(pow2Saturated(varOf(n.lo) - n.var - 1),
                             solutionsFrom(n.lo));
  uint64_t hi = mulSaturated(pow2Saturated(varOf(n.hi) - n.var - 1),
                             solutionsFrom(n.hi));
  uint64_t r = addSaturated(lo, hi);
  countCache_.emplace(node, r);
  return r;
}

uint64_t FormulaContext::remaining(uint32_t node, uint32_t fromVar) const {
  return mulSaturated(pow2Saturated(varOf(node) - fromVar),
                      solutionsFrom(node));
}

uint64_t FormulaContext::countSatisfying(Formula f) const {
  requireSameContext(this, f);
  return remaining(f.node_, 0);
}

ConfigAssignment FormulaContext::satisfyingAssignment(Formula f,
                                                      uint64_t k) const {
  requireSameContext(this, f);
  uint32_t n = uint32_t(options_.size());
  std::vector<char> bits(n, 0);
  uint32_t node = f.node_;
  for (uint32_t v = 0; v < n; ++v) {
    uint64_t countFalse;
    bool atVar = !terminal(node) && varOf(node) == v;
    if (atVar)
      countFalse = remaining(nodes_[node].lo, v + 1);
    else
      countFalse = remaining(node, v + 1);
    if (k < countFalse) {
      bits[v] = 0;
      if (atVar) node = nodes_[node].lo;
    } else {
      k -= countFalse;
      bits[v] = 1;
      if (atVar) node = nodes_[node].hi;
    }
  }
  if (node != 1) throw EngineBug("satisfyingAssignment: rank out of range");
  return ConfigAssignment(this, std::move(bits));
}

void FormulaContext::renderPaths(uint32_t node,
                                 std::vector<std::pair<uint32_t, bool>>& lits,
                                 std::vector<std::string>& out) const {
  if (node == 0) return;
  if (node == 1) {
    std::string term;
    for (size_t i = 0; i < lits.size(); ++i) {
      if (i) term += " & ";
      if (!lits[i].second) term += "!";
      term += options_[lits[i].first];
    }
    out.push_back(term);
    return;
  }
  const Node& n = nodes_[node];
  lits.emplace_back(n.var, true);
  renderPaths(n.hi, lits, out);
  lits.back().second = false;
  renderPaths(n.lo, lits, out);
  lits.pop_back();
}

std::string FormulaContext::render(Formula f) const {
  requireSameContext(this, f);
  if (f.isContradiction()) return "False";
  if (f.isTautology()) return "True";
  std::vector<std::pair<uint32_t, bool>> lits;
  std::vector<std::string> terms;
  renderPaths(f.node_, lits, terms);
  if (terms.size() == 1) return terms[0];
  std::string out;
  for (size_t i = 0; i < terms.size(); ++i) {
    if (i) out += " | ";
    bool multi = terms[i].find(" & ") != std::string::npos;
    out += multi ? "(" + terms[i] + ")" : terms[i];
  }
  return out;
}

namespace {

// option-name / ( ) ! & | tokenizer and recursive-descent parser
struct ExprParser {
  const FormulaContext& ctx;
  std::string_view text;
  size_t pos = 0;

  void skipWs() {
    while (pos < text.size() && std::isspace((unsigned char)text[pos])) ++pos;
  }
  bool eat(char c) {
    skipWs();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw VarexError("formula syntax error at offset " + std::to_string(pos) +
                     ": " + what);
  }

  Formula expr() {
    Formula f = term();
    while (eat('|')) f = ctx.disj(f, term());
    return f;
  }
  Formula term() {
    Formula f = factor();
    for (;;) {
      skipWs();
      if (pos < text.size() && text[pos] == '&') {
        ++pos;
        f = ctx.conj(f, factor());
      } else {
        return f;
      }
    }
  }
  Formula factor() {
    skipWs();
    if (eat('!')) return ctx.neg(factor());
    if (eat('(')) {
      Formula f = expr();
      if (!eat(')')) fail("expected ')'");
      return f;
    }
    size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum((unsigned char)text[pos]) || text[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected option name");
    std::string_view name = text.substr(start, pos - start);
    if (name == "True") return ctx.verum();
    if (name == "False") return ctx.falsum();
    if (!ctx.optionIndex(name))
      throw VarexError("undeclared option in formula: " + std::string(name));
    return ctx.option(name);
  }
};

}  // namespace

Formula FormulaContext::parseFormula(std::string_view text) const {
  ExprParser p{*this, text};
  Formula f = p.expr();
  p.skipWs();
  if (p.pos != text.size()) p.fail("trailing input");
  return f;
}

std::vector<ConfigAssignment> enumerateConfigs(const FormulaContext& ctx,
                                               Formula featureModel,
                                               uint64_t cap, uint64_t seed) {
  if (cap < 1) throw VarexError("enumerateConfigs: cap must be >= 1");
  std::vector<ConfigAssignment> out;
  if (featureModel.isContradiction()) return out;
  uint64_t total = ctx.countSatisfying(featureModel);
  if (total <= cap) {
    out.reserve(size_t(total));
    for (uint64_t k = 0; k < total; ++k)
      out.push_back(ctx.satisfyingAssignment(featureModel, k));
    return out;
  }
  if (ctx.options().size() > 62)
    throw VarexError("config sampling supports at most 62 options");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint64_t> pick(0, total - 1);
  std::set<uint64_t> ranks;
  while (ranks.size() < cap) ranks.insert(pick(rng));
  out.reserve(size_t(cap));
  for (uint64_t k : ranks) out.push_back(ctx.satisfyingAssignment(featureModel, k));
  return out;
}

}  // namespace varex
