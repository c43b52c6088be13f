#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "varex/errors.hpp"

namespace varex {

class FormulaContext;

/// Canonical propositional formula over a context's option set. A Formula is
/// a cheap value handle into a shared reduced-ordered-BDD node store; two
/// semantically equivalent formulas built in the same context compare equal.
class Formula {
 public:
  Formula() : ctx_(nullptr), node_(0) {}

  bool valid() const { return ctx_ != nullptr; }
  const FormulaContext* context() const { return ctx_; }

  bool isContradiction() const { return node_ == 0; }
  bool isTautology() const { return node_ == 1; }
  bool isSatisfiable() const { return node_ != 0; }

  friend bool operator==(const Formula& a, const Formula& b) {
    return a.ctx_ == b.ctx_ && a.node_ == b.node_;
  }
  friend bool operator!=(const Formula& a, const Formula& b) {
    return !(a == b);
  }

 private:
  friend class FormulaContext;
  Formula(const FormulaContext* ctx, uint32_t node) : ctx_(ctx), node_(node) {}

  const FormulaContext* ctx_;
  uint32_t node_;
};

/// Total assignment of booleans to every option of a context.
class ConfigAssignment {
 public:
  ConfigAssignment(const FormulaContext* ctx, std::vector<char> bits)
      : ctx_(ctx), bits_(std::move(bits)) {}

  const FormulaContext* context() const { return ctx_; }
  bool get(uint32_t optionIndex) const { return bits_.at(optionIndex) != 0; }
  bool get(std::string_view optionName) const;
  size_t size() const { return bits_.size(); }

  /// Flips one option; used by the diff harness when shrinking failures.
  ConfigAssignment withFlipped(uint32_t optionIndex) const {
    auto b = bits_;
    b.at(optionIndex) = b.at(optionIndex) ? 0 : 1;
    return ConfigAssignment(ctx_, std::move(b));
  }

  std::string toString() const;

  friend bool operator==(const ConfigAssignment& a, const ConfigAssignment& b) {
    return a.ctx_ == b.ctx_ && a.bits_ == b.bits_;
  }

 private:
  const FormulaContext* ctx_;
  std::vector<char> bits_;
};

/// Owns the BDD node store, the unique table and the operation caches for one
/// option universe. Variable order is option declaration order. Formulas are
/// immutable handles; the context must outlive them. Not synchronized: confine
/// a context (and everything derived from it) to one thread.
class FormulaContext {
 public:
  explicit FormulaContext(std::vector<std::string> optionNames);

  FormulaContext(const FormulaContext&) = delete;
  FormulaContext& operator=(const FormulaContext&) = delete;

  const std::vector<std::string>& options() const { return options_; }
  std::optional<uint32_t> optionIndex(std::string_view name) const;

  Formula falsum() const { return Formula(this, 0); }
  Formula verum() const { return Formula(this, 1); }

  /// Atomic formula for a declared option; same name yields the same handle.
  Formula option(std::string_view name) const;
  Formula option(uint32_t index) const;

  Formula conj(Formula a, Formula b) const;
  Formula disj(Formula a, Formula b) const;
  Formula neg(Formula a) const;

  bool evaluate(Formula f, const ConfigAssignment& cfg) const;

  /// Number of satisfying total assignments. Exact for up to 62 options.
  uint64_t countSatisfying(Formula f) const;

  /// The k-th satisfying assignment in lexicographic order (first option most
  /// significant, false before true). k < countSatisfying(f).
  ConfigAssignment satisfyingAssignment(Formula f, uint64_t k) const;

  /// Human-readable disjunctive-normal-form rendering; "True"/"False" for the
  /// constants. Deterministic, re-parseable with parseFormula.
  std::string render(Formula f) const;

  /// Parses `& | ! ( )` expressions over declared option names, plus the
  /// keywords True and False. Throws VarexError on syntax or name errors.
  Formula parseFormula(std::string_view text) const;

 private:
  struct Node {
    uint32_t var;
    uint32_t lo;
    uint32_t hi;
  };
  struct NodeKey {
    uint32_t var, lo, hi;
    bool operator==(const NodeKey&) const = default;
  };
  struct NodeKeyHash {
    size_t operator()(const NodeKey& k) const {
      uint64_t h = k.var;
      h = h * 0x9e3779b97f4a7c15ull + k.lo;
      h = h * 0x9e3779b97f4a7c15ull + k.hi;
      return size_t(h ^ (h >> 32));
    }
  };
  struct PairHash {
    size_t operator()(const std::pair<uint32_t, uint32_t>& p) const {
      return size_t(uint64_t(p.first) << 32 | p.second);
    }
  };

  uint32_t varOf(uint32_t node) const { return nodes_[node].var; }
  bool terminal(uint32_t node) const { return node < 2; }
  uint32_t mkNode(uint32_t var, uint32_t lo, uint32_t hi) const;
  uint32_t applyAnd(uint32_t a, uint32_t b) const;
  uint32_t applyOr(uint32_t a, uint32_t b) const;
  uint32_t applyNot(uint32_t a) const;
  /// Solutions over variables [varOf(node)..n); terminals count over zero vars.
  uint64_t solutionsFrom(uint32_t node) const;
  /// Solutions over variables [fromVar..n) for a node with varOf >= fromVar.
  uint64_t remaining(uint32_t node, uint32_t fromVar) const;
  void renderPaths(uint32_t node, std::vector<std::pair<uint32_t, bool>>& lits,
                   std::vector<std::string>& out) const;

  std::vector<std::string> options_;
  std::unordered_map<std::string, uint32_t> optionIndex_;
  // nodes_[0] and nodes_[1] are the false/true terminals with var = nOptions.
  mutable std::vector<Node> nodes_;
  mutable std::unordered_map<NodeKey, uint32_t, NodeKeyHash> unique_;
  mutable std::unordered_map<std::pair<uint32_t, uint32_t>, uint32_t, PairHash>
      andCache_, orCache_;
  mutable std::unordered_map<uint32_t, uint32_t> notCache_;
  mutable std::unordered_map<uint32_t, uint64_t> countCache_;
};

inline Formula conj(Formula a, Formula b) { return a.context()->conj(a, b); }
inline Formula disj(Formula a, Formula b) { return a.context()->disj(a, b); }
inline Formula neg(Formula a) { return a.context()->neg(a); }
inline bool evaluate(Formula f, const ConfigAssignment& cfg) {
  return f.context()->evaluate(f, cfg);
}

/// All assignments satisfying featureModel, exhaustively when their number is
/// at most cap, otherwise a uniform seeded sample of exactly cap distinct
/// valid assignments. A contradictory model yields an empty sequence.
std::vector<ConfigAssignment> enumerateConfigs(const FormulaContext& ctx,
                                               Formula featureModel,
                                               uint64_t cap, uint64_t seed);

}  // namespace varex
