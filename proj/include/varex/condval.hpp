#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "varex/formula.hpp"
#include "varex/value.hpp"

namespace varex {

/// Raised when a per-leaf operation fails in a partial configuration space.
/// Carries the exact sub-context under which the failure occurs.
struct VariationalThrow : VarexError {
  VariationalThrow(Formula context, std::string message)
      : VarexError(message), context(context), message(std::move(message)) {}
  Formula context;
  std::string message;
};

/// A conditional value: a choice tree over formulas with concrete leaves.
/// Invariants: no choice carries a tautology or contradiction, no choice has
/// structurally identical subtrees, and every total assignment selects
/// exactly one leaf. Regions pruned away by context-restricted operations are
/// represented by a poison leaf that select() refuses to return.
class CondValue {
 public:
  CondValue() : CondValue(one(Value::null())) {}

  static CondValue one(Value v);
  /// The poison leaf marking configuration space outside a defined context.
  static CondValue undefined();

  bool isOne() const { return node_->leaf; }
  bool isUndefined() const;
  const Value& leafValue() const;

  const Formula& condition() const { return node_->cond; }
  CondValue thenBranch() const { return CondValue(node_->t); }
  CondValue elseBranch() const { return CondValue(node_->e); }

  /// Structural equality: leaf values per Value::operator==, conditions by
  /// canonical handle.
  friend bool equal(const CondValue& a, const CondValue& b);

  /// Debug syntax: One(v) / Choice(f, t, e).
  std::string toDebugString() const;

 private:
  struct Node {
    bool leaf;
    bool undef;
    Value v;
    Formula cond;
    std::shared_ptr<const Node> t, e;
  };
  using NodePtr = std::shared_ptr<const Node>;
  explicit CondValue(NodePtr n) : node_(std::move(n)) {}

  NodePtr node_;

  friend CondValue choice(Formula f, const CondValue& a, const CondValue& b);
  friend CondValue transformLeaves(
      Formula ctx, const CondValue& v,
      const std::function<CondValue(Formula, const Value&)>& fn);
  friend Value select(const CondValue& v, const ConfigAssignment& cfg);
  friend void forEachLeaf(
      Formula ctx, const CondValue& v,
      const std::function<void(Formula, const Value&)>& fn);
};

/// Compressed choice: tautology/contradiction conditions collapse, equal
/// branches merge, and each branch is restricted to its reachable space.
CondValue choice(Formula f, const CondValue& a, const CondValue& b);

/// Core combinator: rebuilds v under ctx, applying fn to every reachable leaf
/// with its exact sub-context. Space outside ctx is pruned to poison.
CondValue transformLeaves(
    Formula ctx, const CondValue& v,
    const std::function<CondValue(Formula, const Value&)>& fn);

/// Applies fn to each alternative value reachable under ctx.
CondValue smap(Formula ctx, const CondValue& v,
               const std::function<Value(const Value&)>& fn);

/// As smap, but fn may split the configuration space further.
CondValue sflatMap(Formula ctx, const CondValue& v,
                   const std::function<CondValue(const Value&)>& fn);

/// choice(ctx, newV, oldV) compressed: the store-under-context primitive.
CondValue writeUnder(Formula ctx, const CondValue& oldV, const CondValue& newV);

/// The unique leaf selected by cfg. Throws VarexError if selection reaches a
/// pruned region (a transformation bug).
Value select(const CondValue& v, const ConfigAssignment& cfg);

/// Visits every non-poison leaf reachable under ctx with its sub-context.
/// Visit order is tree order (then-branch first).
void forEachLeaf(Formula ctx, const CondValue& v,
                 const std::function<void(Formula, const Value&)>& fn);

/// The sub-context of ctx under which v selects a truthy leaf (nonzero int).
/// Non-boolean leaves under ctx are a type error.
Formula whenTrue(Formula ctx, const CondValue& v);

}  // namespace varex
