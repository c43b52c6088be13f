#include "varex/condval.hpp"

namespace varex {

CondValue CondValue::one(Value v) {
  auto n = std::make_shared<Node>();
  n->leaf = true;
  n->undef = false;
  n->v = std::move(v);
  return CondValue(std::move(n));
}

CondValue CondValue::undefined() {
  auto n = std::make_shared<Node>();
  n->leaf = true;
  n->undef = true;
  return CondValue(std::move(n));
}

bool CondValue::isUndefined() const { return node_->leaf && node_->undef; }

const Value& CondValue::leafValue() const {
  if (!node_->leaf) throw EngineBug("leafValue on a choice");
  if (node_->undef) throw VarexError("leafValue on an undefined region");
  return node_->v;
}

bool equal(const CondValue& a, const CondValue& b) {
  if (a.node_ == b.node_) return true;
  if (a.node_->leaf != b.node_->leaf) return false;
  if (a.node_->leaf) {
    if (a.node_->undef || b.node_->undef)
      return a.node_->undef == b.node_->undef;
    return a.node_->v == b.node_->v;
  }
  return a.node_->cond == b.node_->cond &&
         equal(a.thenBranch(), b.thenBranch()) &&
         equal(a.elseBranch(), b.elseBranch());
}

std::string CondValue::toDebugString() const {
  if (node_->leaf) {
    if (node_->undef) return "Undef";
    return "One(" + node_->v.toDisplayString() + ")";
  }
  return "Choice(" + node_->cond.context()->render(node_->cond) + ", " +
         thenBranch().toDebugString() + ", " + elseBranch().toDebugString() +
         ")";
}

namespace {

// Drops choice branches unreachable under ctx; the result still covers the
// whole space but is contractual only inside ctx.
CondValue restrictUnder(Formula ctx, const CondValue& v) {
  if (v.isOne() || v.isUndefined()) return v;
  Formula c = v.condition();
  Formula tc = conj(ctx, c);
  Formula ec = conj(ctx, neg(c));
  if (tc.isContradiction()) return restrictUnder(ctx, v.elseBranch());
  if (ec.isContradiction()) return restrictUnder(ctx, v.thenBranch());
  CondValue t = restrictUnder(tc, v.thenBranch());
  CondValue e = restrictUnder(ec, v.elseBranch());
  if (equal(t, e)) return t;
  return choice(c, t, e);
}

}  // namespace

CondValue choice(Formula f, const CondValue& a, const CondValue& b) {
  if (!f.valid()) throw EngineBug("choice with invalid condition");
  if (f.isTautology()) return a;
  if (f.isContradiction()) return b;
  if (equal(a, b)) return a;
  CondValue t = restrictUnder(f, a);
  CondValue e = restrictUnder(neg(f), b);
  if (equal(t, e)) return t;
  auto n = std::make_shared<CondValue::Node>();
  n->leaf = false;
  n->undef = false;
  n->cond = f;
  n->t = t.node_;
  n->e = e.node_;
  return CondValue(std::move(n));
}

CondValue transformLeaves(
    Formula ctx, const CondValue& v,
    const std::function<CondValue(Formula, const Value&)>& fn) {
  if (!ctx.isSatisfiable())
    throw EngineBug("transformLeaves under a contradiction");
  if (v.isUndefined())
    throw VarexError(
        "projection error: operating on an undefined conditional-value "
        "region under " +
        ctx.context()->render(ctx));
  if (v.isOne()) return fn(ctx, v.leafValue());
  Formula c = v.condition();
  Formula tc = conj(ctx, c);
  Formula ec = conj(ctx, neg(c));
  if (tc.isContradiction()) return transformLeaves(ec, v.elseBranch(), fn);
  if (ec.isContradiction()) return transformLeaves(tc, v.thenBranch(), fn);
  CondValue t = transformLeaves(tc, v.thenBranch(), fn);
  CondValue e = transformLeaves(ec, v.elseBranch(), fn);
  return choice(c, t, e);
}

CondValue smap(Formula ctx, const CondValue& v,
               const std::function<Value(const Value&)>& fn) {
  return transformLeaves(
      ctx, v, [&](Formula, const Value& x) { return CondValue::one(fn(x)); });
}

CondValue sflatMap(Formula ctx, const CondValue& v,
                   const std::function<CondValue(const Value&)>& fn) {
  return transformLeaves(ctx, v, [&](Formula c, const Value& x) {
    return restrictUnder(c, fn(x));
  });
}

CondValue writeUnder(Formula ctx, const CondValue& oldV,
                     const CondValue& newV) {
  return choice(ctx, newV, oldV);
}

Value select(const CondValue& v, const ConfigAssignment& cfg) {
  const CondValue::Node* n = v.node_.get();
  while (!n->leaf) n = evaluate(n->cond, cfg) ? n->t.get() : n->e.get();
  if (n->undef)
    throw VarexError("projection error: selected a pruned region under " +
                     cfg.toString());
  return n->v;
}

void forEachLeaf(Formula ctx, const CondValue& v,
                 const std::function<void(Formula, const Value&)>& fn) {
  if (!ctx.isSatisfiable()) return;
  if (v.isUndefined()) return;
  if (v.isOne()) {
    fn(ctx, v.leafValue());
    return;
  }
  forEachLeaf(conj(ctx, v.condition()), v.thenBranch(), fn);
  forEachLeaf(conj(ctx, neg(v.condition())), v.elseBranch(), fn);
}

Formula whenTrue(Formula ctx, const CondValue& v) {
  Formula acc = ctx.context()->falsum();
  forEachLeaf(ctx, v, [&](Formula c, const Value& x) {
    if (!x.isInt())
      throw VarexError("type error: branch condition is not an integer (" +
                       x.toDisplayString() + ")");
    if (x.asInt() != 0) acc = disj(acc, c);
  });
  return acc;
}

}  // namespace varex
