#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "varex/condval.hpp"
#include "varex/formula.hpp"
#include "varex/interp.hpp"

namespace varex {

struct FormulaBox : BoxedValue {
  explicit FormulaBox(Formula f) : f(f) {}
  Formula f;
  std::string describe() const override {
    return "fx:" + f.context()->render(f);
  }
};

struct CondValueBox : BoxedValue {
  explicit CondValueBox(CondValue v) : v(std::move(v)) {}
  CondValue v;
  std::string describe() const override { return v.toDebugString(); }
};

/// Variational list: ordered optional elements (concrete value + presence).
struct VListBox : BoxedValue {
  std::vector<std::pair<Value, Formula>> entries;
  std::string describe() const override {
    return "vlist:" + std::to_string(entries.size());
  }
};

/// Variational set: value -> presence formula.
struct VSetBox : BoxedValue {
  std::vector<std::pair<Value, Formula>> entries;
  std::string describe() const override {
    return "vset:" + std::to_string(entries.size());
  }
};

Value boxFormula(Formula f);
Value boxCondValue(CondValue v);
Formula unboxFormula(const Value& v);
/// Conditional-value view of any runtime value: passes boxes through and
/// wraps plain values as One (unlifted data is shared by all configurations).
CondValue asCondValue(const Value& v);
/// Restriction of v to ctx (prunes unreachable alternatives).
CondValue restrictTo(Formula ctx, const CondValue& v);

// --- variational collections (model classes) ---

void vlistAdd(VListBox& list, Formula ctx, const CondValue& v);
CondValue vlistGet(const VListBox& list, Formula ctx, const CondValue& idx);
CondValue vlistSize(const VListBox& list, Formula ctx);
/// One entry per optional element with presence ∧ ctx; contradictions skipped.
std::vector<std::pair<Value, Formula>> vlistIter(const VListBox& list,
                                                 Formula ctx);

void vsetAdd(VSetBox& set, Formula ctx, const CondValue& v);
CondValue vsetContains(const VSetBox& set, Formula ctx, const CondValue& v);

// --- environment barrier ---

enum class BarrierClass { SideEffectFree, Modeled, Abort };

struct BarrierPolicy {
  std::map<std::string, BarrierClass> table;
  /// replace/len -> SIDE_EFFECT_FREE; print and collections -> MODELED;
  /// io.raw -> ABORT. Unlisted intrinsics default to ABORT.
  static BarrierPolicy standard();
  /// Lines: `intrinsic <name> <SIDE_EFFECT_FREE|MODELED|ABORT>`.
  void load(const std::string& text);
  BarrierClass classify(const std::string& name) const;
};

struct TraceEntry {
  int block;
  Formula ctx;
};

struct MethodTrace {
  std::string method;
  Formula methodCtx;
  std::vector<TraceEntry> entries;
  bool complete = false;
};

struct OutputEntry {
  std::string text;
  Formula ctx;
};

struct GlobalBlockEntry {
  std::string method;
  int block;
  Formula ctx;
};

/// Per-run state shared by the engine intrinsics of one variational
/// execution attempt. Owns nothing the interpreter knows about; the emitted
/// code reaches it only through the registered intrinsics.
class VarexSession {
 public:
  VarexSession(const FormulaContext& ctx, Formula methodContext,
               BarrierPolicy policy, bool assertionsOn);

  const FormulaContext& formulas() const { return ctx_; }
  Formula methodContext() const { return mctx_; }
  bool assertionsOn() const { return assertionsOn_; }
  const BarrierPolicy& policy() const { return policy_; }

  // trace frames
  void pushMethod(const std::string& name, Formula mctx);
  void popMethod(Formula finalPhi);
  void recordBlock(int block, Formula ctx);
  Formula currentMethodContext() const;

  void checkContexts(const std::vector<Formula>& phis);

  std::vector<MethodTrace> takeTraces();  // completed + leftover (incomplete)

  const FormulaContext& ctx_;
  Formula mctx_;
  BarrierPolicy policy_;
  bool assertionsOn_;

  std::vector<OutputEntry> output;
  std::vector<GlobalBlockEntry> blockStream;
  std::map<std::pair<std::string, int>, uint64_t> blockCounts;
  std::vector<MethodTrace> completed;
  std::vector<MethodTrace> active;
  uint64_t disjointChecks = 0;
  std::optional<std::string> fullThrowMessage;
  uint64_t methodExecutions = 0;
};

/// Per-leaf cartesian expansion / model dispatch / abort, per §-style
/// strategy selection by the policy. Plain handlers come from
/// standardIntrinsics().
CondValue invokeAcrossBarrier(VarexSession& session, const std::string& name,
                              Formula ctx, std::vector<CondValue> args,
                              InterpHost& host);

/// Full registry for variational runs: plain intrinsics, engine intrinsics
/// (fx.*, cv.*, vb.*) and barrier wrappers (@name). The session must outlive
/// the interpreter using the registry.
IntrinsicRegistry variationalIntrinsics(VarexSession& session);

}  // namespace varex
