#pragma once

#include "varex/vir.hpp"

namespace varex {

/// Result of the taint-style lift analysis: which locals, stack slots and
/// branches may depend on configuration options. Worst-case assumptions at
/// method boundaries: parameters, fields, call results and intrinsic results
/// are conditional.
struct LiftInfo {
  std::vector<char> localIsCond;               // per local slot
  std::vector<std::vector<char>> stackBefore;  // per instruction, bottom-up
  std::vector<char> branchConditional;         // per instruction (IFTRUE)
  std::vector<char> liftedInstr;  // emission differs from the plain opcode

  int liftedCount() const {
    int n = 0;
    for (char c : liftedInstr) n += c != 0;
    return n;
  }
};

/// Intra-procedural fixpoint over the method. Interleaves forward taint with
/// the VBlock refinement (locals stored in blocks that may execute under a
/// narrowed context are conditional) until stable. Expects a validated,
/// return-normalized method.
LiftInfo computeLiftBits(const MethodDef& m, const Program& p);

struct VBlockEdge {
  int to;
  EdgeKind kind;  // Uncond, CondTrue/CondFalse (lifted branch), Exceptional
};

/// Maximal group of basic blocks statically sharing one variability context.
struct VBlock {
  std::vector<int> memberBlocks;  // basic-block ids, text order
  std::vector<VBlockEdge> succ;   // edges to other VBlocks (and cond. self)
  bool isEntry = false;
  bool isReturn = false;
  int firstInstr = 0;  // text position of the first member instruction
};

/// Fixpoint of the merge rule: a block joins its predecessor's VBlock when
/// the incoming jump is non-conditional and all its predecessors already
/// share that VBlock. Exceptional edges count as conditional. Result order is
/// by first instruction (not yet the execution order).
std::vector<VBlock> partitionVBlocks(const CFG& cfg, const LiftInfo& lift,
                                     const MethodDef& m);

/// Total execution order: strict transitive predecessors first, ties broken
/// by source position; entry first, the unique return VBlock last. Throws
/// EngineBug if the method has more than one return VBlock (callers must
/// normalize returns first).
std::vector<VBlock> orderVBlocks(std::vector<VBlock> vblocks);

enum class SharingGuarantee { GuaranteedOptimal, NoGuarantee };

const char* sharingGuaranteeName(SharingGuarantee g);

/// GuaranteedOptimal iff the VBlock graph is acyclic or every loop is simple:
/// one header, one exiting node, and no conditional jumps from any other node
/// in the loop.
SharingGuarantee classifySharingGuarantee(const std::vector<VBlock>& ordered);

/// Per-method analysis bundle used by the transformer and the CLI dumps.
struct MethodAnalysis {
  MethodDef normalized;
  StackInfo stack;
  CFG cfg;
  LiftInfo lift;
  std::vector<VBlock> vblocks;  // in execution order
  SharingGuarantee guarantee;
  std::vector<int> vblockOfBB;  // basic block id -> ordered vblock index
};

MethodAnalysis analyzeMethod(const MethodDef& m, const Program& p);

/// Stable text dump of VBlock structure for one method (`varex blocks`).
std::string dumpBlocks(const MethodAnalysis& a, const std::string& qualified);

}  // namespace varex
