#include <doctest.h>

#include <set>

#include "varex/analysis.hpp"

using namespace varex;

namespace {

Program mustParse(const std::string& text) {
  ParseResult r = parseProgram(text);
  INFO(r.errorText());
  REQUIRE(r.ok());
  return *r.program;
}

// Fig. 2-shaped loop with option-driven data so branches are conditional.
const char* kFig2 = R"(
option A
option B
option C

class Main {
  method main(0) locals 3 {
    # b0: i = 0; a = 1 + A; b = 2 + B + C
    CONST 0
    STORE 0
    CONST 1
    GETOPTION A
    ADD
    STORE 1
    CONST 2
    GETOPTION B
    ADD
    GETOPTION C
    ADD
    STORE 2
  Lhead:           # b1: exit unless i < b
    LOAD 0
    LOAD 2
    CMPLT
    CONST 0
    CMPEQ
    IFTRUE Lexit
    # b2: i++; branch on i != a
    LOAD 0
    CONST 1
    ADD
    STORE 0
    LOAD 0
    LOAD 1
    CMPEQ
    CONST 0
    CMPEQ
    IFTRUE Lwork
    # b3
    GOTO Lhead
  Lwork:           # b4
    CONST 0
    POP
    GOTO Lhead
  Lexit:           # b5
    RETURN
  }
}
)";

const char* kGetWeather = R"(
option FAHRENHEIT
class W {
  method getWeather(0) locals 1 {
    CONST 25
    STORE 0
    GETOPTION FAHRENHEIT
    IFTRUE Lf
    LOAD 0
    CONST "C"
    CONCAT
    RETURNVAL
  Lf:
    LOAD 0
    CONST 9
    MUL
    CONST 5
    DIV
    CONST 32
    ADD
    CONST "F"
    CONCAT
    RETURNVAL
  }
  method main(0) locals 0 {
    INVOKE W.getWeather 0
    RETURNVAL
  }
}
)";

}  // namespace

TEST_CASE("constants-only method has zero lifted instructions") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 1 {
    CONST "done"
    INTRINSIC print 1
    POP
    RETURN
  }
}
)");
  MethodAnalysis a = analyzeMethod(*p.findMethod("Main.main"), p);
  CHECK(a.lift.liftedCount() == 0);
  CHECK(a.vblocks.size() == 1);
}

TEST_CASE("branch on an option read is marked conditional") {
  Program p = mustParse(R"(
option X
class Main {
  method main(0) locals 0 {
    GETOPTION X
    IFTRUE L
  L:
    RETURN
  }
}
)");
  const MethodDef* m = p.findMethod("Main.main");
  LiftInfo lift = computeLiftBits(*m, p);
  CHECK(lift.branchConditional[1] == 1);
}

TEST_CASE("constant loop bound stays non-conditional, loop in one VBlock") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 1 {
    CONST 0
    STORE 0
  Lhead:
    LOAD 0
    CONST 3
    CMPLT
    CONST 0
    CMPEQ
    IFTRUE Lexit
    LOAD 0
    CONST 1
    ADD
    STORE 0
    GOTO Lhead
  Lexit:
    RETURN
  }
}
)");
  MethodAnalysis a = analyzeMethod(*p.findMethod("Main.main"), p);
  CHECK(a.lift.liftedCount() == 0);
  CHECK(a.lift.localIsCond[0] == 0);
  // all loop basic blocks share one vblock
  CFG& cfg = a.cfg;
  std::set<int> loopVBlocks;
  for (int bb = 0; bb < int(cfg.blocks.size()); ++bb) {
    int first = cfg.blocks[bb].first;
    if (first >= 2 && a.normalized.code[cfg.blocks[bb].last - 1].op !=
                          Opcode::Return)  // loop body blocks
      loopVBlocks.insert(a.vblockOfBB[bb]);
  }
  CHECK(loopVBlocks.size() == 1);
  CHECK(a.guarantee == SharingGuarantee::GuaranteedOptimal);
}

TEST_CASE("Fig.2 program partitions into six VBlocks in listed order") {
  Program p = mustParse(kFig2);
  MethodAnalysis a = analyzeMethod(*p.findMethod("Main.main"), p);
  REQUIRE(a.vblocks.size() == 6);
  // b0 entry, b5 return, order extends the strict-predecessor relation
  CHECK(a.vblocks[0].isEntry);
  CHECK(a.vblocks[5].isReturn);
  // b1 -> b5 (cond-true) and b1 -> b2 (fall)
  auto hasEdge = [&](int from, int to, EdgeKind k) {
    for (const auto& e : a.vblocks[from].succ)
      if (e.to == to && e.kind == k) return true;
    return false;
  };
  CHECK(hasEdge(0, 1, EdgeKind::Uncond));
  CHECK(hasEdge(1, 5, EdgeKind::CondTrue));
  CHECK(hasEdge(1, 2, EdgeKind::CondFalse));
  CHECK(hasEdge(2, 4, EdgeKind::CondTrue));
  CHECK(hasEdge(2, 3, EdgeKind::CondFalse));
  CHECK(hasEdge(3, 1, EdgeKind::Uncond));
  CHECK(hasEdge(4, 1, EdgeKind::Uncond));
  // conditional jump inside the loop from a non-exiting node: no guarantee
  CHECK(a.guarantee == SharingGuarantee::NoGuarantee);
}

TEST_CASE("getWeather diamond: four VBlocks, guaranteed optimal") {
  Program p = mustParse(kGetWeather);
  MethodAnalysis a = analyzeMethod(*p.findMethod("W.getWeather"), p);
  REQUIRE(a.vblocks.size() == 4);
  CHECK(a.vblocks[0].isEntry);
  CHECK(a.vblocks[3].isReturn);
  // then/else both feed the merged return block; lexical order breaks the tie
  CHECK(a.vblocks[1].firstInstr < a.vblocks[2].firstInstr);
  CHECK(a.guarantee == SharingGuarantee::GuaranteedOptimal);
}

TEST_CASE("A->C unconditional stays separate when B->C is conditional") {
  // A(b0) falls into C only via GOTO; B reaches C via a conditional edge.
  Program p = mustParse(R"(
option X
class Main {
  method main(0) locals 0 {
    GETOPTION X
    IFTRUE Lb      # b0 (A): conditional split
    GOTO Lc        # A-path block: unconditional jump to C
  Lb:
    GETOPTION X
    IFTRUE Lc      # B: conditional edge into C
    GOTO Lend
  Lc:              # C
    GOTO Lend
  Lend:
    RETURN
  }
}
)");
  MethodAnalysis a = analyzeMethod(*p.findMethod("Main.main"), p);
  // the A-path block and C must be in different vblocks
  const CFG& cfg = a.cfg;
  int gotoBlock = -1, cBlock = -1;
  for (int bb = 0; bb < int(cfg.blocks.size()); ++bb) {
    const Instruction& first = a.normalized.code[cfg.blocks[bb].first];
    if (first.op == Opcode::Goto && first.label == "Lc") gotoBlock = bb;
  }
  cBlock = cfg.blockOf[a.normalized.labels.at("Lc")];
  REQUIRE(gotoBlock >= 0);
  CHECK(a.vblockOfBB[gotoBlock] != a.vblockOfBB[cBlock]);
}

TEST_CASE("while loop with one-VBlock body keeps the guarantee") {
  Program p = mustParse(R"(
option N
class Main {
  method main(0) locals 2 {
    CONST 0
    STORE 0
    CONST 3
    GETOPTION N
    ADD
    STORE 1
  Lhead:
    LOAD 0
    LOAD 1
    CMPLT
    CONST 0
    CMPEQ
    IFTRUE Lexit
    LOAD 0
    CONST 1
    ADD
    STORE 0
    GOTO Lhead
  Lexit:
    RETURN
  }
}
)");
  MethodAnalysis a = analyzeMethod(*p.findMethod("Main.main"), p);
  CHECK(a.guarantee == SharingGuarantee::GuaranteedOptimal);
}

TEST_CASE("ordering respects the strict transitive predecessor relation") {
  for (const char* src : {kFig2, kGetWeather}) {
    Program p = mustParse(src);
    for (const MethodDef* m : p.allMethods()) {
      MethodAnalysis a = analyzeMethod(*m, p);
      int n = int(a.vblocks.size());
      // recompute reachability over ordered blocks
      std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
      for (int s = 0; s < n; ++s) {
        std::vector<int> stack{s};
        while (!stack.empty()) {
          int v = stack.back();
          stack.pop_back();
          for (const auto& e : a.vblocks[v].succ)
            if (!reach[s][e.to]) {
              reach[s][e.to] = 1;
              stack.push_back(e.to);
            }
        }
      }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (reach[i][j] && !reach[j][i]) CHECK(i < j);
    }
  }
}

TEST_CASE("partition soundness: no conditional edge inside a VBlock") {
  for (const char* src : {kFig2, kGetWeather}) {
    Program p = mustParse(src);
    for (const MethodDef* m : p.allMethods()) {
      MethodAnalysis a = analyzeMethod(*m, p);
      for (int bb = 0; bb < int(a.cfg.blocks.size()); ++bb) {
        int terminator = a.cfg.blocks[bb].last - 1;
        for (const auto& e : a.cfg.blocks[bb].succ) {
          bool conditional =
              e.kind == EdgeKind::Exceptional ||
              ((e.kind == EdgeKind::CondTrue || e.kind == EdgeKind::CondFalse) &&
               a.lift.branchConditional[terminator]);
          if (conditional && e.to != bb)
            CHECK(a.vblockOfBB[bb] != a.vblockOfBB[e.to]);
        }
      }
    }
  }
}

TEST_CASE("analysis is a stable fixpoint") {
  Program p = mustParse(kFig2);
  const MethodDef* m = p.findMethod("Main.main");
  MethodDef norm = normalizeReturns(*m);
  LiftInfo a = computeLiftBits(norm, p);
  LiftInfo b = computeLiftBits(norm, p);
  CHECK(a.localIsCond == b.localIsCond);
  CHECK(a.branchConditional == b.branchConditional);
  CHECK(a.liftedInstr == b.liftedInstr);
}
