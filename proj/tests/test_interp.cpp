#include <doctest.h>

#include "varex/analysis.hpp"
#include "varex/interp.hpp"

using namespace varex;

namespace {

Program mustParse(const std::string& text) {
  ParseResult r = parseProgram(text);
  INFO(r.errorText());
  REQUIRE(r.ok());
  return *r.program;
}

ExecutionResult runPlain(const Program& p,
                         std::map<std::string, bool> options = {},
                         uint64_t fuel = kDefaultFuel) {
  Interpreter interp(p, standardIntrinsics(), fuel);
  interp.setOptionValues(std::move(options));
  return interp.runEntry();
}

}  // namespace

TEST_CASE("constant return") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 0 {
    CONST 1
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.status == ExecutionResult::Status::Normal);
  CHECK(r.returnValue == Value::ofInt(1));
}

TEST_CASE("arithmetic, locals and calls") {
  Program p = mustParse(R"(
class Main {
  method square(1) locals 1 {
    LOAD 0
    LOAD 0
    MUL
    RETURNVAL
  }
  method main(0) locals 1 {
    CONST 7
    INVOKE Main.square 1
    CONST 1
    ADD
    STORE 0
    LOAD 0
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.returnValue == Value::ofInt(50));
}

TEST_CASE("float math and concatenation") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 0 {
    CONST 100.0
    CONST 1.8
    MUL
    CONST 32
    ADD
    CONST "F"
    CONCAT
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.returnValue == Value::ofString("212F"));
}

TEST_CASE("options drive branches") {
  Program p = mustParse(R"(
option X
class Main {
  method main(0) locals 0 {
    GETOPTION X
    IFTRUE Lyes
    CONST "no"
    RETURNVAL
  Lyes:
    CONST "yes"
    RETURNVAL
  }
}
)");
  CHECK(runPlain(p, {{"X", true}}).returnValue == Value::ofString("yes"));
  CHECK(runPlain(p, {{"X", false}}).returnValue == Value::ofString("no"));
}

TEST_CASE("fig2 loop block sequence matches the hand trace") {
  // under A=1,B=1: a = 2, b = 3; visits b0,b1,b2,b4,b1,b2,b3,b1,b2,b4,b1,b5
  Program p = mustParse(R"(
option A
option B
class Main {
  method main(0) locals 3 {
    CONST 0
    STORE 0
    CONST 1
    GETOPTION A
    ADD
    STORE 1
    CONST 2
    GETOPTION B
    ADD
    STORE 2
  Lhead:
    LOAD 0
    LOAD 2
    CMPLT
    CONST 0
    CMPEQ
    IFTRUE Lexit
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
    GOTO Lhead
  Lwork:
    CONST 0
    POP
    GOTO Lhead
  Lexit:
    RETURN
  }
}
)");
  const MethodDef* m = p.findMethod("Main.main");
  MethodAnalysis a = analyzeMethod(*m, p);
  // map instruction index -> vblock entry
  std::vector<int> entryOf(a.normalized.code.size(), -1);
  for (int v = 0; v < int(a.vblocks.size()); ++v)
    entryOf[a.cfg.blocks[a.vblocks[v].memberBlocks.front()].first] = v;

  std::vector<int> visits;
  Interpreter interp(p, standardIntrinsics());
  interp.setOptionValues({{"A", true}, {"B", true}});
  interp.setStepHook([&](const MethodDef& mm, int pc) {
    if (mm.qualified() == "Main.main" && entryOf[pc] >= 0)
      visits.push_back(entryOf[pc]);
  });
  auto r = interp.runEntry();
  CHECK(r.status == ExecutionResult::Status::Normal);
  CHECK(visits ==
        std::vector<int>{0, 1, 2, 4, 1, 2, 3, 1, 2, 4, 1, 5});
}

TEST_CASE("exceptions: throw, catch, propagate") {
  Program p = mustParse(R"(
class Main {
  method boom(0) locals 0 {
    CONST "kaboom"
    THROW
  }
  method main(0) locals 1 {
    catch Lt Le Lc
  Lt:
    INVOKE Main.boom 0
    CONST "unreachable"
    RETURNVAL
  Le:
  Lc:
    STORE 0
    LOAD 0
    CONST "!"
    CONCAT
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.status == ExecutionResult::Status::Normal);
  CHECK(r.returnValue == Value::ofString("kaboom!"));
}

TEST_CASE("uncaught exceptions end the run with a message") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 0 {
    CONST 1
    CONST 0
    DIV
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.status == ExecutionResult::Status::Exception);
  CHECK(r.message == "division by zero");
}

TEST_CASE("array bounds raise catchable exceptions") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 1 {
    catch La Lb Lc
    CONST 2
    NEWARRAY
    STORE 0
  La:
    LOAD 0
    CONST 5
    ARRLOAD
    RETURNVAL
  Lb:
  Lc:
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.status == ExecutionResult::Status::Normal);
  CHECK(r.returnValue == Value::ofString("array index out of range"));
}

TEST_CASE("objects and fields") {
  Program p = mustParse(R"(
class Point {
  field x
  field y
  method mk(2) locals 3 {
    NEW Point
    STORE 2
    LOAD 2
    LOAD 0
    PUTFIELD x
    LOAD 2
    LOAD 1
    PUTFIELD y
    LOAD 2
    RETURNVAL
  }
  method main(0) locals 1 {
    CONST 3
    CONST 4
    INVOKE Point.mk 2
    STORE 0
    LOAD 0
    GETFIELD x
    LOAD 0
    GETFIELD y
    MUL
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.returnValue == Value::ofInt(12));
}

TEST_CASE("fuel limit aborts runaway loops") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 0 {
  L:
    GOTO L
  }
}
)");
  auto r = runPlain(p, {}, 1000);
  CHECK(r.status == ExecutionResult::Status::Abort);
  CHECK(r.message == "fuel exhausted");
  CHECK(r.steps <= 1001);
}

TEST_CASE("print and string intrinsics") {
  Program p = mustParse(R"ASM(
class Main {
  method main(0) locals 0 {
    CONST "hello :)"
    CONST ":)"
    CONST "SMILE"
    INTRINSIC str.replace 3
    INTRINSIC print 1
    POP
    CONST "done"
    INTRINSIC print 1
    POP
    RETURN
  }
}
)ASM");
  auto r = runPlain(p);
  CHECK(r.output == std::vector<std::string>{"hello SMILE", "done"});
}

TEST_CASE("lists: add, get, size, foreach") {
  Program p = mustParse(R"(
class Main {
  method show(1) locals 1 {
    LOAD 0
    INTRINSIC print 1
    POP
    RETURN
  }
  method main(0) locals 1 {
    INTRINSIC list.new 0
    STORE 0
    LOAD 0
    CONST 10
    INTRINSIC list.add 2
    POP
    LOAD 0
    CONST 20
    INTRINSIC list.add 2
    POP
    LOAD 0
    CONST "Main.show"
    INTRINSIC list.foreach 2
    POP
    LOAD 0
    CONST 1
    INTRINSIC list.get 2
    LOAD 0
    INTRINSIC list.size 1
    ADD
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.output == std::vector<std::string>{"10", "20"});
  CHECK(r.returnValue == Value::ofInt(22));
}

TEST_CASE("sets deduplicate") {
  Program p = mustParse(R"(
class Main {
  method main(0) locals 1 {
    INTRINSIC set.new 0
    STORE 0
    LOAD 0
    CONST "a"
    INTRINSIC set.add 2
    POP
    LOAD 0
    CONST "a"
    INTRINSIC set.add 2
    POP
    LOAD 0
    CONST "a"
    INTRINSIC set.contains 2
    LOAD 0
    CONST "b"
    INTRINSIC set.contains 2
    ADD
    RETURNVAL
  }
}
)");
  CHECK(runPlain(p).returnValue == Value::ofInt(1));
}

TEST_CASE("invoking a void method pushes nothing") {
  Program p = mustParse(R"(
class Main {
  method log(1) locals 1 {
    LOAD 0
    INTRINSIC print 1
    POP
    RETURN
  }
  method main(0) locals 0 {
    CONST "x"
    INVOKE Main.log 1
    CONST 5
    RETURNVAL
  }
}
)");
  auto r = runPlain(p);
  CHECK(r.returnValue == Value::ofInt(5));
  CHECK(r.output == std::vector<std::string>{"x"});
}
