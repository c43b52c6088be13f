#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "varex/value.hpp"

namespace varex {

enum class Opcode {
  Const,
  Load,
  Store,
  Add,
  Sub,
  Mul,
  Div,
  Rem,
  Neg,
  CmpEq,
  CmpLt,
  CmpGt,
  Concat,
  Goto,
  IfTrue,
  Pop,
  Dup,
  Swap,
  Invoke,
  Return,
  ReturnVal,
  New,
  GetField,
  PutField,
  NewArray,
  ArrLoad,
  ArrStore,
  ArrLen,
  GetOption,
  Throw,
  Intrinsic,
};

const char* opcodeName(Opcode op);

struct Instruction {
  Opcode op;
  Value constant;     // Const
  int slot = -1;      // Load / Store
  std::string name;   // Invoke callee, New class, field, option, intrinsic
  int arity = -1;     // Invoke / Intrinsic argument count
  std::string label;  // Goto / IfTrue target
  int target = -1;    // resolved target instruction index
  int line = 0;

  static Instruction make(Opcode op) {
    Instruction i;
    i.op = op;
    return i;
  }
};

/// Method-local handler: instructions in [from, to) that raise an exception
/// transfer to `handler` with the payload as the only stack value.
struct ExceptionHandler {
  std::string fromLabel, toLabel, handlerLabel;
  int from = -1, to = -1, handler = -1;
  int line = 0;
};

struct MethodDef {
  std::string className;
  std::string name;
  int paramCount = 0;
  int localCount = 0;
  bool returnsValue = false;
  std::vector<Instruction> code;
  std::vector<ExceptionHandler> handlers;
  std::map<std::string, int> labels;  // label -> instruction index (may be end)

  std::string qualified() const { return className + "." + name; }
};

struct ClassDef {
  std::string name;
  std::vector<std::string> fields;
  std::vector<MethodDef> methods;
};

struct Program {
  std::vector<std::string> options;
  std::vector<std::string> constraints;  // feature-model expression texts
  std::vector<ClassDef> classes;
  std::string entry;  // qualified name of the entry method

  const ClassDef* findClass(const std::string& name) const;
  const MethodDef* findMethod(const std::string& qualified) const;
  MethodDef* findMethod(const std::string& qualified);
  std::vector<const MethodDef*> allMethods() const;
};

struct ParseError {
  int line;
  std::string message;
};

struct ParseResult {
  std::optional<Program> program;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty() && program.has_value(); }
  std::string errorText() const;
};

/// Parses .vasm assembly text. Returns a program or per-line errors; the
/// result is validated (labels, arities, option names, stack discipline).
ParseResult parseProgram(const std::string& text);

/// Canonical assembly rendering; parse(print(p)) is structurally identical.
std::string printProgram(const Program& p);

/// Per-instruction operand-stack depth before execution. Every point must
/// have a unique statically-known depth; errors otherwise (also reports
/// unreachable code and fall-off-the-end paths).
struct StackInfo {
  std::vector<int> depthBefore;  // -1 for unreachable
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
};
StackInfo validateStackDiscipline(const MethodDef& m, const Program& p);

enum class EdgeKind { Uncond, CondTrue, CondFalse, Exceptional };

struct CfgEdge {
  int to;
  EdgeKind kind;
};

struct BasicBlock {
  int first;  // instruction range [first, last)
  int last;
  std::vector<CfgEdge> succ;
};

struct CFG {
  std::vector<BasicBlock> blocks;
  std::vector<int> blockOf;  // instruction index -> block id
};

/// Builds the CFG of a validated method. Handler ranges contribute
/// Exceptional edges from every covered block to the handler block.
CFG buildCFG(const MethodDef& m);

/// Rewrites a method to have a single return instruction at the end,
/// storing intermediate results in a fresh local. Analyses and the
/// variational transformation run on the normalized form.
MethodDef normalizeReturns(const MethodDef& m);

}  // namespace varex
