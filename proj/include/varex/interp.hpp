#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "varex/vir.hpp"

namespace varex {

/// Thrown by intrinsics to raise an IR-level exception (catchable by the
/// executing program's handler tables).
struct ThrowSignal {
  Value payload;
};

/// Thrown by intrinsics to end the whole run (environment-barrier abort,
/// engine-level faults). Not catchable by program handlers.
struct RunAbort {
  std::string reason;
};

/// Capabilities the interpreter hands to intrinsic handlers. Reentrant calls
/// run on the same interpreter instance and share its fuel.
class InterpHost {
 public:
  virtual Value callMethod(const std::string& qualified,
                           std::vector<Value> args) = 0;
  virtual void emitOutput(const std::string& line) = 0;
  virtual const Program& program() const = 0;

 protected:
  ~InterpHost() = default;
};

/// args are in push order (args[0] pushed first). Must return the value to
/// push; may throw ThrowSignal or RunAbort.
using IntrinsicFn =
    std::function<Value(std::vector<Value>& args, InterpHost& host)>;

struct IntrinsicRegistry {
  std::map<std::string, IntrinsicFn> table;
  void add(const std::string& name, IntrinsicFn fn) {
    table[name] = std::move(fn);
  }
  const IntrinsicFn* find(const std::string& name) const {
    auto it = table.find(name);
    return it == table.end() ? nullptr : &it->second;
  }
};

struct ExecutionResult {
  enum class Status { Normal, Exception, Abort };
  Status status = Status::Normal;
  Value returnValue;
  std::vector<std::string> output;
  uint64_t steps = 0;
  std::string message;  // exception payload text or abort reason
};

/// Called before each instruction executes: (method, pc).
using StepHook = std::function<void(const MethodDef&, int)>;

constexpr uint64_t kDefaultFuel = 10'000'000;

/// Plain stack-machine interpreter. Executes exactly the IR semantics; all
/// variability lives in code the programs themselves carry (intrinsics), so
/// this class stays oblivious to it.
class Interpreter : public InterpHost {
 public:
  Interpreter(const Program& p, IntrinsicRegistry registry,
              uint64_t fuel = kDefaultFuel);

  /// GETOPTION values for plain runs.
  void setOptionValues(std::map<std::string, bool> options);
  void setStepHook(StepHook hook);

  /// Runs the program's entry method to completion.
  ExecutionResult runEntry(std::vector<Value> args = {});

  // InterpHost
  Value callMethod(const std::string& qualified,
                   std::vector<Value> args) override;
  void emitOutput(const std::string& line) override;
  const Program& program() const override { return program_; }

  uint64_t stepsUsed() const { return steps_; }

 private:
  struct Frame {
    const MethodDef* method;
    std::vector<Value> locals;
    std::vector<Value> stack;
    int pc = 0;
  };

  Value invoke(const MethodDef& m, std::vector<Value> args);
  void step();
  // Unwinds an IR exception; rethrows if no handler at or above baseDepth.
  void unwind(Value payload, size_t baseDepth);

  const Program& program_;
  IntrinsicRegistry registry_;
  uint64_t fuel_;
  uint64_t steps_ = 0;
  std::map<std::string, bool> options_;
  StepHook hook_;
  std::vector<Frame> frames_;
  std::vector<std::string> output_;
  bool returned_ = false;  // set by step() when the base frame returns
  Value returnSlot_;
};

/// Plain standard library: print, str.replace, str.len, list.*, set.*,
/// io.raw. Shared by plain runs and (behind the environment barrier) by
/// variational runs.
IntrinsicRegistry standardIntrinsics();

}  // namespace varex
