#include "varex/interp.hpp"

#include <algorithm>

#include "varex/errors.hpp"

namespace varex {

namespace {

struct ListData : BoxedValue {
  std::vector<Value> items;
  std::string describe() const override {
    return "list:" + std::to_string(items.size());
  }
};

struct SetData : BoxedValue {
  std::vector<Value> items;
  std::string describe() const override {
    return "set:" + std::to_string(items.size());
  }
};

[[noreturn]] void typeError(const std::string& what) {
  throw ThrowSignal{Value::ofString("type error: " + what)};
}

bool bothInt(const Value& a, const Value& b) { return a.isInt() && b.isInt(); }

Value arith(Opcode op, const Value& a, const Value& b) {
  switch (op) {
    case Opcode::Add:
      if (bothInt(a, b)) return Value::ofInt(a.asInt() + b.asInt());
      if (a.isNumber() && b.isNumber())
        return Value::ofDouble(a.asNumber() + b.asNumber());
      typeError("ADD needs numbers");
    case Opcode::Sub:
      if (bothInt(a, b)) return Value::ofInt(a.asInt() - b.asInt());
      if (a.isNumber() && b.isNumber())
        return Value::ofDouble(a.asNumber() - b.asNumber());
      typeError("SUB needs numbers");
    case Opcode::Mul:
      if (bothInt(a, b)) return Value::ofInt(a.asInt() * b.asInt());
      if (a.isNumber() && b.isNumber())
        return Value::ofDouble(a.asNumber() * b.asNumber());
      typeError("MUL needs numbers");
    case Opcode::Div:
      if (bothInt(a, b)) {
        if (b.asInt() == 0)
          throw ThrowSignal{Value::ofString("division by zero")};
        return Value::ofInt(a.asInt() / b.asInt());
      }
      if (a.isNumber() && b.isNumber())
        return Value::ofDouble(a.asNumber() / b.asNumber());
      typeError("DIV needs numbers");
    case Opcode::Rem:
      if (!bothInt(a, b)) typeError("REM needs integers");
      if (b.asInt() == 0)
        throw ThrowSignal{Value::ofString("division by zero")};
      return Value::ofInt(a.asInt() % b.asInt());
    case Opcode::CmpEq: {
      bool eq;
      if (a.isNumber() && b.isNumber())
        eq = a.asNumber() == b.asNumber();
      else
        eq = a == b;
      return Value::ofInt(eq ? 1 : 0);
    }
    case Opcode::CmpLt:
    case Opcode::CmpGt: {
      bool lt;
      if (a.isNumber() && b.isNumber())
        lt = op == Opcode::CmpLt ? a.asNumber() < b.asNumber()
                                 : a.asNumber() > b.asNumber();
      else if (a.isString() && b.isString())
        lt = op == Opcode::CmpLt ? a.asString() < b.asString()
                                 : a.asString() > b.asString();
      else
        typeError("comparison needs numbers or strings");
      return Value::ofInt(lt ? 1 : 0);
    }
    case Opcode::Concat:
      return Value::ofString(a.toDisplayString() + b.toDisplayString());
    default:
      throw EngineBug("arith: bad opcode");
  }
}

bool truthy(const Value& v) {
  if (!v.isInt()) typeError("branch condition is not an integer");
  return v.asInt() != 0;
}

}  // namespace

Interpreter::Interpreter(const Program& p, IntrinsicRegistry registry,
                         uint64_t fuel)
    : program_(p), registry_(std::move(registry)), fuel_(fuel) {}

void Interpreter::setOptionValues(std::map<std::string, bool> options) {
  options_ = std::move(options);
}

void Interpreter::setStepHook(StepHook hook) { hook_ = std::move(hook); }

void Interpreter::emitOutput(const std::string& line) {
  output_.push_back(line);
}

Value Interpreter::callMethod(const std::string& qualified,
                              std::vector<Value> args) {
  const MethodDef* m = program_.findMethod(qualified);
  if (!m) throw RunAbort{"call to unknown method " + qualified};
  if (int(args.size()) != m->paramCount)
    throw RunAbort{"bad argument count calling " + qualified};
  return invoke(*m, std::move(args));
}

ExecutionResult Interpreter::runEntry(std::vector<Value> args) {
  ExecutionResult result;
  const MethodDef* entry = program_.findMethod(program_.entry);
  if (!entry) throw EngineBug("entry method missing: " + program_.entry);
  try {
    result.returnValue = invoke(*entry, std::move(args));
    result.status = ExecutionResult::Status::Normal;
  } catch (const ThrowSignal& t) {
    result.status = ExecutionResult::Status::Exception;
    result.message = t.payload.isString() ? t.payload.asString()
                                          : t.payload.toDisplayString();
  } catch (const RunAbort& a) {
    result.status = ExecutionResult::Status::Abort;
    result.message = a.reason;
  }
  result.output = output_;
  result.steps = steps_;
  return result;
}

Value Interpreter::invoke(const MethodDef& m, std::vector<Value> args) {
  Frame f;
  f.method = &m;
  f.locals.assign(size_t(m.localCount), Value::null());
  for (size_t i = 0; i < args.size(); ++i) f.locals[i] = std::move(args[i]);
  frames_.push_back(std::move(f));
  size_t base = frames_.size();

  while (frames_.size() >= base) {
    try {
      step();
    } catch (ThrowSignal& t) {
      unwind(std::move(t.payload), base - 1);
    }
  }
  return std::move(returnSlot_);
}

void Interpreter::unwind(Value payload, size_t baseIndex) {
  for (size_t k = frames_.size(); k-- > baseIndex;) {
    Frame& fr = frames_[k];
    for (const auto& h : fr.method->handlers) {
      if (fr.pc >= h.from && fr.pc < h.to) {
        fr.stack.clear();
        fr.stack.push_back(std::move(payload));
        fr.pc = h.handler;
        frames_.resize(k + 1);
        return;
      }
    }
  }
  frames_.resize(baseIndex);
  throw ThrowSignal{std::move(payload)};
}

void Interpreter::step() {
  Frame& fr = frames_.back();
  const MethodDef& m = *fr.method;
  if (fr.pc < 0 || fr.pc >= int(m.code.size()))
    throw EngineBug("instruction pointer out of range in " + m.qualified());
  if (++steps_ > fuel_) throw RunAbort{"fuel exhausted"};
  if (hook_) hook_(m, fr.pc);

  const Instruction& ins = m.code[fr.pc];
  auto& stack = fr.stack;
  auto pop = [&]() {
    if (stack.empty()) throw EngineBug("stack underflow in " + m.qualified());
    Value v = std::move(stack.back());
    stack.pop_back();
    return v;
  };

  int next = fr.pc + 1;
  switch (ins.op) {
    case Opcode::Const:
      stack.push_back(ins.constant);
      break;
    case Opcode::Load:
      stack.push_back(fr.locals[ins.slot]);
      break;
    case Opcode::Store:
      fr.locals[ins.slot] = pop();
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::Div:
    case Opcode::Rem:
    case Opcode::CmpEq:
    case Opcode::CmpLt:
    case Opcode::CmpGt:
    case Opcode::Concat: {
      Value b = pop();
      Value a = pop();
      stack.push_back(arith(ins.op, a, b));
      break;
    }
    case Opcode::Neg: {
      Value a = pop();
      if (a.isInt())
        stack.push_back(Value::ofInt(-a.asInt()));
      else if (a.isDouble())
        stack.push_back(Value::ofDouble(-a.asDouble()));
      else
        typeError("NEG needs a number");
      break;
    }
    case Opcode::Goto:
      next = ins.target;
      break;
    case Opcode::IfTrue:
      if (truthy(pop())) next = ins.target;
      break;
    case Opcode::Pop:
      pop();
      break;
    case Opcode::Dup: {
      Value a = pop();
      stack.push_back(a);
      stack.push_back(a);
      break;
    }
    case Opcode::Swap: {
      Value b = pop();
      Value a = pop();
      stack.push_back(std::move(b));
      stack.push_back(std::move(a));
      break;
    }
    case Opcode::Invoke: {
      const MethodDef* callee = program_.findMethod(ins.name);
      if (!callee) throw EngineBug("unknown callee " + ins.name);
      std::vector<Value> args(size_t(ins.arity));
      for (int i = ins.arity - 1; i >= 0; --i) args[size_t(i)] = pop();
      // pc stays on the INVOKE while the callee runs so handler ranges match;
      // frames_ may reallocate, so re-fetch the frame afterwards.
      Value result = invoke(*callee, std::move(args));
      Frame& caller = frames_.back();
      if (callee->returnsValue) caller.stack.push_back(std::move(result));
      caller.pc += 1;
      return;
    }
    case Opcode::Return:
    case Opcode::ReturnVal: {
      Value v = ins.op == Opcode::ReturnVal ? pop() : Value::null();
      frames_.pop_back();
      returnSlot_ = std::move(v);
      return;
    }
    case Opcode::New: {
      const ClassDef* c = program_.findClass(ins.name);
      if (!c) throw EngineBug("unknown class " + ins.name);
      auto obj = std::make_shared<ObjectData>();
      obj->className = c->name;
      for (const auto& fieldName : c->fields)
        obj->fields[fieldName] = Value::null();
      stack.push_back(Value::ofObject(std::move(obj)));
      break;
    }
    case Opcode::GetField: {
      Value o = pop();
      if (o.isNull()) throw ThrowSignal{Value::ofString("null reference")};
      if (!o.isObject()) typeError("field read on a non-object");
      auto it = o.asObject()->fields.find(ins.name);
      if (it == o.asObject()->fields.end())
        throw ThrowSignal{Value::ofString("no such field: " + ins.name)};
      stack.push_back(it->second);
      break;
    }
    case Opcode::PutField: {
      Value v = pop();
      Value o = pop();
      if (o.isNull()) throw ThrowSignal{Value::ofString("null reference")};
      if (!o.isObject()) typeError("field write on a non-object");
      auto it = o.asObject()->fields.find(ins.name);
      if (it == o.asObject()->fields.end())
        throw ThrowSignal{Value::ofString("no such field: " + ins.name)};
      it->second = std::move(v);
      break;
    }
    case Opcode::NewArray: {
      Value n = pop();
      if (!n.isInt() || n.asInt() < 0)
        throw ThrowSignal{Value::ofString("negative array length")};
      auto arr = std::make_shared<ArrayData>();
      arr->cells.assign(size_t(n.asInt()), Value::null());
      stack.push_back(Value::ofArray(std::move(arr)));
      break;
    }
    case Opcode::ArrLoad: {
      Value idx = pop();
      Value a = pop();
      if (a.isNull()) throw ThrowSignal{Value::ofString("null reference")};
      if (!a.isArray() || !idx.isInt()) typeError("ARRLOAD needs array, int");
      auto& cells = a.asArray()->cells;
      int64_t i = idx.asInt();
      if (i < 0 || i >= int64_t(cells.size()))
        throw ThrowSignal{Value::ofString("array index out of range")};
      stack.push_back(cells[size_t(i)]);
      break;
    }
    case Opcode::ArrStore: {
      Value v = pop();
      Value idx = pop();
      Value a = pop();
      if (a.isNull()) throw ThrowSignal{Value::ofString("null reference")};
      if (!a.isArray() || !idx.isInt()) typeError("ARRSTORE needs array, int");
      auto& cells = a.asArray()->cells;
      int64_t i = idx.asInt();
      if (i < 0 || i >= int64_t(cells.size()))
        throw ThrowSignal{Value::ofString("array index out of range")};
      cells[size_t(i)] = std::move(v);
      break;
    }
    case Opcode::ArrLen: {
      Value a = pop();
      if (a.isNull()) throw ThrowSignal{Value::ofString("null reference")};
      if (!a.isArray()) typeError("ARRLEN needs an array");
      stack.push_back(Value::ofInt(int64_t(a.asArray()->cells.size())));
      break;
    }
    case Opcode::GetOption: {
      auto it = options_.find(ins.name);
      if (it == options_.end())
        throw RunAbort{"option " + ins.name + " has no value in this run"};
      stack.push_back(Value::ofInt(it->second ? 1 : 0));
      break;
    }
    case Opcode::Throw:
      throw ThrowSignal{pop()};
    case Opcode::Intrinsic: {
      const IntrinsicFn* fn = registry_.find(ins.name);
      if (!fn) throw RunAbort{"unknown intrinsic " + ins.name};
      std::vector<Value> args(size_t(ins.arity));
      for (int i = ins.arity - 1; i >= 0; --i) args[size_t(i)] = pop();
      // the handler may reenter the interpreter; re-fetch the frame
      Value result = (*fn)(args, *this);
      Frame& caller = frames_.back();
      caller.stack.push_back(std::move(result));
      caller.pc += 1;
      return;
    }
  }
  fr.pc = next;
}

IntrinsicRegistry standardIntrinsics() {
  IntrinsicRegistry reg;

  reg.add("print", [](std::vector<Value>& args, InterpHost& host) {
    host.emitOutput(args.at(0).toDisplayString());
    return Value::null();
  });

  // raw console write; classified ABORT across the environment barrier
  reg.add("io.raw", [](std::vector<Value>& args, InterpHost& host) {
    host.emitOutput(args.at(0).toDisplayString());
    return Value::null();
  });

  reg.add("str.replace", [](std::vector<Value>& args, InterpHost&) {
    if (!args[0].isString() || !args[1].isString() || !args[2].isString())
      typeError("str.replace needs strings");
    const std::string& s = args[0].asString();
    const std::string& find = args[1].asString();
    const std::string& repl = args[2].asString();
    if (find.empty()) return Value::ofString(s);
    std::string out;
    size_t pos = 0;
    while (true) {
      size_t hit = s.find(find, pos);
      if (hit == std::string::npos) {
        out += s.substr(pos);
        break;
      }
      out += s.substr(pos, hit - pos);
      out += repl;
      pos = hit + find.size();
    }
    return Value::ofString(out);
  });

  reg.add("str.len", [](std::vector<Value>& args, InterpHost&) {
    if (!args[0].isString()) typeError("str.len needs a string");
    return Value::ofInt(int64_t(args[0].asString().size()));
  });

  reg.add("list.new", [](std::vector<Value>&, InterpHost&) {
    return Value::ofBox(std::make_shared<ListData>());
  });
  reg.add("list.add", [](std::vector<Value>& args, InterpHost&) {
    auto list = args.at(0).isBox()
                    ? std::dynamic_pointer_cast<ListData>(args[0].asBox())
                    : nullptr;
    if (!list) typeError("list.add needs a list");
    list->items.push_back(args.at(1));
    return Value::null();
  });
  reg.add("list.get", [](std::vector<Value>& args, InterpHost&) {
    auto list = args.at(0).isBox()
                    ? std::dynamic_pointer_cast<ListData>(args[0].asBox())
                    : nullptr;
    if (!list || !args.at(1).isInt()) typeError("list.get needs list, int");
    int64_t i = args[1].asInt();
    if (i < 0 || i >= int64_t(list->items.size()))
      throw ThrowSignal{Value::ofString("list index out of range")};
    return list->items[size_t(i)];
  });
  reg.add("list.size", [](std::vector<Value>& args, InterpHost&) {
    auto list = args.at(0).isBox()
                    ? std::dynamic_pointer_cast<ListData>(args[0].asBox())
                    : nullptr;
    if (!list) typeError("list.size needs a list");
    return Value::ofInt(int64_t(list->items.size()));
  });
  reg.add("list.foreach", [](std::vector<Value>& args, InterpHost& host) {
    auto list = args.at(0).isBox()
                    ? std::dynamic_pointer_cast<ListData>(args[0].asBox())
                    : nullptr;
    if (!list || !args.at(1).isString())
      typeError("list.foreach needs list, method name");
    for (const Value& v : list->items)
      host.callMethod(args[1].asString(), {v});
    return Value::null();
  });

  reg.add("set.new", [](std::vector<Value>&, InterpHost&) {
    return Value::ofBox(std::make_shared<SetData>());
  });
  reg.add("set.add", [](std::vector<Value>& args, InterpHost&) {
    auto set = args.at(0).isBox()
                   ? std::dynamic_pointer_cast<SetData>(args[0].asBox())
                   : nullptr;
    if (!set) typeError("set.add needs a set");
    for (const Value& v : set->items)
      if (v == args.at(1)) return Value::null();
    set->items.push_back(args.at(1));
    return Value::null();
  });
  reg.add("set.contains", [](std::vector<Value>& args, InterpHost&) {
    auto set = args.at(0).isBox()
                   ? std::dynamic_pointer_cast<SetData>(args[0].asBox())
                   : nullptr;
    if (!set) typeError("set.contains needs a set");
    for (const Value& v : set->items)
      if (v == args.at(1)) return Value::ofInt(1);
    return Value::ofInt(0);
  });

  return reg;
}

}  // namespace varex
