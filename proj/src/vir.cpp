#include "varex/vir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <set>
#include <sstream>
#include <unordered_map>

#include "varex/formula.hpp"

namespace varex {

namespace {

const std::unordered_map<std::string, Opcode>& opcodeTable() {
  static const std::unordered_map<std::string, Opcode> table = {
      {"CONST", Opcode::Const},       {"LOAD", Opcode::Load},
      {"STORE", Opcode::Store},       {"ADD", Opcode::Add},
      {"SUB", Opcode::Sub},           {"MUL", Opcode::Mul},
      {"DIV", Opcode::Div},           {"REM", Opcode::Rem},
      {"NEG", Opcode::Neg},           {"CMPEQ", Opcode::CmpEq},
      {"CMPLT", Opcode::CmpLt},       {"CMPGT", Opcode::CmpGt},
      {"CONCAT", Opcode::Concat},     {"GOTO", Opcode::Goto},
      {"IFTRUE", Opcode::IfTrue},     {"POP", Opcode::Pop},
      {"DUP", Opcode::Dup},           {"SWAP", Opcode::Swap},
      {"INVOKE", Opcode::Invoke},     {"RETURN", Opcode::Return},
      {"RETURNVAL", Opcode::ReturnVal},
      {"NEW", Opcode::New},           {"GETFIELD", Opcode::GetField},
      {"PUTFIELD", Opcode::PutField}, {"NEWARRAY", Opcode::NewArray},
      {"ARRLOAD", Opcode::ArrLoad},   {"ARRSTORE", Opcode::ArrStore},
      {"ARRLEN", Opcode::ArrLen},     {"GETOPTION", Opcode::GetOption},
      {"THROW", Opcode::Throw},       {"INTRINSIC", Opcode::Intrinsic},
  };
  return table;
}

struct Token {
  enum Kind { Atom, Str, Punct } kind;
  std::string text;
};

// Tokenizes one source line; understands "quoted strings" and # comments.
bool tokenizeLine(const std::string& line, std::vector<Token>& out,
                  std::string& error) {
  size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (std::isspace((unsigned char)c)) {
      ++i;
      continue;
    }
    if (c == '#') break;
    if (c == '"') {
      std::string s;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char d = line[i++];
        if (d == '"') {
          closed = true;
          break;
        }
        if (d == '\\') {
          if (i >= line.size()) break;
          char e = line[i++];
          switch (e) {
            case 'n': s += '\n'; break;
            case 't': s += '\t'; break;
            case '\\': s += '\\'; break;
            case '"': s += '"'; break;
            default:
              error = std::string("unknown escape \\") + e;
              return false;
          }
        } else {
          s += d;
        }
      }
      if (!closed) {
        error = "unterminated string literal";
        return false;
      }
      out.push_back({Token::Str, s});
      continue;
    }
    if (c == '{' || c == '}' || c == '(' || c == ')' || c == ':') {
      out.push_back({Token::Punct, std::string(1, c)});
      ++i;
      continue;
    }
    size_t start = i;
    while (i < line.size() && !std::isspace((unsigned char)line[i]) &&
           line[i] != '{' && line[i] != '}' && line[i] != '(' &&
           line[i] != ')' && line[i] != ':' && line[i] != '#' &&
           line[i] != '"')
      ++i;
    out.push_back({Token::Atom, line.substr(start, i - start)});
  }
  return true;
}

bool looksNumeric(const std::string& s) {
  if (s.empty()) return false;
  size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  return i < s.size() && std::isdigit((unsigned char)s[i]);
}

std::string escapeString(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      default: out += c;
    }
  }
  out += "\"";
  return out;
}

std::string renderConst(const Value& v) {
  if (v.isNull()) return "null";
  if (v.isInt()) return std::to_string(v.asInt());
  if (v.isDouble()) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v.asDouble());
    (void)ec;
    std::string s(buf, p);
    if (s.find_first_of(".eEin") == std::string::npos) s += ".0";
    return s;
  }
  return escapeString(v.asString());
}

struct Parser {
  std::vector<ParseError> errors;
  Program program;
  bool sawEntryDecl = false;

  void error(int line, std::string msg) {
    errors.push_back({line, std::move(msg)});
  }

  void run(const std::string& text);

  // state while inside class/method
  ClassDef* curClass = nullptr;
  MethodDef* curMethod = nullptr;

  void handleLine(int lineNo, std::vector<Token>& toks);
  void handleInstruction(int lineNo, std::vector<Token>& toks);
};

void Parser::run(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::vector<Token> toks;
    std::string tokErr;
    if (!tokenizeLine(line, toks, tokErr)) {
      error(lineNo, tokErr);
      continue;
    }
    if (toks.empty()) continue;
    handleLine(lineNo, toks);
  }
  if (curMethod) error(lineNo, "unterminated method body");
  if (curClass) error(lineNo, "unterminated class body");
}

void Parser::handleLine(int lineNo, std::vector<Token>& toks) {
  const Token& head = toks[0];
  auto atomAt = [&](size_t i) -> const std::string* {
    if (i < toks.size() && toks[i].kind == Token::Atom) return &toks[i].text;
    return nullptr;
  };
  auto punctAt = [&](size_t i, const char* p) {
    return i < toks.size() && toks[i].kind == Token::Punct && toks[i].text == p;
  };

  if (curMethod) {
    if (head.kind == Token::Punct && head.text == "}") {
      curMethod = nullptr;
      return;
    }
    handleInstruction(lineNo, toks);
    return;
  }

  if (curClass) {
    if (head.kind == Token::Punct && head.text == "}") {
      curClass = nullptr;
      return;
    }
    if (head.kind == Token::Atom && head.text == "field") {
      const std::string* name = atomAt(1);
      if (!name || toks.size() != 2) {
        error(lineNo, "expected: field <name>");
        return;
      }
      if (std::find(curClass->fields.begin(), curClass->fields.end(), *name) !=
          curClass->fields.end()) {
        error(lineNo, "duplicate field " + *name);
        return;
      }
      curClass->fields.push_back(*name);
      return;
    }
    if (head.kind == Token::Atom && head.text == "method") {
      // method <name> ( <n> ) locals <k> {
      const std::string* name = atomAt(1);
      const std::string* params = atomAt(3);
      const std::string* localsKw = atomAt(5);
      const std::string* locals = atomAt(6);
      if (!name || !punctAt(2, "(") || !params || !punctAt(4, ")") ||
          !localsKw || *localsKw != "locals" || !locals || !punctAt(7, "{") ||
          toks.size() != 8) {
        error(lineNo, "expected: method <name>(<n>) locals <k> {");
        return;
      }
      MethodDef m;
      m.className = curClass->name;
      m.name = *name;
      try {
        m.paramCount = std::stoi(*params);
        m.localCount = std::stoi(*locals);
      } catch (...) {
        error(lineNo, "bad parameter/local count");
        return;
      }
      if (m.paramCount < 0 || m.localCount < m.paramCount) {
        error(lineNo, "locals must cover parameters");
        return;
      }
      for (const auto& other : curClass->methods)
        if (other.name == m.name) {
          error(lineNo, "duplicate method " + m.qualified());
          return;
        }
      curClass->methods.push_back(std::move(m));
      curMethod = &curClass->methods.back();
      return;
    }
    error(lineNo, "unexpected token '" + head.text + "' in class body");
    return;
  }

  if (head.kind != Token::Atom) {
    error(lineNo, "unexpected token '" + head.text + "'");
    return;
  }
  if (head.text == "option") {
    const std::string* name = atomAt(1);
    if (!name || toks.size() != 2) {
      error(lineNo, "expected: option <name>");
      return;
    }
    if (std::find(program.options.begin(), program.options.end(), *name) !=
        program.options.end()) {
      error(lineNo, "duplicate option " + *name);
      return;
    }
    program.options.push_back(*name);
    return;
  }
  if (head.text == "constraint") {
    std::string expr;
    for (size_t i = 1; i < toks.size(); ++i) {
      if (!expr.empty()) expr += " ";
      expr += toks[i].text;
    }
    if (expr.empty()) {
      error(lineNo, "expected: constraint <expr>");
      return;
    }
    program.constraints.push_back(expr);
    return;
  }
  if (head.text == "entry") {
    const std::string* name = atomAt(1);
    if (!name || toks.size() != 2) {
      error(lineNo, "expected: entry <Class.method>");
      return;
    }
    program.entry = *name;
    sawEntryDecl = true;
    return;
  }
  if (head.text == "class") {
    const std::string* name = atomAt(1);
    if (!name || !punctAt(2, "{") || toks.size() != 3) {
      error(lineNo, "expected: class <name> {");
      return;
    }
    if (program.findClass(*name)) {
      error(lineNo, "duplicate class " + *name);
      return;
    }
    program.classes.push_back(ClassDef{*name, {}, {}});
    curClass = &program.classes.back();
    return;
  }
  error(lineNo, "unexpected token '" + head.text + "' at top level");
}

void Parser::handleInstruction(int lineNo, std::vector<Token>& toks) {
  size_t i = 0;
  // leading labels: IDENT ':'
  while (i + 1 < toks.size() && toks[i].kind == Token::Atom &&
         toks[i + 1].kind == Token::Punct && toks[i + 1].text == ":") {
    const std::string& label = toks[i].text;
    if (curMethod->labels.count(label)) {
      error(lineNo, "duplicate label " + label);
      return;
    }
    curMethod->labels[label] = int(curMethod->code.size());
    i += 2;
  }
  if (i == toks.size()) return;  // label-only line
  if (toks[i].kind != Token::Atom) {
    error(lineNo, "expected opcode, got '" + toks[i].text + "'");
    return;
  }
  const std::string& word = toks[i].text;

  if (word == "catch") {
    if (toks.size() != i + 4 || toks[i + 1].kind != Token::Atom ||
        toks[i + 2].kind != Token::Atom || toks[i + 3].kind != Token::Atom) {
      error(lineNo, "expected: catch <from> <to> <handler>");
      return;
    }
    ExceptionHandler h;
    h.fromLabel = toks[i + 1].text;
    h.toLabel = toks[i + 2].text;
    h.handlerLabel = toks[i + 3].text;
    h.line = lineNo;
    curMethod->handlers.push_back(std::move(h));
    return;
  }

  auto it = opcodeTable().find(word);
  if (it == opcodeTable().end()) {
    error(lineNo, "unknown opcode " + word);
    return;
  }
  Instruction ins = Instruction::make(it->second);
  ins.line = lineNo;
  size_t argc = toks.size() - i - 1;
  auto arg = [&](size_t k) -> const Token& { return toks[i + 1 + k]; };
  auto wantAtom = [&](size_t k) -> const std::string* {
    if (k < argc && arg(k).kind == Token::Atom) return &arg(k).text;
    return nullptr;
  };

  switch (ins.op) {
    case Opcode::Const: {
      if (argc != 1) {
        error(lineNo, "CONST takes one operand");
        return;
      }
      const Token& t = arg(0);
      if (t.kind == Token::Str) {
        ins.constant = Value::ofString(t.text);
      } else if (t.text == "null") {
        ins.constant = Value::null();
      } else if (t.text == "true") {
        ins.constant = Value::ofInt(1);
      } else if (t.text == "false") {
        ins.constant = Value::ofInt(0);
      } else if (looksNumeric(t.text)) {
        if (t.text.find_first_of(".eE") != std::string::npos) {
          try {
            ins.constant = Value::ofDouble(std::stod(t.text));
          } catch (...) {
            error(lineNo, "bad float literal " + t.text);
            return;
          }
        } else {
          try {
            ins.constant = Value::ofInt(std::stoll(t.text));
          } catch (...) {
            error(lineNo, "bad int literal " + t.text);
            return;
          }
        }
      } else {
        error(lineNo, "bad constant " + t.text);
        return;
      }
      break;
    }
    case Opcode::Load:
    case Opcode::Store: {
      const std::string* s = wantAtom(0);
      if (!s || argc != 1 || !looksNumeric(*s)) {
        error(lineNo, std::string(opcodeName(ins.op)) + " takes a slot index");
        return;
      }
      ins.slot = std::stoi(*s);
      if (ins.slot < 0 || ins.slot >= curMethod->localCount) {
        error(lineNo, "slot out of range");
        return;
      }
      break;
    }
    case Opcode::Goto:
    case Opcode::IfTrue: {
      const std::string* s = wantAtom(0);
      if (!s || argc != 1) {
        error(lineNo, std::string(opcodeName(ins.op)) + " takes a label");
        return;
      }
      ins.label = *s;
      break;
    }
    case Opcode::Invoke: {
      const std::string* callee = wantAtom(0);
      const std::string* n = wantAtom(1);
      if (!callee || !n || argc != 2 || !looksNumeric(*n)) {
        error(lineNo, "expected: INVOKE <Class.method> <argc>");
        return;
      }
      ins.name = *callee;
      ins.arity = std::stoi(*n);
      break;
    }
    case Opcode::Intrinsic: {
      const std::string* name = wantAtom(0);
      const std::string* n = wantAtom(1);
      if (!name || !n || argc != 2 || !looksNumeric(*n)) {
        error(lineNo, "expected: INTRINSIC <name> <argc>");
        return;
      }
      ins.name = *name;
      ins.arity = std::stoi(*n);
      break;
    }
    case Opcode::New:
    case Opcode::GetField:
    case Opcode::PutField:
    case Opcode::GetOption: {
      const std::string* name = wantAtom(0);
      if (!name || argc != 1) {
        error(lineNo, std::string(opcodeName(ins.op)) + " takes a name");
        return;
      }
      ins.name = *name;
      break;
    }
    default:
      if (argc != 0) {
        error(lineNo, std::string(opcodeName(ins.op)) + " takes no operands");
        return;
      }
  }
  if (ins.op == Opcode::ReturnVal) curMethod->returnsValue = true;
  curMethod->code.push_back(std::move(ins));
}

// ---- validation ----

struct Validator {
  const Program& p;
  std::vector<ParseError>& errors;

  void error(int line, std::string msg) {
    errors.push_back({line, std::move(msg)});
  }

  void validateMethod(const MethodDef& m) {
    bool sawReturn = false, sawReturnVal = false;
    for (const auto& ins : m.code) {
      if (ins.op == Opcode::Return) sawReturn = true;
      if (ins.op == Opcode::ReturnVal) sawReturnVal = true;
    }
    if (sawReturn && sawReturnVal)
      error(m.code.empty() ? 0 : m.code[0].line,
            m.qualified() + ": mixes RETURN and RETURNVAL");

    for (const auto& ins : m.code) {
      switch (ins.op) {
        case Opcode::Goto:
        case Opcode::IfTrue: {
          auto it = m.labels.find(ins.label);
          if (it == m.labels.end())
            error(ins.line, "jump to undefined label " + ins.label);
          else if (it->second >= int(m.code.size()))
            error(ins.line, "jump target " + ins.label + " is past the end");
          break;
        }
        case Opcode::Invoke: {
          const MethodDef* callee = p.findMethod(ins.name);
          if (!callee)
            error(ins.line, "call to unknown method " + ins.name);
          else if (callee->paramCount != ins.arity)
            error(ins.line, "arity mismatch calling " + ins.name + ": got " +
                                std::to_string(ins.arity) + ", declared " +
                                std::to_string(callee->paramCount));
          break;
        }
        case Opcode::GetOption: {
          if (std::find(p.options.begin(), p.options.end(), ins.name) ==
              p.options.end())
            error(ins.line, "unknown option " + ins.name);
          break;
        }
        case Opcode::New: {
          if (!p.findClass(ins.name))
            error(ins.line, "unknown class " + ins.name);
          break;
        }
        case Opcode::GetField:
        case Opcode::PutField: {
          bool found = false;
          for (const auto& c : p.classes)
            if (std::find(c.fields.begin(), c.fields.end(), ins.name) !=
                c.fields.end())
              found = true;
          if (!found) error(ins.line, "unknown field " + ins.name);
          break;
        }
        case Opcode::Intrinsic:
          if (ins.arity < 0) error(ins.line, "negative intrinsic arity");
          break;
        default:
          break;
      }
    }

    for (const auto& h : m.handlers) {
      auto from = m.labels.find(h.fromLabel);
      auto to = m.labels.find(h.toLabel);
      auto target = m.labels.find(h.handlerLabel);
      if (from == m.labels.end() || to == m.labels.end() ||
          target == m.labels.end()) {
        error(h.line, "catch references undefined label");
        continue;
      }
      if (from->second >= to->second)
        error(h.line, "empty catch range");
      if (target->second >= int(m.code.size()))
        error(h.line, "handler label is past the end");
    }

    // Handler entries must not be reachable through normal control flow.
    std::set<int> handlerEntries;
    for (const auto& h : m.handlers) {
      auto it = m.labels.find(h.handlerLabel);
      if (it != m.labels.end() && it->second < int(m.code.size()))
        handlerEntries.insert(it->second);
    }
    for (int idx : handlerEntries) {
      for (const auto& ins : m.code) {
        if ((ins.op == Opcode::Goto || ins.op == Opcode::IfTrue) &&
            ins.target == idx)
          error(ins.line, "handler entry is also a jump target");
      }
      if (idx > 0) {
        const Instruction& prev = m.code[idx - 1];
        bool falls = prev.op != Opcode::Goto && prev.op != Opcode::Return &&
                     prev.op != Opcode::ReturnVal && prev.op != Opcode::Throw;
        if (falls)
          error(prev.line, "control falls through into a handler entry");
      }
    }

    if (!m.code.empty()) {
      const Instruction& last = m.code.back();
      bool falls = last.op != Opcode::Goto && last.op != Opcode::Return &&
                   last.op != Opcode::ReturnVal && last.op != Opcode::Throw;
      if (falls) error(last.line, m.qualified() + ": control falls off the end");
    } else {
      error(0, m.qualified() + ": empty method body");
    }
  }
};

void resolveTargets(MethodDef& m) {
  for (auto& ins : m.code) {
    if (ins.op == Opcode::Goto || ins.op == Opcode::IfTrue) {
      auto it = m.labels.find(ins.label);
      ins.target = it == m.labels.end() ? -1 : it->second;
    }
  }
  for (auto& h : m.handlers) {
    auto f = m.labels.find(h.fromLabel);
    auto t = m.labels.find(h.toLabel);
    auto g = m.labels.find(h.handlerLabel);
    h.from = f == m.labels.end() ? -1 : f->second;
    h.to = t == m.labels.end() ? -1 : t->second;
    h.handler = g == m.labels.end() ? -1 : g->second;
  }
}

}  // namespace

const char* opcodeName(Opcode op) {
  switch (op) {
    case Opcode::Const: return "CONST";
    case Opcode::Load: return "LOAD";
    case Opcode::Store: return "STORE";
    case Opcode::Add: return "ADD";
    case Opcode::Sub: return "SUB";
    case Opcode::Mul: return "MUL";
    case Opcode::Div: return "DIV";
    case Opcode::Rem: return "REM";
    case Opcode::Neg: return "NEG";
    case Opcode::CmpEq: return "CMPEQ";
    case Opcode::CmpLt: return "CMPLT";
    case Opcode::CmpGt: return "CMPGT";
    case Opcode::Concat: return "CONCAT";
    case Opcode::Goto: return "GOTO";
    case Opcode::IfTrue: return "IFTRUE";
    case Opcode::Pop: return "POP";
    case Opcode::Dup: return "DUP";
    case Opcode::Swap: return "SWAP";
    case Opcode::Invoke: return "INVOKE";
    case Opcode::Return: return "RETURN";
    case Opcode::ReturnVal: return "RETURNVAL";
    case Opcode::New: return "NEW";
    case Opcode::GetField: return "GETFIELD";
    case Opcode::PutField: return "PUTFIELD";
    case Opcode::NewArray: return "NEWARRAY";
    case Opcode::ArrLoad: return "ARRLOAD";
    case Opcode::ArrStore: return "ARRSTORE";
    case Opcode::ArrLen: return "ARRLEN";
    case Opcode::GetOption: return "GETOPTION";
    case Opcode::Throw: return "THROW";
    case Opcode::Intrinsic: return "INTRINSIC";
  }
  return "?";
}

const ClassDef* Program::findClass(const std::string& name) const {
  for (const auto& c : classes)
    if (c.name == name) return &c;
  return nullptr;
}

const MethodDef* Program::findMethod(const std::string& qualified) const {
  for (const auto& c : classes)
    for (const auto& m : c.methods)
      if (m.qualified() == qualified) return &m;
  return nullptr;
}

MethodDef* Program::findMethod(const std::string& qualified) {
  for (auto& c : classes)
    for (auto& m : c.methods)
      if (m.qualified() == qualified) return &m;
  return nullptr;
}

std::vector<const MethodDef*> Program::allMethods() const {
  std::vector<const MethodDef*> out;
  for (const auto& c : classes)
    for (const auto& m : c.methods) out.push_back(&m);
  return out;
}

std::string ParseResult::errorText() const {
  std::string out;
  for (const auto& e : errors)
    out += "line " + std::to_string(e.line) + ": " + e.message + "\n";
  return out;
}

ParseResult parseProgram(const std::string& text) {
  Parser parser;
  parser.run(text);
  ParseResult result;
  result.errors = std::move(parser.errors);
  if (!result.errors.empty()) return result;

  Program& p = parser.program;
  for (auto& c : p.classes)
    for (auto& m : c.methods) resolveTargets(m);

  if (!parser.sawEntryDecl) {
    for (const auto& c : p.classes)
      for (const auto& m : c.methods)
        if (m.name == "main") {
          if (!p.entry.empty()) {
            result.errors.push_back({0, "multiple main methods; add an entry declaration"});
            return result;
          }
          p.entry = m.qualified();
        }
  }
  if (p.entry.empty()) {
    result.errors.push_back({0, "no entry method (declare one or define main)"});
    return result;
  }
  const MethodDef* entry = p.findMethod(p.entry);
  if (!entry) {
    result.errors.push_back({0, "entry method " + p.entry + " not found"});
    return result;
  }
  if (entry->paramCount != 0)
    result.errors.push_back({0, "entry method must take no parameters"});

  Validator v{p, result.errors};
  for (const auto& c : p.classes)
    for (const auto& m : c.methods) v.validateMethod(m);

  // feature-model syntax and option-name check
  try {
    FormulaContext ctx(p.options);
    for (const auto& expr : p.constraints) ctx.parseFormula(expr);
  } catch (const VarexError& e) {
    result.errors.push_back({0, std::string("bad constraint: ") + e.what()});
  }

  if (!result.errors.empty()) return result;

  for (const auto& c : p.classes)
    for (const auto& m : c.methods) {
      StackInfo si = validateStackDiscipline(m, p);
      for (auto& e : si.errors) result.errors.push_back(e);
    }
  if (!result.errors.empty()) return result;

  result.program = std::move(p);
  return result;
}

std::string printProgram(const Program& p) {
  std::ostringstream out;
  for (const auto& o : p.options) out << "option " << o << "\n";
  for (const auto& c : p.constraints) out << "constraint " << c << "\n";
  out << "entry " << p.entry << "\n";
  for (const auto& c : p.classes) {
    out << "\nclass " << c.name << " {\n";
    for (const auto& f : c.fields) out << "  field " << f << "\n";
    for (const auto& m : c.methods) {
      out << "  method " << m.name << "(" << m.paramCount << ") locals "
          << m.localCount << " {\n";
      for (const auto& h : m.handlers)
        out << "    catch " << h.fromLabel << " " << h.toLabel << " "
            << h.handlerLabel << "\n";
      // labels grouped by instruction index (end labels after the loop)
      std::multimap<int, std::string> byIndex;
      for (const auto& [label, idx] : m.labels) byIndex.emplace(idx, label);
      for (size_t i = 0; i <= m.code.size(); ++i) {
        auto [lo, hi] = byIndex.equal_range(int(i));
        for (auto it = lo; it != hi; ++it) out << "  " << it->second << ":\n";
        if (i == m.code.size()) break;
        const Instruction& ins = m.code[i];
        out << "    " << opcodeName(ins.op);
        switch (ins.op) {
          case Opcode::Const: out << " " << renderConst(ins.constant); break;
          case Opcode::Load:
          case Opcode::Store: out << " " << ins.slot; break;
          case Opcode::Goto:
          case Opcode::IfTrue: out << " " << ins.label; break;
          case Opcode::Invoke:
          case Opcode::Intrinsic:
            out << " " << ins.name << " " << ins.arity;
            break;
          case Opcode::New:
          case Opcode::GetField:
          case Opcode::PutField:
          case Opcode::GetOption: out << " " << ins.name; break;
          default: break;
        }
        out << "\n";
      }
      out << "  }\n";
    }
    out << "}\n";
  }
  return out.str();
}

StackInfo validateStackDiscipline(const MethodDef& m, const Program& p) {
  StackInfo info;
  info.depthBefore.assign(m.code.size(), -1);

  auto fail = [&](int line, std::string msg) {
    info.errors.push_back({line, m.qualified() + ": " + std::move(msg)});
  };

  std::deque<int> work;
  auto visit = [&](int idx, int depth, int fromLine) {
    if (idx < 0 || idx >= int(m.code.size())) {
      fail(fromLine, "jump outside method body");
      return;
    }
    if (info.depthBefore[idx] == -1) {
      info.depthBefore[idx] = depth;
      work.push_back(idx);
    } else if (info.depthBefore[idx] != depth) {
      fail(m.code[idx].line,
           "inconsistent stack depth at join: " +
               std::to_string(info.depthBefore[idx]) + " vs " +
               std::to_string(depth));
    }
  };

  if (m.code.empty()) return info;
  visit(0, 0, m.code.empty() ? 0 : m.code[0].line);
  for (const auto& h : m.handlers)
    if (h.handler >= 0 && h.handler < int(m.code.size()))
      visit(h.handler, 1, h.line);

  while (!work.empty() && info.errors.empty()) {
    int i = work.front();
    work.pop_front();
    const Instruction& ins = m.code[i];
    int d = info.depthBefore[i];
    int pops = 0, pushes = 0;
    bool fallsThrough = true;
    switch (ins.op) {
      case Opcode::Const: pushes = 1; break;
      case Opcode::Load: pushes = 1; break;
      case Opcode::Store: pops = 1; break;
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul:
      case Opcode::Div:
      case Opcode::Rem:
      case Opcode::CmpEq:
      case Opcode::CmpLt:
      case Opcode::CmpGt:
      case Opcode::Concat: pops = 2; pushes = 1; break;
      case Opcode::Neg: pops = 1; pushes = 1; break;
      case Opcode::Goto: fallsThrough = false; break;
      case Opcode::IfTrue: pops = 1; break;
      case Opcode::Pop: pops = 1; break;
      case Opcode::Dup: pops = 1; pushes = 2; break;
      case Opcode::Swap: pops = 2; pushes = 2; break;
      case Opcode::Invoke: {
        const MethodDef* callee = p.findMethod(ins.name);
        pops = ins.arity;
        pushes = callee && callee->returnsValue ? 1 : 0;
        break;
      }
      case Opcode::Return:
        fallsThrough = false;
        if (d != 0) fail(ins.line, "RETURN with nonempty stack");
        break;
      case Opcode::ReturnVal:
        fallsThrough = false;
        pops = 1;
        if (d != 1) fail(ins.line, "RETURNVAL requires exactly one stack value");
        break;
      case Opcode::New: pushes = 1; break;
      case Opcode::GetField: pops = 1; pushes = 1; break;
      case Opcode::PutField: pops = 2; break;
      case Opcode::NewArray: pops = 1; pushes = 1; break;
      case Opcode::ArrLoad: pops = 2; pushes = 1; break;
      case Opcode::ArrStore: pops = 3; break;
      case Opcode::ArrLen: pops = 1; pushes = 1; break;
      case Opcode::GetOption: pushes = 1; break;
      case Opcode::Throw: pops = 1; fallsThrough = false; break;
      case Opcode::Intrinsic: pops = ins.arity; pushes = 1; break;
    }
    if (d < pops) {
      fail(ins.line, "operand stack underflow");
      break;
    }
    int after = d - pops + pushes;
    if (ins.op == Opcode::Goto || ins.op == Opcode::IfTrue)
      visit(ins.target, after, ins.line);
    if (fallsThrough) visit(i + 1, after, ins.line);
  }

  if (info.errors.empty()) {
    for (size_t i = 0; i < m.code.size(); ++i)
      if (info.depthBefore[i] == -1)
        fail(m.code[i].line, "unreachable code");
  }
  return info;
}

CFG buildCFG(const MethodDef& m) {
  CFG cfg;
  int n = int(m.code.size());
  std::set<int> leaders;
  leaders.insert(0);
  for (int i = 0; i < n; ++i) {
    const Instruction& ins = m.code[i];
    switch (ins.op) {
      case Opcode::Goto:
      case Opcode::IfTrue:
        leaders.insert(ins.target);
        if (i + 1 < n) leaders.insert(i + 1);
        break;
      case Opcode::Return:
      case Opcode::ReturnVal:
      case Opcode::Throw:
        if (i + 1 < n) leaders.insert(i + 1);
        break;
      default:
        break;
    }
  }
  for (const auto& h : m.handlers) {
    leaders.insert(h.from);
    if (h.to < n) leaders.insert(h.to);
    leaders.insert(h.handler);
  }

  cfg.blockOf.assign(n, -1);
  for (int leader : leaders) {
    if (leader < 0 || leader >= n) continue;
    int end = leader + 1;
    while (end < n && !leaders.count(end)) ++end;
    cfg.blocks.push_back({leader, end, {}});
  }
  std::sort(cfg.blocks.begin(), cfg.blocks.end(),
            [](const BasicBlock& a, const BasicBlock& b) {
              return a.first < b.first;
            });
  for (int b = 0; b < int(cfg.blocks.size()); ++b)
    for (int i = cfg.blocks[b].first; i < cfg.blocks[b].last; ++i)
      cfg.blockOf[i] = b;

  for (int b = 0; b < int(cfg.blocks.size()); ++b) {
    BasicBlock& bb = cfg.blocks[b];
    const Instruction& last = m.code[bb.last - 1];
    switch (last.op) {
      case Opcode::Goto:
        bb.succ.push_back({cfg.blockOf[last.target], EdgeKind::Uncond});
        break;
      case Opcode::IfTrue: {
        int tTrue = cfg.blockOf[last.target];
        int tFalse = bb.last < int(cfg.blockOf.size()) ? cfg.blockOf[bb.last] : -1;
        if (tTrue == tFalse) {
          bb.succ.push_back({tTrue, EdgeKind::Uncond});
        } else {
          bb.succ.push_back({tTrue, EdgeKind::CondTrue});
          if (tFalse >= 0) bb.succ.push_back({tFalse, EdgeKind::CondFalse});
        }
        break;
      }
      case Opcode::Return:
      case Opcode::ReturnVal:
      case Opcode::Throw:
        break;
      default:
        if (bb.last < n)
          bb.succ.push_back({cfg.blockOf[bb.last], EdgeKind::Uncond});
        break;
    }
  }

  for (const auto& h : m.handlers) {
    int hb = cfg.blockOf[h.handler];
    std::set<int> covered;
    for (int i = h.from; i < h.to && i < n; ++i) covered.insert(cfg.blockOf[i]);
    for (int b : covered) {
      bool dup = false;
      for (const auto& e : cfg.blocks[b].succ)
        if (e.to == hb && e.kind == EdgeKind::Exceptional) dup = true;
      if (!dup) cfg.blocks[b].succ.push_back({hb, EdgeKind::Exceptional});
    }
  }
  return cfg;
}

MethodDef normalizeReturns(const MethodDef& m) {
  int returnCount = 0;
  int lastReturn = -1;
  for (int i = 0; i < int(m.code.size()); ++i) {
    if (m.code[i].op == Opcode::Return || m.code[i].op == Opcode::ReturnVal) {
      ++returnCount;
      lastReturn = i;
    }
  }
  if (returnCount == 1 && lastReturn == int(m.code.size()) - 1) return m;

  MethodDef out;
  out.className = m.className;
  out.name = m.name;
  out.paramCount = m.paramCount;
  out.returnsValue = m.returnsValue;
  out.localCount = m.localCount + (m.returnsValue ? 1 : 0);
  int resultSlot = m.localCount;

  std::string retLabel = "$ret";
  while (m.labels.count(retLabel)) retLabel += "_";

  std::vector<int> newIndex(m.code.size() + 1, -1);
  for (size_t i = 0; i < m.code.size(); ++i) {
    newIndex[i] = int(out.code.size());
    const Instruction& ins = m.code[i];
    if (ins.op == Opcode::ReturnVal) {
      Instruction st = Instruction::make(Opcode::Store);
      st.slot = resultSlot;
      st.line = ins.line;
      out.code.push_back(st);
      Instruction go = Instruction::make(Opcode::Goto);
      go.label = retLabel;
      go.line = ins.line;
      out.code.push_back(go);
    } else if (ins.op == Opcode::Return) {
      Instruction go = Instruction::make(Opcode::Goto);
      go.label = retLabel;
      go.line = ins.line;
      out.code.push_back(go);
    } else {
      out.code.push_back(ins);
    }
  }
  newIndex[m.code.size()] = int(out.code.size());

  for (const auto& [label, idx] : m.labels) out.labels[label] = newIndex[idx];
  out.labels[retLabel] = int(out.code.size());
  if (m.returnsValue) {
    Instruction ld = Instruction::make(Opcode::Load);
    ld.slot = resultSlot;
    out.code.push_back(ld);
    out.code.push_back(Instruction::make(Opcode::ReturnVal));
  } else {
    out.code.push_back(Instruction::make(Opcode::Return));
  }

  out.handlers = m.handlers;
  resolveTargets(out);
  return out;
}

}  // namespace varex
