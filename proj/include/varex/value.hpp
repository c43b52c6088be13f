#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace varex {

class Value;

/// Heap object: named class instance with a field map.
struct ObjectData {
  std::string className;
  std::map<std::string, Value> fields;
};

/// Heap array: fixed-length cell vector.
struct ArrayData {
  std::vector<Value> cells;
};

/// Extension point for runtime-defined values (formulas, conditional values,
/// model-class state). The interpreter moves these around without looking
/// inside.
class BoxedValue {
 public:
  virtual ~BoxedValue() = default;
  virtual std::string describe() const = 0;
};

/// A runtime value of the IR: null, int, double, string, object reference,
/// array reference, or an opaque box. One stack slot each.
class Value {
 public:
  using Obj = std::shared_ptr<ObjectData>;
  using Arr = std::shared_ptr<ArrayData>;
  using Box = std::shared_ptr<BoxedValue>;

  Value() : v_(std::monostate{}) {}
  static Value null() { return Value(); }
  static Value ofInt(int64_t i) { return Value(i); }
  static Value ofDouble(double d) { return Value(d); }
  static Value ofString(std::string s) { return Value(std::move(s)); }
  static Value ofObject(Obj o) { return Value(std::move(o)); }
  static Value ofArray(Arr a) { return Value(std::move(a)); }
  static Value ofBox(Box b) { return Value(std::move(b)); }

  bool isNull() const { return std::holds_alternative<std::monostate>(v_); }
  bool isInt() const { return std::holds_alternative<int64_t>(v_); }
  bool isDouble() const { return std::holds_alternative<double>(v_); }
  bool isNumber() const { return isInt() || isDouble(); }
  bool isString() const { return std::holds_alternative<std::string>(v_); }
  bool isObject() const { return std::holds_alternative<Obj>(v_); }
  bool isArray() const { return std::holds_alternative<Arr>(v_); }
  bool isBox() const { return std::holds_alternative<Box>(v_); }

  int64_t asInt() const { return std::get<int64_t>(v_); }
  double asDouble() const { return std::get<double>(v_); }
  double asNumber() const { return isInt() ? double(asInt()) : asDouble(); }
  const std::string& asString() const { return std::get<std::string>(v_); }
  const Obj& asObject() const { return std::get<Obj>(v_); }
  const Arr& asArray() const { return std::get<Arr>(v_); }
  const Box& asBox() const { return std::get<Box>(v_); }

  /// Structural equality: primitives and strings by value, objects, arrays
  /// and boxes by identity.
  friend bool operator==(const Value& a, const Value& b) {
    if (a.v_.index() != b.v_.index()) return false;
    return a.v_ == b.v_;
  }
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

  /// Rendering used by CONCAT, print and debug dumps.
  std::string toDisplayString() const;

 private:
  template <typename T>
  explicit Value(T&& t) : v_(std::forward<T>(t)) {}

  std::variant<std::monostate, int64_t, double, std::string, Obj, Arr, Box> v_;
};

}  // namespace varex
