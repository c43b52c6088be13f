#include "varex/value.hpp"

#include <charconv>

namespace varex {

std::string Value::toDisplayString() const {
  if (isNull()) return "null";
  if (isInt()) return std::to_string(asInt());
  if (isDouble()) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), asDouble());
    (void)ec;
    return std::string(buf, p);
  }
  if (isString()) return asString();
  if (isObject()) return "<obj " + asObject()->className + ">";
  if (isArray()) return "<arr " + std::to_string(asArray()->cells.size()) + ">";
  return "<" + asBox()->describe() + ">";
}

}  // namespace varex
