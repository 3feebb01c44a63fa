#pragma once

// Typed field access on parsed JSON that reports failures as SchemaError with
// the JSON path of the offending field.

#include <initializer_list>
#include <string>
#include <utility>

#include "bganlab/canonical_json.hpp"
#include "bganlab/error.hpp"

namespace bganlab {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_, "expected object");
  }
  double num(const char* key) const { return as_num(at(key), sub(key)); }
  double num_or(const char* key, double dflt) const { return j_.contains(key) ? num(key) : dflt; }
  std::size_t index(const char* key) const { return as_index(at(key), sub(key)); }
  std::string str(const char* key) const {
    const Json& v = at(key);
    if (!v.is_string()) throw SchemaError(sub(key), "expected string");
    return v.get<std::string>();
  }
  std::string str_or(const char* key, std::string dflt) const { return j_.contains(key) ? str(key) : dflt; }
  bool boolean(const char* key) const {
    const Json& v = at(key);
    if (!v.is_boolean()) throw SchemaError(sub(key), "expected boolean");
    return v.get<bool>();
  }
  const Json& array(const char* key) const {
    const Json& v = at(key);
    if (!v.is_array()) throw SchemaError(sub(key), "expected array");
    return v;
  }
  const Json& at(const char* key) const {
    if (!j_.contains(key)) throw SchemaError(sub(key), "missing required field");
    return j_.at(key);
  }
  bool has(const char* key) const { return j_.contains(key); }
  std::string sub(const char* key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) throw SchemaError(path_ + "." + it.key(), "unknown field");
    }
  }

  static double as_num(const Json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected number");
    return v.get<double>();
  }
  static std::size_t as_index(const Json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw SchemaError(path, "expected non-negative integer");
    return v.get<std::size_t>();
  }
  static std::string item(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

 private:
  const Json& j_;
  std::string path_;
};

template <typename E>
E parse_enum(const std::string& s, const std::string& path, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, value] : options)
    if (s == name) return value;
  throw SchemaError(path, "unknown value '" + s + "'");
}

}  // namespace bganlab
