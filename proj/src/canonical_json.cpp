#include "bganlab/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "bganlab/error.hpp"

namespace bganlab {

std::string format_double9(double value) {
  if (!std::isfinite(value)) throw ParamError("cannot serialize non-finite float");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

double round9(double value) { return std::strtod(format_double9(value).c_str(), nullptr); }

namespace {

void write_string(std::string& out, const std::string& s) {
  // nlohmann's dump escapes a bare string correctly.
  out += Json(s).dump();
}

template <typename J>
void write(std::string& out, const J& v) {
  switch (v.type()) {
    case nlohmann::detail::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        write_string(out, it.key());
        out += ':';
        write(out, it.value());
      }
      out += '}';
      break;
    }
    case nlohmann::detail::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& e : v) {
        if (!first) out += ',';
        first = false;
        write(out, e);
      }
      out += ']';
      break;
    }
    case nlohmann::detail::value_t::number_float:
      out += format_double9(v.template get<double>());
      break;
    default:
      out += v.dump();
      break;
  }
}

}  // namespace

std::string dump_canonical(const Json& value) {
  std::string out;
  write(out, value);
  return out;
}

std::string dump_canonical(const OrderedJson& value) {
  std::string out;
  write(out, value);
  return out;
}

}  // namespace bganlab
