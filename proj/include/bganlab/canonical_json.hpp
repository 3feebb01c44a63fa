#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace bganlab {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Formats a finite double with 9 significant digits ("%.9g"). Throws
/// ParamError on NaN/inf, which JSON cannot carry.
std::string format_double9(double value);

/// Rounds a double to the value its 9-significant-digit decimal parses back to.
double round9(double value);

/// Compact JSON with floats at 9 significant digits. Key order is whatever the
/// object type iterates in: sorted for Json, insertion order for OrderedJson.
std::string dump_canonical(const Json& value);
std::string dump_canonical(const OrderedJson& value);

}  // namespace bganlab
