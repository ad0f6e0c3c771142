#pragma once

#include <optional>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace hpsec {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Parses a decimal literal such as "12", "0.25" or "1.5e-3" exactly.
std::optional<Rational> parse_decimal(const std::string& text);

// Shortest exact decimal when the denominator is 2^a*5^b, otherwise "n/d".
std::string rational_to_string(const Rational& r);

bool is_decimal(const Rational& r);

double to_double(const Rational& r);

}  // namespace hpsec
