#include "hpsec/rational.hpp"

#include <algorithm>
#include <cctype>

namespace hpsec {

std::optional<Rational> parse_decimal(const std::string& text) {
  size_t i = 0;
  std::string digits;
  long frac = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) digits += text[i++];
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      digits += text[i++];
      ++frac;
    }
  }
  if (digits.empty()) return std::nullopt;
  long exp = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool neg = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) neg = text[i++] == '-';
    std::string e;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) e += text[i++];
    if (e.empty() || e.size() > 4) return std::nullopt;
    exp = std::stol(e);
    if (neg) exp = -exp;
  }
  if (i != text.size()) return std::nullopt;
  // A leading zero would make the string constructor read octal.
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
  BigInt num(digits);
  long shift = exp - frac;
  BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(shift < 0 ? -shift : shift));
  if (shift >= 0) return Rational(num * scale);
  return Rational(num, scale);
}

bool is_decimal(const Rational& r) {
  BigInt d = boost::multiprecision::denominator(r);
  while (d % 2 == 0) d /= 2;
  while (d % 5 == 0) d /= 5;
  return d == 1;
}

std::string rational_to_string(const Rational& r) {
  BigInt n = boost::multiprecision::numerator(r);
  BigInt d = boost::multiprecision::denominator(r);
  if (d == 1) return n.str();
  if (!is_decimal(r)) return n.str() + "/" + d.str();
  bool neg = n < 0;
  if (neg) n = -n;
  unsigned places = 0;
  while (d != 1) {
    // Multiply by 10 until the denominator divides out.
    n *= 10;
    ++places;
    BigInt g = boost::multiprecision::gcd(n, d);
    n /= g;
    d /= g;
  }
  std::string s = n.str();
  if (s.size() <= places) s.insert(0, places - s.size() + 1, '0');
  s.insert(s.size() - places, ".");
  return neg ? "-" + s : s;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace hpsec
