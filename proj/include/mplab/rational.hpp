#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace mplab {

// Exact fraction with a positive denominator, always in lowest terms.
// Used for 8/255-style attack radii so schedule arithmetic has no float drift.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    Rational operator-() const { return Rational(-num_, den_); }

    friend bool operator==(const Rational& a, const Rational& b) = default;
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

    std::string str() const;

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

// Accepts "n/d", integers and plain decimals ("0.001" -> 1/1000).
// Throws ConfigError on anything else.
Rational parse_rational(std::string_view text);

// Fractions are reduced exactly before conversion; decimals and scientific
// notation are read with correct rounding.
double parse_real(std::string_view text);

}  // namespace mplab
