#include "mplab/rational.hpp"

#include <charconv>
#include <cstdlib>
#include <numeric>

#include "mplab/errors.hpp"

namespace mplab {

namespace {

std::int64_t checked(__int128 v) {
    if (v > INT64_MAX || v < INT64_MIN) {
        throw std::overflow_error("rational overflow");
    }
    return static_cast<std::int64_t>(v);
}

Rational make(__int128 num, __int128 den) {
    if (den == 0) {
        throw ContractViolation("rational with zero denominator");
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    __int128 a = num < 0 ? -num : num;
    __int128 b = den;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    return Rational(checked(num), checked(den));
}

std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("not an integer: '" + std::string(s) + "'");
    }
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) {
        throw ContractViolation("rational with zero denominator");
    }
    std::int64_t g = std::gcd(num, den);
    if (g == 0) g = 1;
    num /= g;
    den /= g;
    if (den < 0) {
        num = -num;
        den = -den;
    }
    num_ = num;
    den_ = den;
}

Rational operator+(const Rational& a, const Rational& b) {
    return make(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
    return make(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
    return make(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    return lhs <=> rhs;
}

std::string Rational::str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational parse_rational(std::string_view text) {
    std::string_view s = trim(text);
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        Rational num = parse_rational(s.substr(0, slash));
        Rational den = parse_rational(s.substr(slash + 1));
        if (den == Rational(0)) {
            throw ConfigError("zero denominator in '" + std::string(text) + "'");
        }
        return num / den;
    }
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    auto dot = s.find('.');
    if (dot == std::string_view::npos) {
        std::int64_t v = parse_int(s);
        return Rational(negative ? -v : v);
    }
    std::string_view whole = s.substr(0, dot);
    std::string_view frac = s.substr(dot + 1);
    if ((whole.empty() && frac.empty()) || frac.size() > 18) {
        throw ConfigError("not a number: '" + std::string(text) + "'");
    }
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    Rational w(whole.empty() ? 0 : parse_int(whole));
    Rational f(frac.empty() ? 0 : parse_int(frac), scale);
    Rational r = w + f;
    return negative ? -r : r;
}

double parse_real(std::string_view text) {
    std::string_view s = trim(text);
    if (s.find('/') != std::string_view::npos) {
        return parse_rational(s).to_double();
    }
    std::string tmp(s);
    if (tmp.empty() || tmp.find_first_not_of("0123456789+-.eE") != std::string::npos) {
        throw ConfigError("not a number: '" + tmp + "'");
    }
    char* end = nullptr;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) {
        throw ConfigError("not a number: '" + tmp + "'");
    }
    return v;
}

}  // namespace mplab
