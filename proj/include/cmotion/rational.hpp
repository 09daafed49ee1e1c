#ifndef CMOTION_RATIONAL_HPP
#define CMOTION_RATIONAL_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "cmotion/errors.hpp"

namespace cmotion {

/// Exact rational number on 64-bit components, always stored reduced with a
/// positive denominator. Arithmetic is checked through 128-bit intermediates
/// and throws Overflow instead of wrapping.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(long long value) : num_(value), den_(1) {} // NOLINT: implicit by design
    Rational(long long num, long long den) : num_(num), den_(den) { reduce(); }

    long long num() const { return num_; }
    long long den() const { return den_; }

    bool is_zero() const { return num_ == 0; }
    bool is_one() const { return num_ == 1 && den_ == 1; }
    bool is_integer() const { return den_ == 1; }

    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return Rational::from_i128(i128(a.num_) * b.den_ + i128(b.num_) * a.den_,
                                   i128(a.den_) * b.den_);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return Rational::from_i128(i128(a.num_) * b.den_ - i128(b.num_) * a.den_,
                                   i128(a.den_) * b.den_);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return Rational::from_i128(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw DomainError("rational division by zero");
        return Rational::from_i128(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
    }
    Rational operator-() const { return Rational(-num_, den_); }

    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }
    Rational& operator/=(const Rational& o) { return *this = *this / o; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
    }
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

    /// Integer power; negative exponents invert (zero base throws).
    Rational pow(long long e) const {
        Rational base = *this;
        if (e < 0) {
            if (num_ == 0) throw DomainError("zero raised to a negative power");
            base = Rational(den_, num_);
            e = -e;
        }
        Rational out(1);
        while (e > 0) {
            if (e & 1) out *= base;
            base = (e > 1) ? base * base : base;
            e >>= 1;
        }
        return out;
    }

    /// Exact square root if one exists (nonnegative perfect-square ratio).
    bool exact_sqrt(Rational& out) const {
        if (num_ < 0) return false;
        long long rn = isqrt(num_), rd = isqrt(den_);
        if (rn < 0 || rd < 0) return false;
        out = Rational(rn, rd);
        return true;
    }

    std::string to_string() const {
        std::string s = std::to_string(num_);
        if (den_ != 1) s += "/" + std::to_string(den_);
        return s;
    }

private:
    using i128 = __int128;

    static Rational from_i128(i128 num, i128 den) {
        if (den == 0) throw DomainError("rational with zero denominator");
        if (den < 0) { num = -num; den = -den; }
        i128 g = gcd128(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
        if (num > INT64_MAX || num < INT64_MIN || den > INT64_MAX)
            throw Overflow("rational components exceed 64 bits");
        Rational r;
        r.num_ = static_cast<long long>(num);
        r.den_ = static_cast<long long>(den);
        return r;
    }

    static i128 gcd128(i128 a, i128 b) {
        while (b != 0) { i128 t = a % b; a = b; b = t; }
        return a < 0 ? -a : a;
    }

    static long long isqrt(long long v) {
        if (v < 0) return -1;
        auto r = static_cast<long long>(std::sqrt(static_cast<double>(v)));
        while (r > 0 && r * r > v) --r;
        while ((r + 1) * (r + 1) <= v) ++r;
        return r * r == v ? r : -1;
    }

    void reduce() {
        if (den_ == 0) throw DomainError("rational with zero denominator");
        if (den_ < 0) {
            if (num_ == INT64_MIN || den_ == INT64_MIN)
                throw Overflow("rational components exceed 64 bits");
            num_ = -num_;
            den_ = -den_;
        }
        long long g = std::gcd(num_, den_);
        if (g > 1) { num_ /= g; den_ /= g; }
    }

    long long num_;
    long long den_;
};

} // namespace cmotion

#endif
