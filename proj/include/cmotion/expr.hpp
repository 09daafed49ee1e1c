#ifndef CMOTION_EXPR_HPP
#define CMOTION_EXPR_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cmotion/errors.hpp"
#include "cmotion/rational.hpp"

namespace cmotion {

enum class Kind : std::uint8_t { Constant, Variable, Sum, Product, Power, Negate, Call };

/// Numeric assignment for evaluation. Ordered so iteration is deterministic.
using Binding = std::map<std::string, double>;

inline bool is_function_name(const std::string& s) {
    return s == "sin" || s == "cos" || s == "exp" || s == "log" || s == "sqrt";
}

inline bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

/// Immutable expression tree with value semantics. Construction is cheap and
/// unnormalized; call normalize() (or any operation that normalizes its
/// result) to reach the canonical form.
class Expr {
public:
    Expr() : node_(zero_node()) {}

    static Expr constant(const Rational& v) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Constant;
        n->value = v;
        return Expr(std::move(n));
    }
    static Expr constant(long long v) { return constant(Rational(v)); }

    static Expr variable(const std::string& name) {
        if (!is_identifier(name) || is_function_name(name))
            throw UnknownSymbol(name);
        auto n = std::make_shared<Node>();
        n->kind = Kind::Variable;
        n->name = name;
        return Expr(std::move(n));
    }

    static Expr sum(std::vector<Expr> kids) {
        if (kids.empty()) return constant(0);
        if (kids.size() == 1) return kids.front();
        auto n = std::make_shared<Node>();
        n->kind = Kind::Sum;
        n->kids = std::move(kids);
        return Expr(std::move(n));
    }

    static Expr product(std::vector<Expr> kids) {
        if (kids.empty()) return constant(1);
        if (kids.size() == 1) return kids.front();
        auto n = std::make_shared<Node>();
        n->kind = Kind::Product;
        n->kids = std::move(kids);
        return Expr(std::move(n));
    }

    static Expr pow(Expr base, long long exponent) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Power;
        n->kids.push_back(std::move(base));
        n->exponent = exponent;
        return Expr(std::move(n));
    }

    static Expr neg(Expr inner) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Negate;
        n->kids.push_back(std::move(inner));
        return Expr(std::move(n));
    }

    static Expr call(const std::string& fn, Expr arg) {
        if (!is_function_name(fn)) throw UnknownSymbol(fn);
        auto n = std::make_shared<Node>();
        n->kind = Kind::Call;
        n->name = fn;
        n->kids.push_back(std::move(arg));
        return Expr(std::move(n));
    }

    Kind kind() const { return node_->kind; }
    const Rational& value() const { return node_->value; }
    const std::string& name() const { return node_->name; }
    long long exponent() const { return node_->exponent; }
    const std::vector<Expr>& children() const { return node_->kids; }
    const Expr& child(std::size_t i = 0) const { return node_->kids[i]; }

    bool is_constant() const { return node_->kind == Kind::Constant; }
    bool is_constant(const Rational& v) const { return is_constant() && node_->value == v; }

private:
    struct Node {
        Kind kind = Kind::Constant;
        Rational value;
        std::string name;
        long long exponent = 0;
        std::vector<Expr> kids;
    };

    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    static const std::shared_ptr<const Node>& zero_node() {
        static const std::shared_ptr<const Node> z = std::make_shared<Node>();
        return z;
    }

    std::shared_ptr<const Node> node_;
};

inline Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
inline Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, Expr::neg(b)}); }
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
inline Expr operator/(const Expr& a, const Expr& b) {
    return Expr::product({a, Expr::pow(b, -1)});
}
inline Expr operator-(const Expr& a) { return Expr::neg(a); }

/// Structural total order on trees as given (no normalization).
inline int compare(const Expr& a, const Expr& b) {
    auto rank = [](Kind k) {
        switch (k) {
            case Kind::Constant: return 0;
            case Kind::Variable: return 1;
            case Kind::Call: return 2;
            case Kind::Power: return 3;
            case Kind::Product: return 4;
            case Kind::Sum: return 5;
            case Kind::Negate: return 6;
        }
        return 7;
    };
    if (rank(a.kind()) != rank(b.kind())) return rank(a.kind()) < rank(b.kind()) ? -1 : 1;
    switch (a.kind()) {
        case Kind::Constant: {
            if (a.value() == b.value()) return 0;
            return a.value() < b.value() ? -1 : 1;
        }
        case Kind::Variable:
            return a.name().compare(b.name()) < 0 ? -1 : (a.name() == b.name() ? 0 : 1);
        case Kind::Call: {
            int c = a.name().compare(b.name());
            if (c != 0) return c < 0 ? -1 : 1;
            return compare(a.child(), b.child());
        }
        case Kind::Power: {
            int c = compare(a.child(), b.child());
            if (c != 0) return c;
            if (a.exponent() != b.exponent()) return a.exponent() < b.exponent() ? -1 : 1;
            return 0;
        }
        case Kind::Negate:
            return compare(a.child(), b.child());
        case Kind::Sum:
        case Kind::Product: {
            std::size_t m = std::min(a.children().size(), b.children().size());
            for (std::size_t i = 0; i < m; ++i) {
                int c = compare(a.children()[i], b.children()[i]);
                if (c != 0) return c;
            }
            if (a.children().size() != b.children().size())
                return a.children().size() < b.children().size() ? -1 : 1;
            return 0;
        }
    }
    return 0;
}

namespace detail {

// Normal form scaffolding: an expression is flattened into a sum of terms,
// each an exact rational coefficient times a sorted list of (base, exponent)
// factors. Bases are canonical variables, calls, or atomic multi-term sums
// (which only arise as denominators).

struct Factor {
    Expr base;
    long long exp;
};

struct Term {
    Rational coeff;
    std::vector<Factor> factors;
};

struct Poly {
    std::vector<Term> terms;
};

inline long long term_grade(const Term& t) {
    long long g = 0;
    for (const auto& f : t.factors) g += f.exp;
    return g;
}

// Key comparison ignoring the coefficient: grade first (descending), then
// factor-wise base order with larger exponents first, constants last.
inline int compare_term_key(const Term& a, const Term& b) {
    long long ga = term_grade(a), gb = term_grade(b);
    if (ga != gb) return ga > gb ? -1 : 1;
    std::size_t m = std::min(a.factors.size(), b.factors.size());
    for (std::size_t i = 0; i < m; ++i) {
        int c = compare(a.factors[i].base, b.factors[i].base);
        if (c != 0) return c;
        if (a.factors[i].exp != b.factors[i].exp)
            return a.factors[i].exp > b.factors[i].exp ? -1 : 1;
    }
    if (a.factors.size() != b.factors.size())
        return a.factors.size() > b.factors.size() ? -1 : 1;
    return 0;
}

inline void sort_and_merge(Poly& p) {
    std::sort(p.terms.begin(), p.terms.end(),
              [](const Term& a, const Term& b) { return compare_term_key(a, b) < 0; });
    std::vector<Term> out;
    for (auto& t : p.terms) {
        if (!out.empty() && compare_term_key(out.back(), t) == 0)
            out.back().coeff += t.coeff;
        else
            out.push_back(std::move(t));
        if (!out.empty() && out.back().coeff.is_zero()) out.pop_back();
    }
    p.terms = std::move(out);
}

inline Poly add(Poly a, const Poly& b) {
    a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
    sort_and_merge(a);
    return a;
}

inline Term mul_terms(const Term& a, const Term& b) {
    Term out;
    out.coeff = a.coeff * b.coeff;
    out.factors.reserve(a.factors.size() + b.factors.size());
    std::size_t i = 0, j = 0;
    while (i < a.factors.size() && j < b.factors.size()) {
        int c = compare(a.factors[i].base, b.factors[j].base);
        if (c < 0) {
            out.factors.push_back(a.factors[i++]);
        } else if (c > 0) {
            out.factors.push_back(b.factors[j++]);
        } else {
            long long e = a.factors[i].exp + b.factors[j].exp;
            if (e != 0) out.factors.push_back({a.factors[i].base, e});
            ++i;
            ++j;
        }
    }
    while (i < a.factors.size()) out.factors.push_back(a.factors[i++]);
    while (j < b.factors.size()) out.factors.push_back(b.factors[j++]);
    return out;
}

inline Poly mul(const Poly& a, const Poly& b) {
    Poly out;
    out.terms.reserve(a.terms.size() * b.terms.size());
    for (const auto& ta : a.terms)
        for (const auto& tb : b.terms) out.terms.push_back(mul_terms(ta, tb));
    sort_and_merge(out);
    return out;
}

Expr render(const Poly& p);
Poly from_expr(const Expr& e);

inline Poly one_poly() {
    Poly p;
    p.terms.push_back({Rational(1), {}});
    return p;
}

// Pull the rational content (and a positive leading sign) out of a multi-term
// sum so that equal denominators normalize to the same atomic base.
inline Rational extract_content(Poly& p) {
    long long g = 0, l = 1;
    for (const auto& t : p.terms) {
        g = std::gcd(g, t.coeff.num());
        l = std::lcm(l, t.coeff.den());
    }
    Rational content(g == 0 ? 1 : g, l);
    if (p.terms.front().coeff < Rational(0)) content = -content;
    for (auto& t : p.terms) t.coeff /= content;
    return content;
}

inline Poly pow_poly(Poly base, long long k) {
    if (k == 0) return one_poly();
    if (base.terms.empty()) {
        if (k > 0) return base;
        throw DomainError("zero expression raised to a negative power");
    }
    if (base.terms.size() == 1) {
        Term t;
        t.coeff = base.terms.front().coeff.pow(k);
        // Sum bases whose exponent turns positive must re-expand, otherwise
        // 1/(1/(a+b)) would leave (a+b) behind as an atomic factor.
        std::vector<Factor> expand;
        for (const auto& f : base.terms.front().factors) {
            __int128 e = static_cast<__int128>(f.exp) * k;
            if (e > INT64_MAX || e < INT64_MIN) throw Overflow("exponent out of range");
            Factor nf{f.base, static_cast<long long>(e)};
            if (nf.base.kind() == Kind::Sum && nf.exp > 0)
                expand.push_back(nf);
            else
                t.factors.push_back(nf);
        }
        Poly out;
        out.terms.push_back(std::move(t));
        for (const auto& f : expand) out = mul(out, pow_poly(from_expr(f.base), f.exp));
        return out;
    }
    if (k > 0) {
        Poly out = one_poly();
        Poly sq = std::move(base);
        long long e = k;
        while (e > 0) {
            if (e & 1) out = mul(out, sq);
            e >>= 1;
            if (e > 0) sq = mul(sq, sq);
        }
        return out;
    }
    // Negative power of a genuine sum: keep it as an atomic factor.
    Rational content = extract_content(base);
    Term t;
    t.coeff = content.pow(k);
    t.factors.push_back({render(base), k});
    Poly out;
    out.terms.push_back(std::move(t));
    return out;
}

inline Expr fold_call(const std::string& fn, const Expr& arg) {
    if (arg.is_constant()) {
        const Rational& c = arg.value();
        if (fn == "sin" && c.is_zero()) return Expr::constant(0);
        if (fn == "cos" && c.is_zero()) return Expr::constant(1);
        if (fn == "exp" && c.is_zero()) return Expr::constant(1);
        if (fn == "log") {
            if (c <= Rational(0)) throw DomainError("log of a nonpositive constant");
            if (c.is_one()) return Expr::constant(0);
        }
        if (fn == "sqrt") {
            if (c < Rational(0)) throw DomainError("sqrt of a negative constant");
            Rational r;
            if (c.exact_sqrt(r)) return Expr::constant(r);
        }
    }
    return Expr::call(fn, arg);
}

inline Poly from_expr(const Expr& e) {
    switch (e.kind()) {
        case Kind::Constant: {
            Poly p;
            if (!e.value().is_zero()) p.terms.push_back({e.value(), {}});
            return p;
        }
        case Kind::Variable: {
            Poly p;
            p.terms.push_back({Rational(1), {{e, 1}}});
            return p;
        }
        case Kind::Negate: {
            Poly p = from_expr(e.child());
            for (auto& t : p.terms) t.coeff = -t.coeff;
            return p;
        }
        case Kind::Sum: {
            Poly p;
            for (const auto& k : e.children()) p = add(std::move(p), from_expr(k));
            return p;
        }
        case Kind::Product: {
            Poly p = one_poly();
            for (const auto& k : e.children()) p = mul(p, from_expr(k));
            return p;
        }
        case Kind::Power: {
            // Collapse (X^a)^b to X^(a*b) so inverted powers of a sum reach
            // the same atomic base no matter how they were nested. A zero
            // base applies the chain innermost-out so 0^-k still faults.
            std::vector<long long> exps{e.exponent()};
            const Expr* base = &e.child();
            while (base->kind() == Kind::Power) {
                exps.push_back(base->exponent());
                base = &base->child();
            }
            Poly p = from_expr(*base);
            if (p.terms.empty()) {
                for (auto it = exps.rbegin(); it != exps.rend(); ++it)
                    p = pow_poly(std::move(p), *it);
                return p;
            }
            __int128 k = 1;
            for (long long ei : exps) {
                if (ei == 0) return one_poly();
                k *= ei;
                if (k > INT64_MAX || k < INT64_MIN) throw Overflow("exponent out of range");
            }
            return pow_poly(std::move(p), static_cast<long long>(k));
        }
        case Kind::Call: {
            Expr folded = fold_call(e.name(), render(from_expr(e.child())));
            if (folded.kind() != Kind::Call) return from_expr(folded);
            Poly p;
            p.terms.push_back({Rational(1), {{folded, 1}}});
            return p;
        }
    }
    return {};
}

inline Expr render_term(const Term& t) {
    std::vector<Expr> parts;
    if (!t.coeff.is_one() || t.factors.empty()) parts.push_back(Expr::constant(t.coeff));
    for (const auto& f : t.factors)
        parts.push_back(f.exp == 1 ? f.base : Expr::pow(f.base, f.exp));
    return Expr::product(std::move(parts));
}

inline Expr render(const Poly& p) {
    if (p.terms.empty()) return Expr::constant(0);
    std::vector<Expr> parts;
    parts.reserve(p.terms.size());
    for (const auto& t : p.terms) parts.push_back(render_term(t));
    return Expr::sum(std::move(parts));
}

} // namespace detail

/// Canonical normal form: a sum of rational-coefficient monomials over
/// variable, call, and atomic-sum bases, fully expanded, with deterministic
/// term and factor order. Idempotent.
inline Expr normalize(const Expr& e) { return detail::render(detail::from_expr(e)); }

/// Equality is structural equality of the normalized trees.
inline bool operator==(const Expr& a, const Expr& b) {
    return compare(normalize(a), normalize(b)) == 0;
}
inline bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

// ---- differentiation ----

namespace detail {

inline Expr diff_raw(const Expr& e, const std::string& v) {
    switch (e.kind()) {
        case Kind::Constant:
            return Expr::constant(0);
        case Kind::Variable:
            return Expr::constant(e.name() == v ? 1 : 0);
        case Kind::Negate:
            return Expr::neg(diff_raw(e.child(), v));
        case Kind::Sum: {
            std::vector<Expr> kids;
            kids.reserve(e.children().size());
            for (const auto& k : e.children()) kids.push_back(diff_raw(k, v));
            return Expr::sum(std::move(kids));
        }
        case Kind::Product: {
            std::vector<Expr> terms;
            for (std::size_t i = 0; i < e.children().size(); ++i) {
                std::vector<Expr> parts;
                for (std::size_t j = 0; j < e.children().size(); ++j)
                    parts.push_back(j == i ? diff_raw(e.children()[j], v) : e.children()[j]);
                terms.push_back(Expr::product(std::move(parts)));
            }
            return Expr::sum(std::move(terms));
        }
        case Kind::Power: {
            long long k = e.exponent();
            if (k == 0) return Expr::constant(0);
            return Expr::product({Expr::constant(k), Expr::pow(e.child(), k - 1),
                                  diff_raw(e.child(), v)});
        }
        case Kind::Call: {
            const Expr& a = e.child();
            Expr da = diff_raw(a, v);
            if (e.name() == "sin") return Expr::call("cos", a) * da;
            if (e.name() == "cos") return Expr::neg(Expr::call("sin", a)) * da;
            if (e.name() == "exp") return Expr::call("exp", a) * da;
            if (e.name() == "log") return da / a;
            // d sqrt(a) = da / (2 sqrt(a))
            return da / (Expr::constant(2) * Expr::call("sqrt", a));
        }
    }
    return Expr::constant(0);
}

} // namespace detail

/// Partial derivative with respect to a variable name; result is normalized.
inline Expr differentiate(const Expr& e, const std::string& v) {
    if (!is_identifier(v) || is_function_name(v)) throw UnknownSymbol(v);
    return normalize(detail::diff_raw(e, v));
}

// ---- substitution ----

using Substitution = std::map<std::string, Expr>;

namespace detail {

inline Expr subst_raw(const Expr& e, const Substitution& s) {
    switch (e.kind()) {
        case Kind::Constant:
            return e;
        case Kind::Variable: {
            auto it = s.find(e.name());
            return it == s.end() ? e : it->second;
        }
        case Kind::Negate:
            return Expr::neg(subst_raw(e.child(), s));
        case Kind::Power:
            return Expr::pow(subst_raw(e.child(), s), e.exponent());
        case Kind::Call:
            return Expr::call(e.name(), subst_raw(e.child(), s));
        case Kind::Sum:
        case Kind::Product: {
            std::vector<Expr> kids;
            kids.reserve(e.children().size());
            for (const auto& k : e.children()) kids.push_back(subst_raw(k, s));
            return e.kind() == Kind::Sum ? Expr::sum(std::move(kids))
                                         : Expr::product(std::move(kids));
        }
    }
    return e;
}

} // namespace detail

/// Simultaneous substitution of variables by expressions; replacements are
/// not re-substituted. Result is normalized.
inline Expr substitute(const Expr& e, const Substitution& s) {
    return normalize(detail::subst_raw(e, s));
}

// ---- evaluation ----

namespace detail {

inline double pow_ll(double base, long long k, bool& domain_ok) {
    if (k < 0) {
        if (base == 0.0) {
            domain_ok = false;
            return 0.0;
        }
        return 1.0 / pow_ll(base, -k, domain_ok);
    }
    double out = 1.0, sq = base;
    while (k > 0) {
        if (k & 1) out *= sq;
        k >>= 1;
        if (k > 0) sq *= sq;
    }
    return out;
}

// Evaluates the tree as given, tracking the largest finite intermediate
// magnitude when `mag` is non-null (used by the probabilistic zero test).
inline double eval_node(const Expr& e, const Binding& b, double* mag) {
    double out = 0.0;
    switch (e.kind()) {
        case Kind::Constant:
            out = e.value().to_double();
            break;
        case Kind::Variable: {
            auto it = b.find(e.name());
            if (it == b.end()) throw UnboundVariable(e.name());
            out = it->second;
            break;
        }
        case Kind::Negate:
            out = -eval_node(e.child(), b, mag);
            break;
        case Kind::Sum:
            for (const auto& k : e.children()) out += eval_node(k, b, mag);
            break;
        case Kind::Product:
            out = 1.0;
            for (const auto& k : e.children()) out *= eval_node(k, b, mag);
            break;
        case Kind::Power: {
            double base = eval_node(e.child(), b, mag);
            bool ok = true;
            out = pow_ll(base, e.exponent(), ok);
            if (!ok) throw DomainError("zero raised to a negative power");
            break;
        }
        case Kind::Call: {
            double a = eval_node(e.child(), b, mag);
            if (e.name() == "sin") {
                out = std::sin(a);
            } else if (e.name() == "cos") {
                out = std::cos(a);
            } else if (e.name() == "exp") {
                out = std::exp(a);
            } else if (e.name() == "log") {
                if (a <= 0.0) throw DomainError("log of a nonpositive value");
                out = std::log(a);
            } else {
                if (a < 0.0) throw DomainError("sqrt of a negative value");
                out = std::sqrt(a);
            }
            break;
        }
    }
    if (mag) {
        if (!std::isfinite(out)) throw DomainError("non-finite intermediate value");
        *mag = std::max(*mag, std::abs(out));
    }
    return out;
}

} // namespace detail

/// Numeric evaluation under a full binding.
inline double evaluate(const Expr& e, const Binding& b) {
    return detail::eval_node(e, b, nullptr);
}

// ---- free variables ----

namespace detail {

inline void collect_variables(const Expr& e, std::set<std::string>& out) {
    if (e.kind() == Kind::Variable) {
        out.insert(e.name());
        return;
    }
    for (const auto& k : e.children()) collect_variables(k, out);
}

} // namespace detail

/// Variables appearing in the normalized tree (so x1 - x1 has none).
inline std::set<std::string> free_variables(const Expr& e) {
    std::set<std::string> out;
    detail::collect_variables(normalize(e), out);
    return out;
}

// ---- probabilistic zero test ----

namespace detail {

inline double draw_sample(std::mt19937_64& rng) {
    // Uniform magnitude in [0.1, 2] with a random sign; avoids
    // std::uniform_real_distribution for cross-platform reproducibility.
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double m = 0.1 + 1.9 * u;
    return (rng() & 1u) ? -m : m;
}

} // namespace detail

/// Decides whether the expression vanishes identically. Symbolically when the
/// normal form is a constant; otherwise by 32 clean random evaluations with a
/// magnitude-scaled threshold. Throws Undecidable if 256 draws cannot produce
/// 32 samples inside every function domain.
inline bool is_zero(const Expr& e, std::uint64_t seed = 0) {
    Expr n = normalize(e);
    if (n.is_constant()) return n.value().is_zero();

    std::set<std::string> vars;
    detail::collect_variables(n, vars);
    std::mt19937_64 rng(seed);
    int clean = 0;
    for (int attempt = 0; attempt < 256 && clean < 32; ++attempt) {
        Binding b;
        for (const auto& v : vars) b[v] = detail::draw_sample(rng);
        double mag = 0.0;
        double value;
        try {
            value = detail::eval_node(n, b, &mag);
        } catch (const DomainError&) {
            continue;
        }
        if (std::abs(value) > 1e-9 * (1.0 + mag)) return false;
        ++clean;
    }
    if (clean < 32)
        throw Undecidable("could not draw 32 in-domain samples for the zero test");
    return true;
}

// ---- printing ----

namespace detail {

// Precedence levels used by the printer: sum 1, product/division 2,
// unary minus 3, power 4, atoms 5.
std::string print_expr(const Expr& e, int parent_prec);

inline std::string print_constant_positive(const Rational& c) {
    return c.to_string(); // "p" or "p/q", both reparse to the same rational
}

// Renders a product as numerator/denominator parts. Returns the body without
// a leading sign; `negative` reports whether the printed value is negated.
inline std::string print_product_body(const Expr& e, bool& negative) {
    negative = false;
    std::vector<std::string> num;
    std::vector<std::string> den;
    for (const auto& k : e.children()) {
        if (k.kind() == Kind::Power && k.exponent() < 0) {
            long long d = -k.exponent();
            std::string s = print_expr(k.child(), d != 1 ? 5 : 3);
            if (d != 1) s += "^" + std::to_string(d);
            den.push_back(std::move(s));
        } else if (k.is_constant()) {
            Rational c = k.value();
            if (c < Rational(0)) {
                negative = !negative;
                c = -c;
            }
            if (!c.is_one() || e.children().size() == 1)
                num.push_back(print_constant_positive(c));
        } else {
            num.push_back(print_expr(k, 2));
        }
    }
    std::string out;
    if (num.empty()) {
        out = "1";
    } else {
        for (std::size_t i = 0; i < num.size(); ++i) {
            if (i) out += "*";
            out += num[i];
        }
    }
    for (const auto& d : den) out += "/" + d;
    return out;
}

inline std::string print_expr(const Expr& e, int parent_prec) {
    switch (e.kind()) {
        case Kind::Constant: {
            const Rational& c = e.value();
            if (c < Rational(0)) {
                std::string s = "-" + print_constant_positive(-c);
                return parent_prec > 2 ? "(" + s + ")" : s;
            }
            std::string s = print_constant_positive(c);
            return (!c.is_integer() && parent_prec > 2) ? "(" + s + ")" : s;
        }
        case Kind::Variable:
            return e.name();
        case Kind::Call:
            return e.name() + "(" + print_expr(e.child(), 0) + ")";
        case Kind::Negate: {
            std::string s = "-" + print_expr(e.child(), 3);
            return parent_prec > 2 ? "(" + s + ")" : s;
        }
        case Kind::Power: {
            long long k = e.exponent();
            if (k < 0) {
                long long d = -k;
                std::string s = "1/" + print_expr(e.child(), d != 1 ? 5 : 3);
                if (d != 1) s += "^" + std::to_string(d);
                return parent_prec > 2 ? "(" + s + ")" : s;
            }
            std::string base = print_expr(e.child(), 5);
            std::string s = base + "^" + std::to_string(k);
            return parent_prec > 4 ? "(" + s + ")" : s;
        }
        case Kind::Product: {
            bool neg = false;
            std::string body = print_product_body(e, neg);
            std::string s = neg ? "-" + body : body;
            return parent_prec > (neg ? 1 : 2) ? "(" + s + ")" : s;
        }
        case Kind::Sum: {
            std::string out;
            bool first = true;
            for (const auto& k : e.children()) {
                bool neg = false;
                std::string body;
                if (k.kind() == Kind::Product) {
                    body = print_product_body(k, neg);
                } else if (k.kind() == Kind::Negate) {
                    neg = true;
                    body = print_expr(k.child(), 3);
                } else if (k.is_constant() && k.value() < Rational(0)) {
                    neg = true;
                    body = print_constant_positive(-k.value());
                } else {
                    body = print_expr(k, 2);
                }
                if (first) {
                    out = neg ? "-" + body : body;
                    first = false;
                } else {
                    out += neg ? " - " : " + ";
                    out += body;
                }
            }
            return parent_prec > 1 ? "(" + out + ")" : out;
        }
    }
    return "0";
}

} // namespace detail

/// Deterministic text form; parsing it back and normalizing reproduces
/// normalize(e).
inline std::string to_string(const Expr& e) { return detail::print_expr(e, 0); }

} // namespace cmotion

#endif
