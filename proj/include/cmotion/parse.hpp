#ifndef CMOTION_PARSE_HPP
#define CMOTION_PARSE_HPP

#include <cctype>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cmotion/errors.hpp"
#include "cmotion/expr.hpp"

namespace cmotion {

namespace detail {

struct Token {
    enum class Type { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };
    Type type = Type::End;
    std::size_t pos = 0;
    Rational value;   // Number
    bool had_dot = false;
    std::string text; // Ident
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
        tok_ = Token{};
        tok_.pos = i_;
        if (i_ >= src_.size()) {
            tok_.type = Token::Type::End;
            return;
        }
        char c = src_[i_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i_;
            while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) ||
                                       src_[j] == '_'))
                ++j;
            tok_.type = Token::Type::Ident;
            tok_.text = src_.substr(i_, j - i_);
            i_ = j;
            return;
        }
        switch (c) {
            case '+': tok_.type = Token::Type::Plus; break;
            case '-': tok_.type = Token::Type::Minus; break;
            case '*': tok_.type = Token::Type::Star; break;
            case '/': tok_.type = Token::Type::Slash; break;
            case '^': tok_.type = Token::Type::Caret; break;
            case '(': tok_.type = Token::Type::LParen; break;
            case ')': tok_.type = Token::Type::RParen; break;
            default:
                throw SyntaxError(i_, "a token", std::string("'") + c + "'");
        }
        ++i_;
    }

    void lex_number() {
        long long num = 0, den = 1;
        std::size_t start = i_;
        auto push_digit = [&](char d) {
            if (num > (INT64_MAX - 9) / 10)
                throw SyntaxError(start, "a representable numeric literal", "overflow");
            num = num * 10 + (d - '0');
        };
        while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_])))
            push_digit(src_[i_++]);
        if (i_ < src_.size() && src_[i_] == '.') {
            tok_.had_dot = true;
            ++i_;
            if (i_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[i_])))
                throw SyntaxError(i_, "a digit after the decimal point",
                                  i_ < src_.size() ? std::string(1, src_[i_]) : "end of input");
            while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
                if (den > INT64_MAX / 10)
                    throw SyntaxError(start, "a representable numeric literal", "overflow");
                push_digit(src_[i_++]);
                den *= 10;
            }
        }
        tok_.type = Token::Type::Number;
        tok_.value = Rational(num, den);
    }

    const std::string& src_;
    std::size_t i_ = 0;
    Token tok_;
};

class Parser {
public:
    Parser(const std::string& src, const std::set<std::string>& symbols)
        : lex_(src), symbols_(symbols) {}

    Expr run() {
        Expr e = parse_sum();
        if (lex_.peek().type != Token::Type::End)
            throw SyntaxError(lex_.peek().pos, "end of input", describe(lex_.peek()));
        return e;
    }

private:
    static std::string describe(const Token& t) {
        switch (t.type) {
            case Token::Type::Number: return "a number";
            case Token::Type::Ident: return "'" + t.text + "'";
            case Token::Type::Plus: return "'+'";
            case Token::Type::Minus: return "'-'";
            case Token::Type::Star: return "'*'";
            case Token::Type::Slash: return "'/'";
            case Token::Type::Caret: return "'^'";
            case Token::Type::LParen: return "'('";
            case Token::Type::RParen: return "')'";
            case Token::Type::End: return "end of input";
        }
        return "a token";
    }

    void expect(Token::Type t, const char* what) {
        if (lex_.peek().type != t)
            throw SyntaxError(lex_.peek().pos, what, describe(lex_.peek()));
        lex_.take();
    }

    Expr parse_sum() {
        std::vector<Expr> kids;
        kids.push_back(parse_term());
        while (true) {
            auto t = lex_.peek().type;
            if (t == Token::Type::Plus) {
                lex_.take();
                kids.push_back(parse_term());
            } else if (t == Token::Type::Minus) {
                lex_.take();
                kids.push_back(Expr::neg(parse_term()));
            } else {
                break;
            }
        }
        return Expr::sum(std::move(kids));
    }

    Expr parse_term() {
        std::vector<Expr> kids;
        kids.push_back(parse_unary());
        while (true) {
            auto t = lex_.peek().type;
            if (t == Token::Type::Star) {
                lex_.take();
                kids.push_back(parse_unary());
            } else if (t == Token::Type::Slash) {
                lex_.take();
                kids.push_back(Expr::pow(parse_unary(), -1));
            } else {
                break;
            }
        }
        return Expr::product(std::move(kids));
    }

    Expr parse_unary() {
        if (lex_.peek().type == Token::Type::Minus) {
            lex_.take();
            return Expr::neg(parse_unary());
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        Expr base = parse_primary();
        if (lex_.peek().type == Token::Type::Caret) {
            lex_.take();
            return Expr::pow(std::move(base), parse_exponent());
        }
        return base;
    }

    // Exponents are integer literals, optionally signed, optionally inside
    // parentheses; bare literal chains fold right-associatively (x^2^3 = x^8).
    long long parse_exponent() {
        if (lex_.peek().type == Token::Type::LParen) {
            lex_.take();
            long long v = signed_integer_literal();
            expect(Token::Type::RParen, "')'");
            return v;
        }
        long long v = signed_integer_literal();
        if (lex_.peek().type == Token::Type::Caret) {
            lex_.take();
            long long rhs = parse_exponent();
            if (rhs < 0) throw NonIntegerExponent("negative exponent in an exponent chain");
            if (v == 0) return rhs == 0 ? 1 : 0;
            if (v == 1) return 1;
            if (v == -1) return (rhs & 1) ? -1 : 1;
            __int128 out = 1;
            for (long long i = 0; i < rhs; ++i) {
                out *= v;
                if (out > INT64_MAX || out < INT64_MIN)
                    throw SyntaxError(lex_.peek().pos, "a representable exponent", "overflow");
            }
            return static_cast<long long>(out);
        }
        return v;
    }

    long long signed_integer_literal() {
        bool negate = false;
        if (lex_.peek().type == Token::Type::Minus) {
            lex_.take();
            negate = true;
        }
        const Token& t = lex_.peek();
        if (t.type != Token::Type::Number)
            throw NonIntegerExponent("exponent must be an integer literal");
        if (t.had_dot || !t.value.is_integer())
            throw NonIntegerExponent("exponent must be an integer literal");
        long long v = t.value.num();
        lex_.take();
        return negate ? -v : v;
    }

    Expr parse_primary() {
        const Token t = lex_.take();
        switch (t.type) {
            case Token::Type::Number:
                return Expr::constant(t.value);
            case Token::Type::LParen: {
                Expr e = parse_sum();
                expect(Token::Type::RParen, "')'");
                return e;
            }
            case Token::Type::Ident: {
                if (lex_.peek().type == Token::Type::LParen) {
                    if (!is_function_name(t.text)) throw UnknownSymbol(t.text);
                    lex_.take();
                    Expr arg = parse_sum();
                    expect(Token::Type::RParen, "')'");
                    return Expr::call(t.text, std::move(arg));
                }
                if (t.text == "t" || t.text == "psi0" || symbols_.count(t.text))
                    return Expr::variable(t.text);
                throw UnknownSymbol(t.text);
            }
            default:
                throw SyntaxError(t.pos, "a number, symbol, or '('", describe(t));
        }
    }

    Lexer lex_;
    const std::set<std::string>& symbols_;
};

} // namespace detail

/// Parses the expression grammar over the given symbol set (t and psi0 are
/// always known) and returns the normalized expression.
inline Expr parse(const std::string& text, const std::set<std::string>& symbols = {}) {
    detail::Parser p(text, symbols);
    return normalize(p.run());
}

} // namespace cmotion

#endif
