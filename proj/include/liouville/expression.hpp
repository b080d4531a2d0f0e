#pragma once

// Arithmetic expression sublanguage used to define scalar fields and form
// coefficients. Grammar:
//
//   expr   := mul (('+' | '-') mul)*
//   mul    := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := primary ('^' unary)?          right associative
//   primary:= number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Identifiers: variables q1..qn, p1..pn (aliases z1..z2n) and the functions
// sin, cos, exp, sqrt, atan2. Exponents must fold to constants so the
// language stays closed under exact symbolic differentiation.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "liouville/errors.hpp"

namespace liouville::expr {

enum class kind { constant, variable, add, sub, mul, div, pow, neg, call };

struct node;
using ptr = std::shared_ptr<const node>;

struct node {
    kind k;
    double value = 0.0;      // constant
    int var = -1;            // variable index into z (0-based)
    std::string func;        // call target
    std::vector<ptr> args;   // children
};

inline ptr constant(double v) {
    auto n = std::make_shared<node>();
    n->k = kind::constant;
    n->value = v;
    return n;
}

inline ptr variable(int index) {
    auto n = std::make_shared<node>();
    n->k = kind::variable;
    n->var = index;
    return n;
}

inline ptr make(kind k, std::vector<ptr> args, std::string func = {}) {
    auto n = std::make_shared<node>();
    n->k = k;
    n->args = std::move(args);
    n->func = std::move(func);
    return n;
}

inline bool is_const(const ptr& e, double v) {
    return e->k == kind::constant && e->value == v;
}

// ---------------------------------------------------------------------------
// construction helpers with local simplification (constant folding, neutral
// element elimination); keeps derivatives readable, e.g. d(1+q1^2)/dq1 = 2*q1.

inline ptr add(ptr a, ptr b);
inline ptr sub(ptr a, ptr b);
inline ptr mul(ptr a, ptr b);
inline ptr div(ptr a, ptr b);
inline ptr neg(ptr a);
inline ptr pow(ptr a, ptr b);
inline ptr call(const std::string& f, std::vector<ptr> args);

inline ptr add(ptr a, ptr b) {
    if (a->k == kind::constant && b->k == kind::constant) return constant(a->value + b->value);
    if (is_const(a, 0)) return b;
    if (is_const(b, 0)) return a;
    return make(kind::add, {std::move(a), std::move(b)});
}

inline ptr sub(ptr a, ptr b) {
    if (a->k == kind::constant && b->k == kind::constant) return constant(a->value - b->value);
    if (is_const(b, 0)) return a;
    if (is_const(a, 0)) return neg(std::move(b));
    return make(kind::sub, {std::move(a), std::move(b)});
}

inline ptr mul(ptr a, ptr b) {
    if (a->k == kind::constant && b->k == kind::constant) return constant(a->value * b->value);
    if (is_const(a, 0) || is_const(b, 0)) return constant(0);
    if (is_const(a, 1)) return b;
    if (is_const(b, 1)) return a;
    return make(kind::mul, {std::move(a), std::move(b)});
}

inline ptr div(ptr a, ptr b) {
    if (is_const(a, 0) && !is_const(b, 0)) return constant(0);
    if (is_const(b, 1)) return a;
    if (a->k == kind::constant && b->k == kind::constant && b->value != 0)
        return constant(a->value / b->value);
    return make(kind::div, {std::move(a), std::move(b)});
}

inline ptr neg(ptr a) {
    if (a->k == kind::constant) return constant(-a->value);
    if (a->k == kind::neg) return a->args[0];
    return make(kind::neg, {std::move(a)});
}

inline ptr pow(ptr a, ptr b) {
    if (is_const(b, 1)) return a;
    if (is_const(b, 0)) return constant(1);
    if (a->k == kind::constant && b->k == kind::constant)
        return constant(std::pow(a->value, b->value));
    return make(kind::pow, {std::move(a), std::move(b)});
}

inline ptr call(const std::string& f, std::vector<ptr> args) {
    return make(kind::call, std::move(args), f);
}

// ---------------------------------------------------------------------------
// evaluation

inline double eval(const node& e, const Eigen::VectorXd& z) {
    switch (e.k) {
        case kind::constant: return e.value;
        case kind::variable: return z[e.var];
        case kind::add: return eval(*e.args[0], z) + eval(*e.args[1], z);
        case kind::sub: return eval(*e.args[0], z) - eval(*e.args[1], z);
        case kind::mul: return eval(*e.args[0], z) * eval(*e.args[1], z);
        case kind::div: {
            const double d = eval(*e.args[1], z);
            if (d == 0.0) throw eval_error("division by zero");
            return eval(*e.args[0], z) / d;
        }
        case kind::pow: return std::pow(eval(*e.args[0], z), eval(*e.args[1], z));
        case kind::neg: return -eval(*e.args[0], z);
        case kind::call: {
            const double a = eval(*e.args[0], z);
            if (e.func == "sin") return std::sin(a);
            if (e.func == "cos") return std::cos(a);
            if (e.func == "exp") return std::exp(a);
            if (e.func == "sqrt") {
                if (a < 0.0) throw eval_error("sqrt of a negative value");
                return std::sqrt(a);
            }
            if (e.func == "atan2") return std::atan2(a, eval(*e.args[1], z));
            throw eval_error("unknown function: " + e.func);
        }
    }
    throw eval_error("corrupt expression node");
}

inline double eval(const ptr& e, const Eigen::VectorXd& z) { return eval(*e, z); }

// ---------------------------------------------------------------------------
// exact differentiation with respect to variable index v

inline ptr diff(const ptr& e, int v) {
    switch (e->k) {
        case kind::constant: return constant(0);
        case kind::variable: return constant(e->var == v ? 1.0 : 0.0);
        case kind::add: return add(diff(e->args[0], v), diff(e->args[1], v));
        case kind::sub: return sub(diff(e->args[0], v), diff(e->args[1], v));
        case kind::mul:
            return add(mul(diff(e->args[0], v), e->args[1]),
                       mul(e->args[0], diff(e->args[1], v)));
        case kind::div:
            // (u/w)' = u'/w - u w'/w^2
            return sub(div(diff(e->args[0], v), e->args[1]),
                       div(mul(e->args[0], diff(e->args[1], v)),
                           pow(e->args[1], constant(2))));
        case kind::pow: {
            // exponent is constant by construction (enforced at parse time)
            const double c = e->args[1]->value;
            return mul(mul(constant(c), pow(e->args[0], constant(c - 1))),
                       diff(e->args[0], v));
        }
        case kind::neg: return neg(diff(e->args[0], v));
        case kind::call: {
            const ptr& u = e->args[0];
            const ptr du = diff(u, v);
            if (e->func == "sin") return mul(call("cos", {u}), du);
            if (e->func == "cos") return neg(mul(call("sin", {u}), du));
            if (e->func == "exp") return mul(call("exp", {u}), du);
            if (e->func == "sqrt")
                return div(du, mul(constant(2), call("sqrt", {u})));
            if (e->func == "atan2") {
                // d atan2(y,x) = (x dy - y dx) / (x^2 + y^2)
                const ptr& y = e->args[0];
                const ptr& x = e->args[1];
                const ptr dy = du;
                const ptr dx = diff(x, v);
                return div(sub(mul(x, dy), mul(y, dx)),
                           add(pow(x, constant(2)), pow(y, constant(2))));
            }
            throw eval_error("unknown function: " + e->func);
        }
    }
    throw eval_error("corrupt expression node");
}

// ---------------------------------------------------------------------------
// printing (shortest round-trip doubles, minimal parentheses)

inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

/// Variable rendering: with a known chart dimension the canonical aliases
/// q1..qn, p1..pn are used; otherwise plain z-names.
inline std::string variable_name(int index, int dim) {
    if (dim > 0) {
        const int n = dim / 2;
        if (index < n) return "q" + std::to_string(index + 1);
        return "p" + std::to_string(index - n + 1);
    }
    return "z" + std::to_string(index + 1);
}

namespace detail {
inline int precedence(const node& e) {
    switch (e.k) {
        case kind::add:
        case kind::sub: return 1;
        case kind::mul:
        case kind::div: return 2;
        case kind::neg: return 3;
        case kind::pow: return 4;
        default: return 5;
    }
}

inline void print(const node& e, std::string& out, int parent_prec, bool rhs,
                  int dim) {
    const int prec = precedence(e);
    const bool parens =
        prec < parent_prec ||
        (prec == parent_prec && rhs && (e.k == kind::sub || e.k == kind::div ||
                                        e.k == kind::add || e.k == kind::mul));
    if (parens) out += '(';
    switch (e.k) {
        case kind::constant:
            if (e.value < 0) {
                out += '(' + format_double(e.value) + ')';
            } else {
                out += format_double(e.value);
            }
            break;
        case kind::variable: out += variable_name(e.var, dim); break;
        case kind::add:
            print(*e.args[0], out, prec, false, dim);
            out += '+';
            print(*e.args[1], out, prec, true, dim);
            break;
        case kind::sub:
            print(*e.args[0], out, prec, false, dim);
            out += '-';
            print(*e.args[1], out, prec, true, dim);
            break;
        case kind::mul:
            print(*e.args[0], out, prec, false, dim);
            out += '*';
            print(*e.args[1], out, prec, true, dim);
            break;
        case kind::div:
            print(*e.args[0], out, prec, false, dim);
            out += '/';
            print(*e.args[1], out, prec, true, dim);
            break;
        case kind::neg:
            out += '-';
            print(*e.args[0], out, prec + 1, false, dim);
            break;
        case kind::pow:
            print(*e.args[0], out, prec + 1, false, dim);
            out += '^';
            print(*e.args[1], out, prec, true, dim);
            break;
        case kind::call: {
            out += e.func + "(";
            bool first = true;
            for (const auto& a : e.args) {
                if (!first) out += ',';
                first = false;
                print(*a, out, 0, false, dim);
            }
            out += ')';
            break;
        }
    }
    if (parens) out += ')';
}
}  // namespace detail

/// Serializes to text that re-parses to an equivalent tree; constants are
/// printed as shortest round-trip literals.
inline std::string to_string(const ptr& e, int dim = 0) {
    std::string out;
    detail::print(*e, out, 0, false, dim);
    return out;
}

// ---------------------------------------------------------------------------
// parser

class parser {
  public:
    /// dim is the full phase-space dimension 2n. Variables bind as
    /// z1..z_dim with aliases q1..qn -> z1..zn, p1..pn -> z_{n+1}..z_{2n}.
    parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

    ptr parse() {
        ptr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            fail(pos_, "unexpected trailing input; expected operator or end of expression");
        return e;
    }

  private:
    [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
        throw parse_error(msg, 1, static_cast<int>(at) + 1);
    }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    ptr parse_expr() {
        ptr e = parse_mul();
        for (;;) {
            if (eat('+')) {
                e = add(e, parse_mul());
            } else if (eat('-')) {
                e = sub(e, parse_mul());
            } else {
                return e;
            }
        }
    }

    ptr parse_mul() {
        ptr e = parse_unary();
        for (;;) {
            if (eat('*')) {
                e = mul(e, parse_unary());
            } else if (eat('/')) {
                e = div(e, parse_unary());
            } else {
                return e;
            }
        }
    }

    ptr parse_unary() {
        if (eat('-')) return neg(parse_unary());
        return parse_power();
    }

    ptr parse_power() {
        ptr base = parse_primary();
        skip_ws();
        if (eat('^')) {
            const std::size_t at = pos_;
            ptr exponent = parse_unary();
            if (exponent->k != kind::constant)
                fail(at, "exponent must be a constant (the sublanguage stays "
                         "closed under differentiation)");
            return pow(base, exponent);
        }
        return base;
    }

    ptr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail(pos_, "unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            const std::size_t open = pos_;
            ++pos_;
            ptr e = parse_expr();
            if (!eat(')')) fail(open, "unbalanced '('");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        fail(pos_, std::string("unexpected character '") + c + "'");
    }

    ptr parse_number() {
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double value = 0;
        auto [after, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc()) fail(pos_, "malformed number");
        pos_ = static_cast<std::size_t>(after - text_.data());
        return constant(value);
    }

    ptr parse_ident() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name(text_.substr(start, pos_ - start));
        if (peek() == '(') {
            static const struct { const char* f; int arity; } fns[] = {
                {"sin", 1}, {"cos", 1}, {"exp", 1}, {"sqrt", 1}, {"atan2", 2}};
            for (const auto& fn : fns) {
                if (name == fn.f) {
                    eat('(');
                    std::vector<ptr> args;
                    args.push_back(parse_expr());
                    while (eat(',')) args.push_back(parse_expr());
                    if (!eat(')')) fail(start, "unbalanced '(' in call of " + name);
                    if (static_cast<int>(args.size()) != fn.arity)
                        fail(start, name + " takes " + std::to_string(fn.arity) +
                                        " argument(s)");
                    return call(name, std::move(args));
                }
            }
            fail(start, "unknown function '" + name + "'");
        }
        return resolve_variable(name, start);
    }

    ptr resolve_variable(const std::string& name, std::size_t at) {
        if (name.size() < 2) fail(at, "unknown identifier '" + name + "'");
        const char head = name[0];
        int index = -1;
        const std::string digits = name.substr(1);
        for (char d : digits)
            if (!std::isdigit(static_cast<unsigned char>(d)))
                fail(at, "unknown identifier '" + name + "'");
        const int num = std::atoi(digits.c_str());
        const int n = dim_ / 2;
        if (head == 'z' && num >= 1 && num <= dim_) index = num - 1;
        if (head == 'q' && num >= 1 && num <= n) index = num - 1;
        if (head == 'p' && num >= 1 && num <= n) index = n + num - 1;
        if (index < 0)
            fail(at, "variable '" + name + "' is out of range for dimension " +
                         std::to_string(dim_));
        return variable(index);
    }

    std::string_view text_;
    int dim_;
    std::size_t pos_ = 0;
};

/// Parses an expression over a 2n-dimensional chart.
inline ptr parse(std::string_view text, int dim) { return parser(text, dim).parse(); }

}  // namespace liouville::expr
