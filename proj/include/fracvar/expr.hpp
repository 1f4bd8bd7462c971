#pragma once

// Arithmetic expression language for Lagrangians, constraints and fields.
//
// Grammar (whitespace insignificant):
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := unary ('^' factor)?          right associative
//   unary  := '-' unary | atom
//   atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//
// Functions: sin cos exp log sqrt, one argument each. Note that unary minus
// binds tighter than '^', so "-x^2" is (-x)^2.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace fracvar {

enum class NodeKind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sin, Cos, Exp, Log, Sqrt };

inline std::string_view func_name(Func f) {
    switch (f) {
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Sqrt: return "sqrt";
    }
    return "?";
}

inline std::optional<Func> func_from_name(std::string_view s) {
    for (Func f : {Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt}) {
        if (func_name(f) == s) return f;
    }
    return std::nullopt;
}

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error("parse error at offset " + std::to_string(offset) + ": " + msg), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Unbound variable or argument-domain violation during evaluation.
class EvalError : public std::runtime_error {
public:
    EvalError(const std::string& msg, std::string subexpr)
        : std::runtime_error(msg + " in '" + subexpr + "'"), subexpr_(std::move(subexpr)) {}
    const std::string& subexpression() const { return subexpr_; }

private:
    std::string subexpr_;
};

struct ExprNode;

/// Immutable expression tree. Copies share structure.
class Expr {
public:
    Expr() = default;

    static Expr number(double v);
    static Expr variable(std::string name);
    static Expr neg(Expr a);
    static Expr binary(NodeKind k, Expr a, Expr b);
    static Expr call(Func f, Expr a);

    bool empty() const { return node_ == nullptr; }
    const ExprNode& node() const { return *node_; }

    NodeKind kind() const;
    double value() const;
    const std::string& name() const;
    Func func() const;
    const Expr& lhs() const;
    const Expr& rhs() const;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
    std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
    NodeKind kind = NodeKind::Number;
    double value = 0.0;
    std::string name;
    Func func = Func::Sin;
    Expr lhs;  // operand of Neg and Call
    Expr rhs;
};

inline Expr Expr::number(double v) {
    return Expr(std::make_shared<const ExprNode>(ExprNode{.kind = NodeKind::Number, .value = v}));
}
inline Expr Expr::variable(std::string name) {
    ExprNode n;
    n.kind = NodeKind::Variable;
    n.name = std::move(name);
    return Expr(std::make_shared<const ExprNode>(std::move(n)));
}
inline Expr Expr::neg(Expr a) {
    ExprNode n;
    n.kind = NodeKind::Neg;
    n.lhs = std::move(a);
    return Expr(std::make_shared<const ExprNode>(std::move(n)));
}
inline Expr Expr::binary(NodeKind k, Expr a, Expr b) {
    ExprNode n;
    n.kind = k;
    n.lhs = std::move(a);
    n.rhs = std::move(b);
    return Expr(std::make_shared<const ExprNode>(std::move(n)));
}
inline Expr Expr::call(Func f, Expr a) {
    ExprNode n;
    n.kind = NodeKind::Call;
    n.func = f;
    n.lhs = std::move(a);
    return Expr(std::make_shared<const ExprNode>(std::move(n)));
}

inline NodeKind Expr::kind() const { return node_->kind; }
inline double Expr::value() const { return node_->value; }
inline const std::string& Expr::name() const { return node_->name; }
inline Func Expr::func() const { return node_->func; }
inline const Expr& Expr::lhs() const { return node_->lhs; }
inline const Expr& Expr::rhs() const { return node_->rhs; }

inline bool is_binary(NodeKind k) {
    return k == NodeKind::Add || k == NodeKind::Sub || k == NodeKind::Mul || k == NodeKind::Div ||
           k == NodeKind::Pow;
}

inline bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (!a.node_ || !b.node_) return false;
    const ExprNode& x = *a.node_;
    const ExprNode& y = *b.node_;
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case NodeKind::Number: return x.value == y.value;
        case NodeKind::Variable: return x.name == y.name;
        case NodeKind::Neg: return x.lhs == y.lhs;
        case NodeKind::Call: return x.func == y.func && x.lhs == y.lhs;
        default: return x.lhs == y.lhs && x.rhs == y.rhs;
    }
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(const Expr& e) {
    switch (e.kind()) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Pow: return 3;
        case NodeKind::Neg: return 4;
        default: return 5;
    }
}

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void print(const Expr& e, std::string& out);

inline void print_at(const Expr& e, int min_prec, std::string& out) {
    if (precedence(e) < min_prec) {
        out += '(';
        print(e, out);
        out += ')';
    } else {
        print(e, out);
    }
}

inline void print(const Expr& e, std::string& out) {
    switch (e.kind()) {
        case NodeKind::Number:
            if (std::signbit(e.value())) {
                // Negative literals only arise from folding; keep them atomic.
                out += '(';
                out += format_number(e.value());
                out += ')';
            } else {
                out += format_number(e.value());
            }
            return;
        case NodeKind::Variable: out += e.name(); return;
        case NodeKind::Neg:
            out += '-';
            print_at(e.lhs(), 4, out);
            return;
        case NodeKind::Call:
            out += func_name(e.func());
            out += '(';
            print(e.lhs(), out);
            out += ')';
            return;
        case NodeKind::Add:
        case NodeKind::Sub:
            print_at(e.lhs(), 1, out);
            out += e.kind() == NodeKind::Add ? " + " : " - ";
            print_at(e.rhs(), 2, out);
            return;
        case NodeKind::Mul:
        case NodeKind::Div:
            print_at(e.lhs(), 2, out);
            out += e.kind() == NodeKind::Mul ? '*' : '/';
            print_at(e.rhs(), 3, out);
            return;
        case NodeKind::Pow:
            print_at(e.lhs(), 4, out);
            out += '^';
            print_at(e.rhs(), 3, out);
            return;
    }
}

}  // namespace detail

/// Prints with the minimal parentheses needed to parse back to the same tree.
inline std::string to_string(const Expr& e) {
    std::string out;
    if (!e.empty()) detail::print(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Expr parse_all() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        Expr e = parse_expr();
        skip_ws();
        if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= src_.size()) throw ParseError(std::string("expected '") + c + "', got end of input", pos_);
            throw ParseError(std::string("expected '") + c + "', got '" + src_[pos_] + "'", pos_);
        }
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = Expr::binary(NodeKind::Add, lhs, parse_term());
            } else if (accept('-')) {
                lhs = Expr::binary(NodeKind::Sub, lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_term() {
        Expr lhs = parse_factor();
        for (;;) {
            if (accept('*')) {
                lhs = Expr::binary(NodeKind::Mul, lhs, parse_factor());
            } else if (accept('/')) {
                lhs = Expr::binary(NodeKind::Div, lhs, parse_factor());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_factor() {
        Expr base = parse_unary();
        if (accept('^')) return Expr::binary(NodeKind::Pow, base, parse_factor());
        return base;
    }

    Expr parse_unary() {
        if (accept('-')) return Expr::neg(parse_unary());
        return parse_atom();
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
                while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
                pos_ = p;
            }
        }
        double v = 0.0;
        const char* first = src_.data() + start;
        const char* last = src_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) throw ParseError("malformed number", start);
        return Expr::number(v);
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        std::string name(src_.substr(start, pos_ - start));
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '(') {
            auto f = func_from_name(name);
            if (!f) throw ParseError("unknown function '" + name + "'", start);
            ++pos_;
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == ')') {
                throw ParseError("arity mismatch: " + name + " takes 1 argument, got 0", start);
            }
            Expr arg = parse_expr();
            std::size_t nargs = 1;
            while (accept(',')) {
                parse_expr();
                ++nargs;
            }
            if (nargs != 1) {
                throw ParseError("arity mismatch: " + name + " takes 1 argument, got " + std::to_string(nargs), start);
            }
            expect(')');
            return Expr::call(*f, arg);
        }
        if (func_from_name(name)) throw ParseError("function '" + name + "' used without arguments", start);
        return Expr::variable(std::move(name));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view src) { return detail::Parser(src).parse_all(); }

// ---------------------------------------------------------------------------
// Queries

inline void collect_variables(const Expr& e, std::set<std::string>& out) {
    switch (e.kind()) {
        case NodeKind::Number: return;
        case NodeKind::Variable: out.insert(e.name()); return;
        case NodeKind::Neg:
        case NodeKind::Call: collect_variables(e.lhs(), out); return;
        default:
            collect_variables(e.lhs(), out);
            collect_variables(e.rhs(), out);
    }
}

inline std::set<std::string> free_variables(const Expr& e) {
    std::set<std::string> out;
    if (!e.empty()) collect_variables(e, out);
    return out;
}

inline bool depends_on(const Expr& e, std::string_view var) {
    switch (e.kind()) {
        case NodeKind::Number: return false;
        case NodeKind::Variable: return e.name() == var;
        case NodeKind::Neg:
        case NodeKind::Call: return depends_on(e.lhs(), var);
        default: return depends_on(e.lhs(), var) || depends_on(e.rhs(), var);
    }
}

// ---------------------------------------------------------------------------
// Evaluation

using VarBinding = std::map<std::string, double, std::less<>>;

namespace detail {

inline double apply_func(Func f, double a, const Expr& where) {
    switch (f) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Exp: return std::exp(a);
        case Func::Log:
            if (!(a > 0.0)) throw EvalError("log of non-positive argument " + format_number(a), to_string(where));
            return std::log(a);
        case Func::Sqrt:
            if (a < 0.0) throw EvalError("sqrt of negative argument " + format_number(a), to_string(where));
            return std::sqrt(a);
    }
    return 0.0;
}

inline double apply_binary(NodeKind k, double a, double b, const Expr& where) {
    switch (k) {
        case NodeKind::Add: return a + b;
        case NodeKind::Sub: return a - b;
        case NodeKind::Mul: return a * b;
        case NodeKind::Div:
            if (b == 0.0) throw EvalError("division by zero", to_string(where));
            return a / b;
        case NodeKind::Pow: {
            if (a == 0.0 && b < 0.0) throw EvalError("zero raised to a negative power", to_string(where));
            const double r = std::pow(a, b);
            if (std::isnan(r) && !std::isnan(a) && !std::isnan(b)) {
                throw EvalError("negative base with non-integer exponent", to_string(where));
            }
            return r;
        }
        default: return 0.0;
    }
}

}  // namespace detail

inline double evaluate(const Expr& e, const VarBinding& env) {
    switch (e.kind()) {
        case NodeKind::Number: return e.value();
        case NodeKind::Variable: {
            auto it = env.find(e.name());
            if (it == env.end()) throw EvalError("unbound variable '" + e.name() + "'", e.name());
            return it->second;
        }
        case NodeKind::Neg: return -evaluate(e.lhs(), env);
        case NodeKind::Call: return detail::apply_func(e.func(), evaluate(e.lhs(), env), e);
        default: return detail::apply_binary(e.kind(), evaluate(e.lhs(), env), evaluate(e.rhs(), env), e);
    }
}

/// Expression flattened to a postfix program over positional variable slots.
/// Used on hot paths where the same expression is evaluated at every node.
class CompiledExpr {
public:
    CompiledExpr() = default;
    CompiledExpr(const Expr& e, std::span<const std::string> slots) {
        for (const auto& v : free_variables(e)) {
            if (std::find(slots.begin(), slots.end(), v) == slots.end()) {
                throw EvalError("unbound variable '" + v + "'", to_string(e));
            }
        }
        emit(e, slots);
    }

    double operator()(std::span<const double> vars) const {
        double stack[64] = {};
        std::vector<double> heap;
        double* st = stack;
        if (depth_ > 64) {
            heap.resize(depth_);
            st = heap.data();
        }
        std::size_t sp = 0;
        for (const Instr& in : code_) {
            switch (in.op) {
                case Op::Const: st[sp++] = in.value; break;
                case Op::Load: st[sp++] = vars[in.slot]; break;
                case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
                case Op::Call: st[sp - 1] = detail::apply_func(in.func, st[sp - 1], in.node); break;
                case Op::Binary:
                    --sp;
                    st[sp - 1] = detail::apply_binary(in.kind, st[sp - 1], st[sp], in.node);
                    break;
            }
        }
        return st[0];
    }

private:
    enum class Op { Const, Load, Neg, Call, Binary };
    struct Instr {
        Op op;
        double value = 0.0;
        std::size_t slot = 0;
        NodeKind kind = NodeKind::Number;
        Func func = Func::Sin;
        Expr node;  // for error messages
    };

    void push(Instr in, int delta) {
        code_.push_back(std::move(in));
        cur_ += delta;
        depth_ = std::max(depth_, static_cast<std::size_t>(cur_));
    }

    void emit(const Expr& e, std::span<const std::string> slots) {
        switch (e.kind()) {
            case NodeKind::Number: push({.op = Op::Const, .value = e.value()}, 1); return;
            case NodeKind::Variable: {
                auto it = std::find(slots.begin(), slots.end(), e.name());
                push({.op = Op::Load, .slot = static_cast<std::size_t>(it - slots.begin())}, 1);
                return;
            }
            case NodeKind::Neg:
                emit(e.lhs(), slots);
                push({.op = Op::Neg}, 0);
                return;
            case NodeKind::Call:
                emit(e.lhs(), slots);
                push({Op::Call, 0.0, 0, NodeKind::Call, e.func(), e}, 0);
                return;
            default:
                emit(e.lhs(), slots);
                emit(e.rhs(), slots);
                push({Op::Binary, 0.0, 0, e.kind(), Func::Sin, e}, -1);
        }
    }

    std::vector<Instr> code_;
    std::size_t depth_ = 0;
    long cur_ = 0;
};

// ---------------------------------------------------------------------------
// Folding constructors: constant folding and 0/1 identities, nothing else.

namespace fold {

inline bool is_num(const Expr& e) { return e.kind() == NodeKind::Number; }
inline bool is_num(const Expr& e, double v) { return is_num(e) && e.value() == v; }

inline Expr num(double v) { return Expr::number(v); }

inline Expr neg(const Expr& a) {
    if (is_num(a)) return num(-a.value());
    if (a.kind() == NodeKind::Neg) return a.lhs();
    return Expr::neg(a);
}

inline Expr add(const Expr& a, const Expr& b) {
    if (is_num(a) && is_num(b)) return num(a.value() + b.value());
    if (is_num(a, 0.0)) return b;
    if (is_num(b, 0.0)) return a;
    return Expr::binary(NodeKind::Add, a, b);
}

inline Expr sub(const Expr& a, const Expr& b) {
    if (is_num(a) && is_num(b)) return num(a.value() - b.value());
    if (is_num(b, 0.0)) return a;
    if (is_num(a, 0.0)) return neg(b);
    return Expr::binary(NodeKind::Sub, a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
    if (is_num(a) && is_num(b)) return num(a.value() * b.value());
    if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
    if (is_num(a, 1.0)) return b;
    if (is_num(b, 1.0)) return a;
    return Expr::binary(NodeKind::Mul, a, b);
}

inline Expr div(const Expr& a, const Expr& b) {
    if (is_num(a) && is_num(b) && b.value() != 0.0) return num(a.value() / b.value());
    if (is_num(a, 0.0)) return num(0.0);
    if (is_num(b, 1.0)) return a;
    return Expr::binary(NodeKind::Div, a, b);
}

inline Expr pow(const Expr& a, const Expr& b) {
    if (is_num(a) && is_num(b)) {
        const double r = std::pow(a.value(), b.value());
        if (std::isfinite(r)) return num(r);
    }
    if (is_num(b, 1.0)) return a;
    if (is_num(b, 0.0) || is_num(a, 1.0)) return num(1.0);
    return Expr::binary(NodeKind::Pow, a, b);
}

inline Expr call(Func f, const Expr& a) {
    if (is_num(a)) {
        const double x = a.value();
        const bool ok = (f != Func::Log || x > 0.0) && (f != Func::Sqrt || x >= 0.0);
        if (ok) {
            const double r = detail::apply_func(f, x, a);
            if (std::isfinite(r)) return num(r);
        }
    }
    return Expr::call(f, a);
}

}  // namespace fold

// ---------------------------------------------------------------------------
// Symbolic differentiation

/// Notes produced while differentiating. A power whose exponent depends on
/// the variable is rewritten through exp/log and is only valid where the base
/// is positive; such rewrites are recorded here.
struct DiffNotes {
    std::vector<std::string> warnings;
};

inline Expr differentiate(const Expr& e, std::string_view var, DiffNotes* notes = nullptr) {
    using namespace fold;
    switch (e.kind()) {
        case NodeKind::Number: return num(0.0);
        case NodeKind::Variable: return num(e.name() == var ? 1.0 : 0.0);
        case NodeKind::Neg: return neg(differentiate(e.lhs(), var, notes));
        case NodeKind::Add: return add(differentiate(e.lhs(), var, notes), differentiate(e.rhs(), var, notes));
        case NodeKind::Sub: return sub(differentiate(e.lhs(), var, notes), differentiate(e.rhs(), var, notes));
        case NodeKind::Mul: {
            const Expr& a = e.lhs();
            const Expr& b = e.rhs();
            return add(mul(differentiate(a, var, notes), b), mul(a, differentiate(b, var, notes)));
        }
        case NodeKind::Div: {
            const Expr& a = e.lhs();
            const Expr& b = e.rhs();
            Expr da = differentiate(a, var, notes);
            Expr db = differentiate(b, var, notes);
            if (is_num(db, 0.0)) return div(da, b);
            return div(sub(mul(da, b), mul(a, db)), pow(b, num(2.0)));
        }
        case NodeKind::Pow: {
            const Expr& a = e.lhs();
            const Expr& b = e.rhs();
            if (!depends_on(b, var)) {
                return mul(mul(b, pow(a, sub(b, num(1.0)))), differentiate(a, var, notes));
            }
            const bool positive_base = is_num(a) && a.value() > 0.0;
            if (notes && !positive_base) {
                notes->warnings.push_back("exponent of '" + to_string(e) + "' depends on " + std::string(var) +
                                          "; derivative assumes a positive base");
            }
            Expr db = differentiate(b, var, notes);
            if (!depends_on(a, var)) return mul(mul(e, call(Func::Log, a)), db);
            Expr da = differentiate(a, var, notes);
            return mul(e, add(mul(db, call(Func::Log, a)), div(mul(b, da), a)));
        }
        case NodeKind::Call: {
            const Expr& a = e.lhs();
            Expr da = differentiate(a, var, notes);
            if (is_num(da, 0.0)) return num(0.0);
            switch (e.func()) {
                case Func::Sin: return mul(call(Func::Cos, a), da);
                case Func::Cos: return mul(neg(call(Func::Sin, a)), da);
                case Func::Exp: return mul(call(Func::Exp, a), da);
                case Func::Log: return div(da, a);
                case Func::Sqrt: return div(da, mul(num(2.0), call(Func::Sqrt, a)));
            }
        }
    }
    return num(0.0);
}

inline Expr differentiate(const Expr& e, std::string_view var, std::string_view var2) {
    return differentiate(differentiate(e, var), var2);
}

}  // namespace fracvar
