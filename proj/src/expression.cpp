#include "peridyn/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numbers>

#include "peridyn/error.hpp"

namespace peridyn {

enum class Op { num, var, neg, add, sub, mul, div, pow, call1, call2 };

struct ExprNode {
    Op op = Op::num;
    double value = 0.0;
    int var = 0; // 0..2 x, 3..5 y, 6 t
    double (*f1)(double) = nullptr;
    double (*f2)(double, double) = nullptr;
    std::shared_ptr<const ExprNode> a, b;
};

namespace {

using NodeP = std::shared_ptr<const ExprNode>;

double f_abs(double v) { return std::abs(v); }
double f_min(double a, double b) { return std::min(a, b); }
double f_max(double a, double b) { return std::max(a, b); }

struct Func1 {
    const char* name;
    double (*f)(double);
};
struct Func2 {
    const char* name;
    double (*f)(double, double);
};

const Func1 funcs1[] = {
    {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
    {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
    {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
    {"abs", f_abs},                                  {"tanh", [](double v) { return std::tanh(v); }},
    {"sinh", [](double v) { return std::sinh(v); }}, {"cosh", [](double v) { return std::cosh(v); }},
};
const Func2 funcs2[] = {
    {"pow", [](double a, double b) { return std::pow(a, b); }},
    {"min", f_min},
    {"max", f_max},
};

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodeP parse()
    {
        NodeP n = expr();
        skip();
        if (pos_ != s_.size())
            fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw invalid_argument("expression '" + s_ + "': " + msg + " at position " + std::to_string(pos_));
    }

    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
    }

    bool accept(char c)
    {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static NodeP make(Op op, NodeP a = nullptr, NodeP b = nullptr)
    {
        auto n = std::make_shared<ExprNode>();
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    NodeP expr()
    {
        NodeP lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = make(Op::add, lhs, term());
            else if (accept('-'))
                lhs = make(Op::sub, lhs, term());
            else
                return lhs;
        }
    }

    NodeP term()
    {
        NodeP lhs = unary();
        for (;;) {
            if (accept('*'))
                lhs = make(Op::mul, lhs, unary());
            else if (accept('/'))
                lhs = make(Op::div, lhs, unary());
            else
                return lhs;
        }
    }

    NodeP unary()
    {
        if (accept('-'))
            return make(Op::neg, unary());
        if (accept('+'))
            return unary();
        return power();
    }

    NodeP power()
    {
        NodeP base = primary();
        if (accept('^'))
            return make(Op::pow, base, unary());
        return base;
    }

    NodeP primary()
    {
        skip();
        if (pos_ >= s_.size())
            fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodeP n = expr();
            if (!accept(')'))
                fail("expected ')'");
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin)
                fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            auto n = std::make_shared<ExprNode>();
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_])))
                ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            return identifier(id);
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodeP identifier(const std::string& id)
    {
        auto n = std::make_shared<ExprNode>();
        if (id == "pi") {
            n->value = std::numbers::pi;
            return n;
        }
        if (id == "e") {
            n->value = std::numbers::e;
            return n;
        }
        if (id == "t") {
            n->op = Op::var;
            n->var = 6;
            return n;
        }
        if (id.size() == 2 && (id[0] == 'x' || id[0] == 'y') && id[1] >= '1' && id[1] <= '3') {
            n->op = Op::var;
            n->var = (id[0] == 'x' ? 0 : 3) + (id[1] - '1');
            return n;
        }
        for (const auto& f : funcs1) {
            if (id == f.name) {
                if (!accept('('))
                    fail("expected '(' after " + id);
                n->op = Op::call1;
                n->f1 = f.f;
                n->a = expr();
                if (!accept(')'))
                    fail("expected ')'");
                return n;
            }
        }
        for (const auto& f : funcs2) {
            if (id == f.name) {
                if (!accept('('))
                    fail("expected '(' after " + id);
                n->op = Op::call2;
                n->f2 = f.f;
                n->a = expr();
                if (!accept(','))
                    fail("expected ',' in " + id);
                n->b = expr();
                if (!accept(')'))
                    fail("expected ')'");
                return n;
            }
        }
        fail("unknown identifier '" + id + "'");
    }
};

double eval_node(const ExprNode& n, const EvalPoint& p)
{
    switch (n.op) {
    case Op::num: return n.value;
    case Op::var: return n.var < 3 ? p.x[n.var] : (n.var < 6 ? p.y[n.var - 3] : p.t);
    case Op::neg: return -eval_node(*n.a, p);
    case Op::add: return eval_node(*n.a, p) + eval_node(*n.b, p);
    case Op::sub: return eval_node(*n.a, p) - eval_node(*n.b, p);
    case Op::mul: return eval_node(*n.a, p) * eval_node(*n.b, p);
    case Op::div: return eval_node(*n.a, p) / eval_node(*n.b, p);
    case Op::pow: return std::pow(eval_node(*n.a, p), eval_node(*n.b, p));
    case Op::call1: return n.f1(eval_node(*n.a, p));
    case Op::call2: return n.f2(eval_node(*n.a, p), eval_node(*n.b, p));
    }
    return 0.0;
}

bool uses(const ExprNode& n, int lo, int hi)
{
    if (n.op == Op::var)
        return n.var >= lo && n.var < hi;
    return (n.a && uses(*n.a, lo, hi)) || (n.b && uses(*n.b, lo, hi));
}

std::vector<std::string> split_top_level(const std::string& s)
{
    std::vector<std::string> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '(')
            ++depth;
        else if (s[i] == ')')
            --depth;
        else if (s[i] == ',' && depth == 0) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(s.substr(start));
    return out;
}

} // namespace

Expression::Expression() : root_(std::make_shared<ExprNode>()), text_("0") {}

Expression Expression::parse(const std::string& text)
{
    Expression e;
    e.root_ = Parser(text).parse();
    e.text_ = text;
    return e;
}

double Expression::eval(const EvalPoint& p) const { return eval_node(*root_, p); }

bool Expression::is_constant_zero() const { return root_->op == Op::num && root_->value == 0.0; }
bool Expression::depends_on_y() const { return uses(*root_, 3, 6); }
bool Expression::depends_on_t() const { return uses(*root_, 6, 7); }

VectorExpression VectorExpression::parse(const std::string& text, int dim)
{
    VectorExpression v;
    const auto parts = split_top_level(text);
    if (static_cast<int>(parts.size()) != dim)
        throw invalid_argument("vector expression '" + text + "' has " + std::to_string(parts.size()) +
                               " components, expected " + std::to_string(dim));
    for (const auto& p : parts)
        v.parts_.push_back(Expression::parse(p));
    return v;
}

VectorExpression VectorExpression::zero(int dim)
{
    VectorExpression v;
    v.parts_.assign(static_cast<std::size_t>(dim), Expression());
    return v;
}

bool VectorExpression::is_zero() const
{
    for (const auto& p : parts_)
        if (!p.is_constant_zero())
            return false;
    return true;
}

bool VectorExpression::depends_on_y() const
{
    for (const auto& p : parts_)
        if (p.depends_on_y())
            return true;
    return false;
}

bool VectorExpression::depends_on_t() const
{
    for (const auto& p : parts_)
        if (p.depends_on_t())
            return true;
    return false;
}

std::string VectorExpression::text() const
{
    std::string s;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i)
            s += ",";
        s += parts_[i].text();
    }
    return s;
}

} // namespace peridyn
