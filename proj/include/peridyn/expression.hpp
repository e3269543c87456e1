#pragma once

#include <memory>
#include <string>
#include <vector>

#include "peridyn/grid.hpp"

namespace peridyn {

struct EvalPoint {
    Point3 x{0.0, 0.0, 0.0};
    Point3 y{0.0, 0.0, 0.0};
    double t = 0.0;
};

struct ExprNode;

/// Scalar arithmetic expression over x1..x3, y1..y3, t.
///
/// Grammar: + - * / ^ (right assoc), unary minus, parentheses, numbers,
/// constants pi and e, and the functions sin cos tan exp log sqrt abs tanh
/// sinh cosh pow min max.
class Expression {
public:
    Expression();
    static Expression parse(const std::string& text);

    double eval(const EvalPoint& p) const;
    bool is_constant_zero() const;
    bool depends_on_y() const;
    bool depends_on_t() const;
    const std::string& text() const { return text_; }

private:
    std::shared_ptr<const ExprNode> root_;
    std::string text_;
};

/// d comma-separated scalar expressions.
class VectorExpression {
public:
    VectorExpression() = default;
    /// Throws invalid_argument if the component count is not `dim`.
    static VectorExpression parse(const std::string& text, int dim);
    static VectorExpression zero(int dim);

    int dim() const { return static_cast<int>(parts_.size()); }
    const Expression& component(int c) const { return parts_[c]; }
    bool is_zero() const;
    bool depends_on_y() const;
    bool depends_on_t() const;
    std::string text() const;

private:
    std::vector<Expression> parts_;
};

} // namespace peridyn
