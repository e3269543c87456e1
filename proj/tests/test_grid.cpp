#include <doctest.h>

#include <cmath>

#include "peridyn/error.hpp"
#include "peridyn/expression.hpp"
#include "peridyn/grid.hpp"

using namespace peridyn;

TEST_CASE("macro grid indexing round trip")
{
    const MacroGrid g = MacroGrid::box(3, {0, 0, 0}, {0.5, 0.25, 0.75}, {8, 4, 12});
    CHECK(g.spacing() == doctest::Approx(1.0 / 16));
    CHECK(g.node_count() == 8 * 4 * 12);
    CHECK(g.volume() == doctest::Approx(0.5 * 0.25 * 0.75));
    for (std::size_t n = 0; n < g.node_count(); n += 7)
        CHECK(g.linear(g.multi_index(n)) == n);
    const Point3 x = g.coord(g.linear({3, 2, 5}));
    CHECK(x[0] == doctest::Approx(3.0 / 16));
    CHECK(x[2] == doctest::Approx(5.0 / 16));
    CHECK_FALSE(g.contains({-1, 0, 0}));
    CHECK_FALSE(g.contains({0, 4, 0}));
}

TEST_CASE("box with unequal spacing is rejected")
{
    CHECK_THROWS_AS(MacroGrid::box(2, {0, 0, 0}, {1, 1, 0}, {8, 6, 1}), invalid_argument);
}

TEST_CASE("cell grid wraps periodically")
{
    const CellGrid c(2, 8);
    CHECK(c.coord(0)[0] == doctest::Approx(-0.5));
    CHECK(c.wrapped({-1, 9, 0}) == c.linear({7, 1, 0}));
    CHECK(c.weight() == doctest::Approx(1.0 / 64));
}

TEST_CASE("nearest image lands in [-1/2, 1/2)")
{
    const Point3 y = nearest_image({1.0, 0.74, -0.5}, 3);
    CHECK(y[0] == doctest::Approx(0.0));
    CHECK(y[1] == doctest::Approx(-0.26));
    CHECK(y[2] == doctest::Approx(-0.5));
}

TEST_CASE("inverse_scale accepts unit fractions only")
{
    CHECK(inverse_scale(0.125) == 8);
    CHECK(inverse_scale(1.0 / 3.0) == 3);
    CHECK_THROWS_AS(inverse_scale(0.3), invalid_argument);
}

TEST_CASE("scale map agrees with direct reduction of x/eps")
{
    const MacroGrid g = MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {64, 1, 1});
    const CellGrid c(1, 32);
    for (int n : {2, 4, 8, 16}) {
        const ScaleMap map(g, c, n);
        CHECK(map.stride() * c.spacing() == doctest::Approx(n * g.spacing()));
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const double y = g.coord(i)[0] * n;
            const double red = y - std::floor(y + 0.5);
            CHECK(c.coord(map.cell_of(i))[0] == doctest::Approx(red).epsilon(1e-12));
        }
    }
}

TEST_CASE("scale map rejects incommensurate grids")
{
    const MacroGrid g = MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {10, 1, 1});
    CHECK_THROWS_AS(ScaleMap(g, CellGrid(1, 16), 2), invalid_argument);
}

TEST_CASE("expression parsing and evaluation")
{
    EvalPoint p;
    p.x = {0.5, 2.0, 0.0};
    p.y = {0.25, 0, 0};
    p.t = 3.0;
    CHECK(Expression::parse("2^3^2").eval(p) == doctest::Approx(512));
    CHECK(Expression::parse("-2^2").eval(p) == doctest::Approx(-4));
    CHECK(Expression::parse("1 + 2*3 - 4/2").eval(p) == doctest::Approx(5));
    CHECK(Expression::parse("sin(pi*x1)").eval(p) == doctest::Approx(1.0));
    CHECK(Expression::parse("cos(2*pi*y1)").eval(p) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(Expression::parse("max(x2, t) + min(1, 2) + pow(2, 0.5)^2").eval(p) == doctest::Approx(6));
    CHECK(Expression::parse("exp(log(t))").eval(p) == doctest::Approx(3));
    CHECK(Expression::parse("0").is_constant_zero());
    CHECK(Expression::parse("x1*(1+cos(y1))").depends_on_y());
    CHECK_FALSE(Expression::parse("x1*t").depends_on_y());
    CHECK(Expression::parse("x1*t").depends_on_t());
}

TEST_CASE("expression errors")
{
    CHECK_THROWS_AS(Expression::parse("sin(x1"), invalid_argument);
    CHECK_THROWS_AS(Expression::parse("foo(1)"), invalid_argument);
    CHECK_THROWS_AS(Expression::parse("x4"), invalid_argument);
    CHECK_THROWS_AS(Expression::parse("1 +"), invalid_argument);
    CHECK_THROWS_AS(VectorExpression::parse("x1, x2", 3), invalid_argument);
}

TEST_CASE("vector expression splits on top-level commas")
{
    const auto v = VectorExpression::parse("max(x1, x2), 0, t", 3);
    CHECK(v.dim() == 3);
    EvalPoint p;
    p.x = {1, 2, 0};
    p.t = 4;
    CHECK(v.component(0).eval(p) == doctest::Approx(2));
    CHECK(v.component(2).eval(p) == doctest::Approx(4));
    CHECK(VectorExpression::zero(2).is_zero());
}
