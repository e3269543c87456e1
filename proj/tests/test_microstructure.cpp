#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "peridyn/error.hpp"
#include "peridyn/microstructure.hpp"
#include "support.hpp"

using namespace peridyn;

namespace {

Microstructure ball3(double R = 0.25, PhaseParams p = testing::standard_params())
{
    p.delta = 0.05;
    return Microstructure({3, Shape::ball, R}, p);
}

} // namespace

TEST_CASE("indicator on the ball cell")
{
    const auto ms = ball3();
    CHECK(ms.indicator({0, 0, 0}) == Phase::inclusion);
    CHECK(ms.indicator({0.49, 0, 0}) == Phase::matrix);
    CHECK(ms.indicator({1.0, 0, 0}) == Phase::inclusion);
    CHECK(ms.chi_f({0.1, 0.1, 0.1}) + ms.chi_m({0.1, 0.1, 0.1}) == 1.0);
}

TEST_CASE("fiber and slab shapes")
{
    PhaseParams p = testing::standard_params();
    const Microstructure fiber({2, Shape::fiber, 0.2}, p);
    CHECK(fiber.indicator({0.45, 0.1, 0}) == Phase::inclusion);
    CHECK(fiber.indicator({0.0, 0.3, 0}) == Phase::matrix);
    const Microstructure slab({2, Shape::slab, 0.2}, p);
    CHECK(slab.indicator({0.1, 0.45, 0}) == Phase::inclusion);
    CHECK(slab.indicator({0.3, 0.0, 0}) == Phase::matrix);
    CHECK_THROWS_AS(Microstructure({1, Shape::fiber, 0.2}, p), invalid_argument);
}

TEST_CASE("density by phase")
{
    const auto ms = ball3();
    CHECK(ms.density({0, 0, 0}) == 2.0);
    CHECK(ms.density({0.4, 0.4, 0}) == 1.0);
    PhaseParams p = testing::homogeneous_params(1.0, 1.7);
    const auto h = ball3(0.25, p);
    CHECK(h.density({0, 0, 0}) == 1.7);
    CHECK(h.density({0.4, 0, 0}) == 1.7);
}

TEST_CASE("bond strength table")
{
    const auto ms = ball3();
    const double d = ms.params().delta;
    CHECK(ms.bond_strength({0, 0, 0}, {0.01, 0, 0}) == 10.0);
    CHECK(ms.bond_strength({0.24, 0, 0}, {0.26, 0, 0}) == 3.0);
    CHECK(ms.bond_strength({0.4, 0, 0}, {0.4 + 0.5 * d, 0, 0}) == 1.0);
    CHECK(ms.bond_strength_cutoff({0.4, 0, 0}, {0.4 + 1.5 * d, 0, 0}, d) == 0.0);
    CHECK(ms.bond_strength_cutoff({0.4, 0, 0}, {0.4 + 0.5 * d, 0, 0}, d) == 1.0);
    CHECK(ms.bond_strength({0, 0, 0}, {0, 0, 0}) == 10.0);
    CHECK(ms.bond_strength({0.4, 0.4, 0.4}, {0.4, 0.4, 0.4}) == 1.0);
    CHECK_THROWS_AS(ms.bond_strength_cutoff({0, 0, 0}, {0, 0, 0}, 0.0), invalid_argument);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    double worst = 0;
    for (int k = 0; k < 10000; ++k) {
        const Point3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
        worst = std::max(worst, std::abs(ms.bond_strength(a, b) - ms.bond_strength(b, a)));
    }
    CHECK(worst == 0.0);
}

TEST_CASE("volume fractions")
{
    const auto [tf, tm] = ball3().volume_fractions(64);
    CHECK(tf == doctest::Approx(4.0 / 3.0 * std::numbers::pi * std::pow(0.25, 3)).epsilon(0.02));
    CHECK(tf + tm == 1.0);
    const auto [z, one] = ball3(0.0).volume_fractions(32);
    CHECK(z == 0.0);
    CHECK(one == 1.0);
}

TEST_CASE("validation margins")
{
    CHECK(ball3(0.25).validate().violations.empty());
    PhaseParams p = testing::standard_params();
    p.delta = 0.2;
    CHECK_FALSE(Microstructure({3, Shape::ball, 0.45}, p).validate().ok());
    PhaseParams q = testing::standard_params();
    q.C_f = 1;
    q.C_m = 5;
    const auto v = Microstructure({1, Shape::ball, 0.25}, q).validate();
    CHECK(v.ok());
    CHECK_FALSE(v.warnings.empty());
}

TEST_CASE("mollified indicators")
{
    PhaseParams p = testing::standard_params();
    const Microstructure ms({1, Shape::ball, 0.25}, p);
    const CellGrid g(1, 256);
    const auto sharp = ms.sharp_coefficients(g);

    const auto m = ms.mollify(0.05, g);
    for (std::size_t j = 0; j < g.node_count(); ++j) {
        CHECK(m.chi_f[j] >= -1e-15);
        CHECK(m.chi_f[j] <= 1 + 1e-15);
        // chi_m is 1 - chi_f by construction; the pointwise identity is the sum of weights
        const double y = g.coord(j)[0];
        const double dist = std::min(std::abs(std::abs(y) - 0.25), std::abs(std::abs(y) - 0.75));
        if (dist > 0.05 + g.spacing())
            CHECK(m.chi_f[j] == doctest::Approx(sharp.chi_f[j]).epsilon(1e-14));
    }

    // L1 distance to the sharp field shrinks with beta
    double prev = 1e9;
    for (double beta : {0.08, 0.04, 0.02}) {
        const auto mb = ms.mollify(beta, g);
        double l1 = 0;
        for (std::size_t j = 0; j < g.node_count(); ++j)
            l1 += std::abs(mb.chi_f[j] - sharp.chi_f[j]) * g.weight();
        CHECK(l1 < prev);
        prev = l1;
    }
    CHECK_THROWS_AS(ms.mollify(0.2, g), invalid_argument);
}

TEST_CASE("alpha_bar matches brute force")
{
    PhaseParams p = testing::standard_params();
    p.beta = 0.05;
    const Microstructure ms({1, Shape::ball, 0.25}, p);
    const auto c = ms.coefficients(CellGrid(1, 64));
    double best = 0;
    for (std::size_t j = 0; j < 64; ++j)
        for (std::size_t k = 0; k < 64; ++k)
            best = std::max(best, c.rho_inv[j] * c.alpha(j, k));
    CHECK(c.alpha_bar() == doctest::Approx(best).epsilon(1e-14));
}

TEST_CASE("coefficients are cell periodic")
{
    PhaseParams p = testing::standard_params();
    p.delta = 0.05;
    for (Shape s : {Shape::ball, Shape::fiber, Shape::slab}) {
        const Microstructure ms({3, s, 0.3}, p);
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (int k = 0; k < 500; ++k) {
            const Point3 y{u(rng), u(rng), u(rng)};
            for (int a = 0; a < 3; ++a) {
                Point3 z = y;
                z[a] += 1.0;
                CHECK(ms.indicator(y) == ms.indicator(z));
                CHECK(ms.density(y) == ms.density(z));
            }
        }
    }
}

TEST_CASE("ball volume fraction converges under refinement")
{
    const double exact = 4.0 / 3.0 * std::numbers::pi * std::pow(0.3, 3);
    PhaseParams p = testing::standard_params();
    p.delta = 0.05;
    const Microstructure ms({3, Shape::ball, 0.3}, p);
    // lattice counting error oscillates, check an O(1/res) envelope
    for (int res : {8, 16, 32, 64, 128, 256})
        CHECK(std::abs(ms.volume_fractions(res).first - exact) <= 0.1 / res);
}
