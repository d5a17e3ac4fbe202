// SPDX-License-Identifier: Apache-2.0

#include "psense/geometry.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace psense;
using Catch::Approx;

namespace
{
    // Inner angle at vertex a of triangle (a, b, c), law of cosines
    double inner_angle(Point2 a, Point2 b, Point2 c)
    {
        const double ab = (b - a).norm(), ac = (c - a).norm(), bc = (c - b).norm();
        return rad2deg(std::acos((ab * ab + ac * ac - bc * bc) / (2.0 * ab * ac)));
    }

    const Point2 lab_tx1{2.7, 0.0};
    const Point2 lab_tx2{1.8, -1.4};
    const double lambda1 = wavelength(60.98e9);
    const double lambda2 = wavelength(60.985e9);
}

TEST_CASE("adoa of the lab geometry matches the law of cosines", "[geometry]")
{
    const Point2 rx{};
    const double rx_oracle = inner_angle(rx, lab_tx1, lab_tx2);
    const double tx1_oracle = inner_angle(lab_tx1, rx, lab_tx2);
    // Frozen from the oracle above
    CHECK(rx_oracle == Approx(37.874983651098205).epsilon(1e-14));
    CHECK(tx1_oracle == Approx(57.264773727892404).epsilon(1e-14));

    const auto r = adoa_from_positions(lab_tx1, lab_tx2);
    CHECK_FALSE(r.collinear);
    CHECK(r.adoa.phi_rx == Approx(37.874983651098205).margin(1e-9));
    CHECK(r.adoa.phi_tx1 == Approx(57.264773727892404).margin(1e-9));
    CHECK(r.adoa.half_plane == -1);
    // The field estimates quoted for the experiment were 39 and 58 degrees
    CHECK(std::abs(r.adoa.phi_rx - 39.0) < 1.5);
    CHECK(std::abs(r.adoa.phi_tx1 - 58.0) < 1.0);
}

TEST_CASE("adoa special triangles", "[geometry]")
{
    const auto r = adoa_from_positions({1, 0}, {1, 1});
    CHECK(r.adoa.phi_rx == Approx(45.0).margin(1e-12));
    CHECK(r.adoa.phi_tx1 == Approx(90.0).margin(1e-12));
    CHECK(r.adoa.half_plane == 1);
    CHECK(adoa_from_positions({2, 0}, {4, 0}).collinear);
}

TEST_CASE("tx2_position examples", "[geometry]")
{
    const Point2 p = tx2_position({37.874983651098205, 57.264773727892404, -1}, 2.7);
    CHECK(p.x == Approx(1.8).margin(1e-9));
    CHECK(p.y == Approx(-1.4).margin(1e-9));

    const Point2 q = tx2_position({45.0, 90.0, 1}, 1.0);
    CHECK(q.x == Approx(1.0).margin(1e-12));
    CHECK(q.y == Approx(1.0).margin(1e-12));

    const Point2 e = tx2_position({60.0, 60.0, 1}, 1.0);
    CHECK(e.x == Approx(0.5).margin(1e-12));
    CHECK(e.y == Approx(std::sqrt(3.0) / 2.0).margin(1e-12));
}

TEST_CASE("adoa round trip on random triangles", "[geometry][property]")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-5.0, 5.0), dd(0.3, 8.0);
    int checked = 0;
    while (checked < 500)
    {
        const double d = dd(rng);
        const Point2 b{u(rng), u(rng)};
        if (std::abs(b.y) < 1e-2 || b.norm() < 1e-2)
            continue;
        const auto r = adoa_from_positions({d, 0.0}, b);
        REQUIRE_FALSE(r.collinear);
        const Point2 back = tx2_position(r.adoa, d);
        CHECK((back - b).norm() <= 1e-9);
        const auto again = adoa_from_positions({d, 0.0}, back);
        CHECK(std::abs(again.adoa.phi_rx - r.adoa.phi_rx) <= 1e-9);
        CHECK(std::abs(again.adoa.phi_tx1 - r.adoa.phi_tx1) <= 1e-9);
        ++checked;
    }
}

TEST_CASE("infeasible adoa is rejected", "[geometry]")
{
    CHECK_THROWS_AS((AdoaPair{100.0, 90.0, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((AdoaPair{40.0, 50.0, 0}.validate()), std::invalid_argument);
    CHECK_NOTHROW((AdoaPair{40.0, 50.0, 1}.validate()));
}

TEST_CASE("blocker_position sums velocities", "[geometry]")
{
    MotionParams a{2.7, {1, 2}, {{0.5, -0.5}}};
    const Point2 p2 = blocker_position(a, 2, 0.2);
    CHECK(p2.x == Approx(1.1));
    CHECK(p2.y == Approx(1.9));
    CHECK(blocker_position(a, 1, 0.2) == Point2{1, 2});

    MotionParams b{2.7, {0, 1}, {{1, 0}, {0, 1}}};
    const Point2 p3 = blocker_position(b, 3, 0.2);
    CHECK(p3.x == Approx(0.2));
    CHECK(p3.y == Approx(1.2));
    CHECK_THROWS_AS(blocker_position(b, 0, 0.2), std::out_of_range);
    CHECK_THROWS_AS(blocker_position(b, 4, 0.2), std::out_of_range);

    MotionParams c{1.0, {0.3, -0.7}, {{0.1, 0.4}, {-1.2, 0.5}, {0.0, 2.0}, {0.7, -0.3}}};
    for (std::size_t k = 1; k <= 4; ++k)
    {
        const Point2 step = blocker_position(c, k + 1, 0.2) - blocker_position(c, k, 0.2);
        CHECK(step.x == Approx(c.velocities[k - 1].vx * 0.2).margin(1e-15));
        CHECK(step.y == Approx(c.velocities[k - 1].vy * 0.2).margin(1e-15));
    }
}

TEST_CASE("aoa examples and scale invariance", "[geometry]")
{
    CHECK(aoa({1, 1}) == Approx(45.0));
    CHECK(aoa({2.28, 0}) == Approx(0.0).margin(1e-12));
    CHECK(aoa({0, 2}) == Approx(90.0));
    CHECK(aoa({1, -1}) == Approx(45.0));
    CHECK_THROWS_AS(aoa({0, 0}), GeometryError);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-4.0, 4.0), c(1e-3, 1e3);
    for (int i = 0; i < 200; ++i)
    {
        const Point2 p{u(rng), u(rng)};
        CHECK(aoa(p * c(rng)) == Approx(aoa(p)).margin(1e-12));
    }
}

TEST_CASE("bistatic Doppler examples", "[geometry]")
{
    // Oracle: (1/lambda) (unit(p - tx) + unit(p)) . v evaluated by hand
    auto oracle = [](Point2 p, Velocity2 v, Point2 tx, double lambda) {
        const Point2 a = p - tx;
        const double ux = a.x / a.norm() + p.x / p.norm();
        const double uy = a.y / a.norm() + p.y / p.norm();
        return (ux * v.vx + uy * v.vy) / lambda;
    };
    const double f1 = oracle({1, 1}, {0, -1}, lab_tx1, 4.9163e-3);
    const double f2 = oracle({1, 1}, {0, -1}, lab_tx2, 4.91585e-3);
    CHECK(f1 == Approx(-247.0).margin(0.05));
    CHECK(f2 == Approx(-336.8).margin(0.05));

    CHECK(bistatic_doppler({1, 1}, {0, -1}, lab_tx1, 4.9163e-3) == Approx(f1).epsilon(1e-14));
    CHECK(bistatic_doppler({1, 1}, {0, -1}, lab_tx2, 4.91585e-3) == Approx(f2).epsilon(1e-14));
    CHECK(bistatic_doppler({1.35, 0}, {0.3, -0.9}, lab_tx1, lambda1) == Approx(0.0).margin(1e-9));
    CHECK_THROWS_AS(bistatic_doppler({0, 0}, {1, 0}, lab_tx1, lambda1), GeometryError);
    CHECK_THROWS_AS(bistatic_doppler(lab_tx1, {1, 0}, lab_tx1, lambda1), GeometryError);
}

TEST_CASE("bistatic Doppler is linear in velocity and vanishes on the baseline", "[geometry][property]")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.01, 0.99);
    for (int i = 0; i < 200; ++i)
    {
        const Point2 p{u(rng), u(rng)};
        const Velocity2 v1{u(rng), u(rng)}, v2{u(rng), u(rng)};
        const double a = u(rng), b = u(rng);
        const double lhs = bistatic_doppler(p, {a * v1.vx + b * v2.vx, a * v1.vy + b * v2.vy}, lab_tx2, lambda2);
        const double rhs = a * bistatic_doppler(p, v1, lab_tx2, lambda2) + b * bistatic_doppler(p, v2, lab_tx2, lambda2);
        CHECK(lhs == Approx(rhs).margin(1e-9 * (1.0 + std::abs(rhs))));

        const Point2 on_line = lab_tx2 * s(rng);
        CHECK(std::abs(bistatic_doppler(on_line, v1, lab_tx2, lambda2)) <= 1e-9);
    }
}

TEST_CASE("true_features chain the single-point models", "[geometry]")
{
    const AdoaPair adoa{37.874983651098205, 57.264773727892404, -1};
    MotionParams mp{2.7, {1, 1}, {{0, -1}}};
    const auto h = true_features(mp, adoa, {lambda1, lambda2}, 0.2);
    REQUIRE(h.size() == 1);
    CHECK(h[0].aoa == Approx(45.0));
    CHECK(h[0].f1 == Approx(-247.0).margin(0.1));
    CHECK(h[0].f2 == Approx(-336.8).margin(0.1));

    MotionParams still{2.7, {1.5, 0.8}, {{0, 0}, {0, 0}, {0, 0}}};
    for (const auto &t : true_features(still, adoa, {lambda1, lambda2}, 0.2))
    {
        CHECK(t.f1 == 0.0);
        CHECK(t.f2 == 0.0);
        CHECK(t.aoa == Approx(aoa({1.5, 0.8})));
    }

    // Two sweeps against a per-sweep evaluation
    MotionParams two{2.7, {2.0, 1.5}, {{-0.3, -0.6}, {-0.5, -0.4}}};
    const auto h2 = true_features(two, adoa, {lambda1, lambda2}, 0.2);
    const Point2 tx2 = tx2_position(adoa, 2.7);
    const Point2 p2{2.0 - 0.06, 1.5 - 0.12};
    CHECK(h2[1].aoa == Approx(aoa(p2)).epsilon(1e-14));
    CHECK(h2[1].f1 == Approx(bistatic_doppler(p2, {-0.5, -0.4}, lab_tx1, lambda1)).epsilon(1e-12));
    CHECK(h2[1].f2 == Approx(bistatic_doppler(p2, {-0.5, -0.4}, tx2, lambda2)).epsilon(1e-12));
}
