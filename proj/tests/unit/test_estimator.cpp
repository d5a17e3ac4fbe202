// SPDX-License-Identifier: Apache-2.0

#include "psense/estimator.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace psense;
using Catch::Approx;

namespace
{
    constexpr double td = 0.2;
    const std::array<double, 2> wl{wavelength(60.98e9), wavelength(60.985e9)};

    AdoaPair field_adoa() { return adoa_from_positions({2.7, 0.0}, {1.8, -1.4}).adoa; }

    // Straight walk crossing the RX-TX1 link at x = 2 after `cross` seconds
    MotionParams truth(std::size_t k = 15, double d = 2.7, double cross = 3.1)
    {
        const double th = deg2rad(30.0);
        const Velocity2 v{-0.8 * std::sin(th), -0.8 * std::cos(th)};
        return {d, Point2{2.0, 0.0} + v * -cross, std::vector<Velocity2>(k, v)};
    }

    std::vector<FeatureVector> features_of(const MotionParams &mp, const AdoaPair &adoa)
    {
        const auto tf = true_features(mp, adoa, wl, td);
        std::vector<FeatureVector> out(tf.size());
        for (std::size_t k = 0; k < tf.size(); ++k)
        {
            out[k].sweep = k + 1;
            out[k].t_start = td * static_cast<double>(k);
            out[k].aoa = tf[k].aoa;
            out[k].f1 = tf[k].f1;
            out[k].f2 = tf[k].f2;
        }
        return out;
    }

    ObservationModel model_of(std::span<const FeatureVector> fv, const AdoaPair &adoa,
                              FeatureWeights w = FeatureWeights::inverse_variance(10.0, 20.0))
    {
        return {fv, adoa, wl, td, w};
    }

    MotionParams random_params(std::mt19937_64 &rng, std::size_t k)
    {
        std::uniform_real_distribution<double> d(1.5, 5.0), px(0.5, 4.0), py(0.5, 3.0), v(-1.2, 1.2);
        MotionParams mp{d(rng), {px(rng), py(rng)}, {}};
        for (std::size_t i = 0; i < k; ++i)
            mp.velocities.push_back({v(rng), v(rng)});
        return mp;
    }

    std::vector<FeatureVector> random_features(std::mt19937_64 &rng, std::size_t k)
    {
        std::uniform_real_distribution<double> a(5.0, 80.0), f(-400.0, 400.0), off(0.0, td);
        std::bernoulli_distribution keep(0.85);
        std::vector<FeatureVector> fv(k);
        for (std::size_t i = 0; i < k; ++i)
        {
            fv[i].sweep = i + 1;
            fv[i].t_start = td * static_cast<double>(i);
            if (i < 3 || keep(rng))
                fv[i].aoa = a(rng);
            if (keep(rng))
                fv[i].f1 = f(rng);
            if (keep(rng))
                fv[i].f2 = f(rng);
            fv[i].aoa_dwell = off(rng);
            fv[i].f1_dwell = off(rng);
            fv[i].f2_dwell = off(rng);
        }
        return fv;
    }

    double tx2_error(const Estimate &e, double d_true, const AdoaPair &adoa)
    {
        return (e.tx2 - tx2_position(adoa, d_true)).norm();
    }
}

TEST_CASE("analytic Jacobian matches central differences", "[estimator]")
{
    std::mt19937_64 rng(11);
    const auto adoa = field_adoa();
    for (bool dwell : {false, true})
        for (int trial = 0; trial < 100; ++trial)
        {
            const std::size_t k = 4 + static_cast<std::size_t>(trial % 5);
            const auto mp = random_params(rng, k);
            const auto fv = random_features(rng, k);
            auto model = model_of(fv, adoa);
            model.dwell_timing = dwell;

            const Eigen::MatrixXd jac = jacobian(mp, model);
            const Eigen::VectorXd x = pack(mp);
            Eigen::MatrixXd num(jac.rows(), jac.cols());
            for (Eigen::Index c = 0; c < x.size(); ++c)
            {
                const double h = 1e-6 * std::max(1.0, std::abs(x(c)));
                Eigen::VectorXd xp = x, xm = x;
                xp(c) += h;
                xm(c) -= h;
                num.col(c) = (residuals(unpack(xp), model) - residuals(unpack(xm), model)) / (2.0 * h);
            }
            CHECK((jac - num).norm() <= 1e-5 * std::max(1.0, num.norm()));
        }
}

TEST_CASE("residuals only depend on the past", "[estimator]")
{
    std::mt19937_64 rng(12);
    const auto mp = random_params(rng, 6);
    std::vector<FeatureVector> fv = random_features(rng, 6);
    for (auto &z : fv)
    {
        z.aoa = 30.0;
        z.f1 = 10.0;
        z.f2 = -10.0;
    }
    const auto model = model_of(fv, field_adoa());
    const Eigen::MatrixXd jac = jacobian(mp, model);
    // Rows of sweep k do not touch velocities of later sweeps
    for (Eigen::Index k = 0; k < 6; ++k)
        for (Eigen::Index r = 3 * k; r < 3 * k + 3; ++r)
            for (Eigen::Index n = k + 1; n < 6; ++n)
            {
                CHECK(jac(r, 3 + 2 * n) == 0.0);
                CHECK(jac(r, 4 + 2 * n) == 0.0);
            }
    // AoA rows never depend on d
    for (Eigen::Index k = 0; k < 6; ++k)
        CHECK(jac(3 * k, 0) == 0.0);
}

TEST_CASE("Doppler derivative at rest", "[estimator]")
{
    // With v = 0 the Doppler rows only see the current velocity; r = z - h flips the sign
    MotionParams mp{2.7, {1.0, 1.0}, std::vector<Velocity2>(3, Velocity2{})};
    std::vector<FeatureVector> fv(3);
    for (std::size_t k = 0; k < 3; ++k)
    {
        fv[k].sweep = k + 1;
        fv[k].aoa = 45.0;
        fv[k].f1 = 0.0;
        fv[k].f2 = 0.0;
    }
    const auto model = model_of(fv, field_adoa(), {1.0, 1.0, 1.0});
    const Eigen::MatrixXd jac = jacobian(mp, model);
    const Point2 p{1.0, 1.0}, tx{2.7, 0.0};
    const Point2 u_rx = p * (1.0 / p.norm());
    const Point2 u_tx = (p - tx) * (1.0 / (p - tx).norm());
    for (Eigen::Index k = 0; k < 3; ++k)
    {
        const Eigen::Index row = 3 * k + 1;
        CHECK(jac(row, 0) == Approx(0.0).margin(1e-12));
        CHECK(jac(row, 1) == Approx(0.0).margin(1e-12));
        CHECK(jac(row, 3 + 2 * k) == Approx(-(u_rx.x + u_tx.x) / wl[0]).epsilon(1e-12));
        CHECK(jac(row, 4 + 2 * k) == Approx(-(u_rx.y + u_tx.y) / wl[0]).epsilon(1e-12));
    }
}

TEST_CASE("objective at the truth and under perturbation", "[estimator]")
{
    const auto adoa = field_adoa();
    const auto mp = truth();
    auto fv = features_of(mp, adoa);
    const auto w = FeatureWeights::inverse_variance(10.0, 20.0);
    CHECK(objective(mp, model_of(fv, adoa, w)) <= 1e-12);

    const double delta = 3.0;
    fv[4].aoa = *fv[4].aoa + delta;
    const Eigen::VectorXd r = residuals(mp, model_of(fv, adoa, w));
    Eigen::Index hit = 0;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (std::abs(r(i)) > 1e-9)
        {
            ++hit;
            CHECK(std::abs(r(i)) == Approx(std::sqrt(w.aoa) * deg2rad(delta)).epsilon(1e-9));
        }
    CHECK(hit == 1);
}

TEST_CASE("objective equals the weighted trace form", "[estimator]")
{
    std::mt19937_64 rng(13);
    const auto adoa = field_adoa();
    const FeatureWeights w{2.0, 0.3, 0.7};
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto mp = random_params(rng, 7);
        auto fv = random_features(rng, 7);
        for (auto &z : fv)
        {
            z.f1 = z.f1.value_or(50.0);
            z.f2 = z.f2.value_or(-50.0);
            z.aoa = z.aoa.value_or(20.0);
        }
        const auto tf = true_features(mp, adoa, wl, td);
        // tr{W (Z - H)^T (Z - H)} with Z, H as 3 x K and W = diag(w)
        Eigen::Matrix3Xd dz(3, 7);
        for (std::size_t k = 0; k < 7; ++k)
        {
            const auto c = static_cast<Eigen::Index>(k);
            dz(0, c) = deg2rad(*fv[k].aoa - tf[k].aoa);
            dz(1, c) = *fv[k].f1 - tf[k].f1;
            dz(2, c) = *fv[k].f2 - tf[k].f2;
        }
        const Eigen::Matrix3d wd = Eigen::Vector3d(w.aoa, w.doppler1, w.doppler2).asDiagonal();
        const double expected = (wd * dz * dz.transpose()).trace();
        CHECK(objective(mp, model_of(fv, adoa, w)) == Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("missing measurements contribute no rows", "[estimator]")
{
    const auto adoa = field_adoa();
    const auto mp = truth(6);
    auto fv = features_of(mp, adoa);
    fv[2].f1.reset();
    fv[3].aoa.reset();
    fv[3].f1.reset();
    fv[3].f2.reset();
    const auto model = model_of(fv, adoa);
    CHECK(residuals(mp, model).size() == 18 - 4);
    CHECK(jacobian(mp, model).rows() == 14);
    CHECK(valid_sweeps(fv) == 5);
}

TEST_CASE("Levenberg-Marquardt", "[estimator]")
{
    const auto adoa = field_adoa();
    const auto mp = truth(10);
    const auto fv = features_of(mp, adoa);
    const auto model = model_of(fv, adoa);
    EstimatorConfig cfg;

    SECTION("the truth is a fixed point")
    {
        const auto res = lm_fit(mp, model, cfg);
        CHECK(res.objective <= 1e-12);
        CHECK(res.params.d == Approx(mp.d).margin(1e-9));
    }

    SECTION("10 percent perturbation is recovered")
    {
        std::mt19937_64 rng(14);
        std::uniform_real_distribution<double> s(-0.1, 0.1);
        int recovered = 0;
        for (int trial = 0; trial < 5; ++trial)
        {
            MotionParams init = mp;
            init.d *= 1.0 + s(rng);
            init.p1 = {init.p1.x * (1.0 + s(rng)), init.p1.y * (1.0 + s(rng))};
            for (auto &v : init.velocities)
                v = {v.vx * (1.0 + s(rng)), v.vy * (1.0 + s(rng))};
            const auto res = lm_fit(init, model, cfg);
            for (std::size_t i = 1; i < res.accepted_objectives.size(); ++i)
                CHECK(res.accepted_objectives[i] <= res.accepted_objectives[i - 1]);
            if (std::abs(res.params.d - mp.d) <= 1e-3)
                ++recovered;
        }
        CHECK(recovered == 5);
    }
}

TEST_CASE("initialisation", "[estimator]")
{
    const auto adoa = field_adoa();
    const auto mp = truth();
    const auto fv = features_of(mp, adoa);
    const auto model = model_of(fv, adoa);

    const Point2 p = blocker_position(mp, 3, td);
    const auto v = doppler_consistent_velocity(p, mp.d, adoa, wl, fv[2].f1.value(), fv[2].f2.value());
    REQUIRE(v);
    CHECK(bistatic_doppler(p, *v, {mp.d, 0.0}, wl[0]) == Approx(*fv[2].f1).margin(1e-9));
    CHECK(bistatic_doppler(p, *v, tx2_position(adoa, mp.d), wl[1]) == Approx(*fv[2].f2).margin(1e-9));

    EstimatorConfig cfg;
    const auto a = init_candidates(model, cfg);
    const auto b = init_candidates(model, cfg);
    REQUIRE(a.size() == cfg.starts);
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        CHECK(a[i].d == b[i].d);
        CHECK(a[i].p1 == b[i].p1);
        CHECK(a[i].d >= cfg.d_bounds[0]);
        CHECK(a[i].d <= cfg.d_bounds[1]);
        CHECK(a[i].sweeps() == fv.size());
        for (const auto &vel : a[i].velocities)
            CHECK(vel.speed() <= cfg.speed_bound + 1e-12);
    }
}

TEST_CASE("noiseless features give the link distance", "[estimator]")
{
    const auto adoa = field_adoa();
    for (double d : {2.7, 4.0})
    {
        const auto mp = truth(15, d);
        const auto fv = features_of(mp, adoa);
        const auto e = estimate(model_of(fv, adoa), EstimatorConfig{});
        CHECK(e.params.d == Approx(d).margin(1e-2));
        CHECK(tx2_error(e, d, adoa) <= 1e-2);
        for (std::size_t k = 1; k <= 15; ++k)
            CHECK((blocker_position(e.params, k, td) - blocker_position(mp, k, td)).norm() <= 1e-2);
    }
}

TEST_CASE("noisy features mostly locate TX2", "[estimator][montecarlo]")
{
    // Per-sweep velocities leave d poorly determined on short tracks, so this uses 30 sweeps
    const auto adoa = field_adoa();
    const auto mp = truth(30, 2.7, 3.7);
    const auto clean = features_of(mp, adoa);
    EstimatorConfig cfg;
    cfg.weights = FeatureWeights::inverse_variance(5.0, 10.0);
    std::mt19937_64 rng(15);
    std::normal_distribution<double> na(0.0, 5.0), nf(0.0, 10.0);
    int good = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t)
    {
        auto fv = clean;
        for (auto &z : fv)
        {
            z.aoa = *z.aoa + na(rng);
            z.f1 = *z.f1 + nf(rng);
            z.f2 = *z.f2 + nf(rng);
        }
        cfg.seed = static_cast<std::uint64_t>(t + 1);
        const auto e = estimate(model_of(fv, adoa, cfg.weights), cfg);
        if (tx2_error(e, mp.d, adoa) <= 0.2)
            ++good;
    }
    INFO("trials within 0.2 m: " << good);
    CHECK(good >= 40);
}

TEST_CASE("weight scaling leaves the minimiser unchanged", "[estimator]")
{
    const auto adoa = field_adoa();
    const auto mp = truth(10);
    auto fv = features_of(mp, adoa);
    std::mt19937_64 rng(16);
    std::normal_distribution<double> na(0.0, 2.0), nf(0.0, 5.0);
    for (auto &z : fv)
    {
        z.aoa = *z.aoa + na(rng);
        z.f1 = *z.f1 + nf(rng);
    }
    const FeatureWeights w = FeatureWeights::inverse_variance(5.0, 10.0);
    const FeatureWeights w10{10.0 * w.aoa, 10.0 * w.doppler1, 10.0 * w.doppler2};
    MotionParams init = mp;
    init.d = 2.5;
    const auto a = lm_fit(init, model_of(fv, adoa, w), EstimatorConfig{});
    const auto b = lm_fit(init, model_of(fv, adoa, w10), EstimatorConfig{});
    CHECK(b.params.d == Approx(a.params.d).margin(1e-6));
    CHECK(b.objective == Approx(10.0 * a.objective).epsilon(1e-6));
}

TEST_CASE("estimator edge cases", "[estimator]")
{
    const auto adoa = field_adoa();
    const auto mp = truth();
    auto fv = features_of(mp, adoa);

    SECTION("repeated runs are identical")
    {
        const auto a = estimate(model_of(fv, adoa), EstimatorConfig{});
        const auto b = estimate(model_of(fv, adoa), EstimatorConfig{});
        CHECK(a.params.d == b.params.d);
        CHECK(a.start_objectives == b.start_objectives);
    }

    SECTION("fewer than three valid sweeps")
    {
        for (std::size_t k = 2; k < fv.size(); ++k)
            fv[k].aoa.reset();
        CHECK_THROWS_AS(estimate(model_of(fv, adoa), EstimatorConfig{}), EstimationError);
    }

    SECTION("filling unobserved sweeps keeps the objective")
    {
        for (std::size_t k : {0u, 1u, 6u, 7u, 8u, 14u})
        {
            fv[k].aoa.reset();
            fv[k].f1.reset();
            fv[k].f2.reset();
        }
        MotionParams p = mp;
        p.velocities[0] = {2.5, 0.0};
        p.velocities[6] = {-1.0, 1.0};
        p.velocities[7] = {1.0, -1.0};
        p.velocities[14] = {0.0, 3.0};
        const auto model = model_of(fv, adoa);
        const double before = objective(p, model);
        fill_unobserved(p, fv, td);
        CHECK(objective(p, model) == Approx(before).margin(1e-12));
        CHECK(p.velocities[0] == p.velocities[2]);
        CHECK(p.velocities[14] == p.velocities[13]);
        CHECK(p.velocities[6] == p.velocities[7]);
    }
}
