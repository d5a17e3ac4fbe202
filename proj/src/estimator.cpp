// SPDX-License-Identifier: Apache-2.0
//
// psense: passive mmWave sensing, blocker tracking and blockage prediction
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "psense/estimator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace psense
{
    FeatureWeights FeatureWeights::inverse_variance(double beamwidth_deg, double doppler_bin_hz)
    {
        const double sigma_aoa = deg2rad(beamwidth_deg);
        return {1.0 / (sigma_aoa * sigma_aoa), 1.0 / (doppler_bin_hz * doppler_bin_hz),
                1.0 / (doppler_bin_hz * doppler_bin_hz)};
    }

    void EstimatorConfig::validate() const
    {
        if (!(weights.aoa > 0.0 && weights.doppler1 > 0.0 && weights.doppler2 > 0.0))
            throw std::invalid_argument("estimator: feature weights must be positive");
        if (starts < 1)
            throw std::invalid_argument("estimator: at least one start is required");
        if (!(d_bounds[0] > 0.0 && d_bounds[1] > d_bounds[0]))
            throw std::invalid_argument("estimator: d_bounds must satisfy 0 < lo < hi");
        if (!(range_bounds[0] > 0.0 && range_bounds[1] > range_bounds[0]))
            throw std::invalid_argument("estimator: range_bounds must satisfy 0 < lo < hi");
        if (!(speed_bound > 0.0) || !(damping_init > 0.0))
            throw std::invalid_argument("estimator: speed_bound and damping_init must be positive");
        if (aoa_half_plane != 1 && aoa_half_plane != -1)
            throw std::invalid_argument("estimator: aoa_half_plane must be +1 or -1");
    }

    Eigen::VectorXd pack(const MotionParams &mp)
    {
        Eigen::VectorXd x(3 + 2 * static_cast<Eigen::Index>(mp.sweeps()));
        x(0) = mp.d;
        x(1) = mp.p1.x;
        x(2) = mp.p1.y;
        for (std::size_t k = 0; k < mp.sweeps(); ++k)
        {
            x(3 + 2 * static_cast<Eigen::Index>(k)) = mp.velocities[k].vx;
            x(4 + 2 * static_cast<Eigen::Index>(k)) = mp.velocities[k].vy;
        }
        return x;
    }

    MotionParams unpack(const Eigen::VectorXd &x)
    {
        MotionParams mp;
        mp.d = x(0);
        mp.p1 = {x(1), x(2)};
        const auto sweeps = (x.size() - 3) / 2;
        mp.velocities.resize(static_cast<std::size_t>(sweeps));
        for (Eigen::Index k = 0; k < sweeps; ++k)
            mp.velocities[static_cast<std::size_t>(k)] = {x(3 + 2 * k), x(4 + 2 * k)};
        return mp;
    }

    std::size_t valid_sweeps(std::span<const FeatureVector> features)
    {
        return static_cast<std::size_t>(
            std::count_if(features.begin(), features.end(), [](const FeatureVector &z) { return z.valid(); }));
    }

    namespace
    {
        void check_model(const MotionParams &mp, const ObservationModel &model)
        {
            mp.validate();
            if (model.features.size() != mp.sweeps())
                throw std::invalid_argument("estimator: feature count " + std::to_string(model.features.size()) +
                                            " does not match sweep count " + std::to_string(mp.sweeps()));
            if (valid_sweeps(model.features) < 3)
                throw EstimationError("estimator: fewer than 3 valid sweeps; the trajectory is not identifiable");
        }

        std::size_t residual_rows(std::span<const FeatureVector> features)
        {
            std::size_t rows = 0;
            for (const auto &z : features)
                rows += (z.aoa ? 1 : 0) + (z.f1 ? 1 : 0) + (z.f2 ? 1 : 0);
            return rows;
        }

        struct Link
        {
            Eigen::Vector2d u_sum;  // unit(p - tx) + unit(p)
            Eigen::Matrix2d dp;     // d(u_sum)/dp
            Eigen::Matrix2d dtx;    // d(u_sum)/d(tx)
        };

        Link link_geometry(const Eigen::Vector2d &p, const Eigen::Vector2d &tx)
        {
            const Eigen::Vector2d to_tx = p - tx;
            const double rt = to_tx.norm();
            const double rr = p.norm();
            if (rt == 0.0 || rr == 0.0)
                throw GeometryError("estimator: blocker coincides with a link endpoint");
            const Eigen::Vector2d ut = to_tx / rt;
            const Eigen::Vector2d ur = p / rr;
            const Eigen::Matrix2d pt = (Eigen::Matrix2d::Identity() - ut * ut.transpose()) / rt;
            const Eigen::Matrix2d pr = (Eigen::Matrix2d::Identity() - ur * ur.transpose()) / rr;
            return {ut + ur, pt + pr, -pt};
        }
    } // namespace

    Eigen::VectorXd residuals(const MotionParams &mp, const ObservationModel &model)
    {
        check_model(mp, model);
        const Point2 tx1{mp.d, 0.0};
        const Point2 tx2 = tx2_position(model.adoa, mp.d);
        const double wa = std::sqrt(model.weights.aoa);
        const double w1 = std::sqrt(model.weights.doppler1);
        const double w2 = std::sqrt(model.weights.doppler2);

        Eigen::VectorXd r(static_cast<Eigen::Index>(residual_rows(model.features)));
        Eigen::Index row = 0;
        Point2 p = mp.p1;
        for (std::size_t k = 0; k < mp.sweeps(); ++k)
        {
            const auto &z = model.features[k];
            const auto &v = mp.velocities[k];
            auto at = [&](double offset) { return model.dwell_timing ? p + v * offset : p; };
            if (z.aoa)
                r(row++) = wa * (deg2rad(*z.aoa) - deg2rad(aoa(at(z.aoa_dwell))));
            if (z.f1)
                r(row++) = w1 * (*z.f1 - bistatic_doppler(at(z.f1_dwell), v, tx1, model.wavelengths[0]));
            if (z.f2)
                r(row++) = w2 * (*z.f2 - bistatic_doppler(at(z.f2_dwell), v, tx2, model.wavelengths[1]));
            p = p + v * model.sweep_period;
        }
        return r;
    }

    double objective(const MotionParams &mp, const ObservationModel &model)
    {
        return residuals(mp, model).squaredNorm();
    }

    Eigen::MatrixXd jacobian(const MotionParams &mp, const ObservationModel &model)
    {
        check_model(mp, model);
        const auto k_total = static_cast<Eigen::Index>(mp.sweeps());
        const Eigen::Index cols = 3 + 2 * k_total;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(residual_rows(model.features)), cols);

        const Point2 tx2_unit = tx2_position(model.adoa, 1.0); // d(tx2)/dd
        const Eigen::Vector2d tx1(mp.d, 0.0);
        const Eigen::Vector2d tx2(mp.d * tx2_unit.x, mp.d * tx2_unit.y);
        const std::array<Eigen::Vector2d, 2> dtx_dd{Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(tx2_unit.x, tx2_unit.y)};
        const std::array<double, 2> w{std::sqrt(model.weights.doppler1), std::sqrt(model.weights.doppler2)};
        const double wa = std::sqrt(model.weights.aoa);
        const double td = model.sweep_period;

        // Gradient w.r.t. the evaluation point fans out to p1, every earlier
        // velocity and, through the dwell offset, the current one
        auto scatter_position = [&](Eigen::Index row, Eigen::Index k, double offset, const Eigen::RowVector2d &g) {
            jac.block<1, 2>(row, 1) += g;
            for (Eigen::Index n = 0; n < k; ++n)
                jac.block<1, 2>(row, 3 + 2 * n) += g * td;
            jac.block<1, 2>(row, 3 + 2 * k) += g * offset;
        };

        Eigen::Index row = 0;
        Eigen::Vector2d p_start(mp.p1.x, mp.p1.y);
        for (Eigen::Index k = 0; k < k_total; ++k)
        {
            const auto &z = model.features[static_cast<std::size_t>(k)];
            const auto &vel = mp.velocities[static_cast<std::size_t>(k)];
            const Eigen::Vector2d v(vel.vx, vel.vy);
            auto offset_of = [&](double dwell) { return model.dwell_timing ? dwell : 0.0; };

            if (z.aoa)
            {
                const double offset = offset_of(z.aoa_dwell);
                const Eigen::Vector2d p = p_start + v * offset;
                const double r2 = p.squaredNorm();
                if (r2 == 0.0)
                    throw GeometryError("estimator: blocker at the receiver");
                const double sy = p.y() >= 0.0 ? 1.0 : -1.0;
                // aoa = atan2(|y|, x)
                const Eigen::RowVector2d dtheta(-std::abs(p.y()) / r2, sy * p.x() / r2);
                scatter_position(row, k, offset, -wa * dtheta);
                ++row;
            }
            for (int m = 0; m < 2; ++m)
            {
                if (!(m == 0 ? z.f1 : z.f2))
                    continue;
                const double offset = offset_of(m == 0 ? z.f1_dwell : z.f2_dwell);
                const Eigen::Vector2d p = p_start + v * offset;
                const Link link = link_geometry(p, m == 0 ? tx1 : tx2);
                const double inv_l = 1.0 / model.wavelengths[static_cast<std::size_t>(m)];
                const double s = -w[static_cast<std::size_t>(m)] * inv_l;

                // u_sum^T v; both projection blocks are symmetric
                const Eigen::RowVector2d df_dp = (link.dp * v).transpose();
                jac(row, 0) += s * (link.dtx * v).dot(dtx_dd[static_cast<std::size_t>(m)]);
                scatter_position(row, k, offset, s * df_dp);
                jac.block<1, 2>(row, 3 + 2 * k) += s * link.u_sum.transpose();
                ++row;
            }
            p_start += v * td;
        }
        return jac;
    }

    namespace
    {
        void project(Eigen::VectorXd &x, const EstimatorConfig &cfg)
        {
            x(0) = std::clamp(x(0), cfg.d_bounds[0], cfg.d_bounds[1]);
            for (Eigen::Index i = 3; i + 1 < x.size(); i += 2)
            {
                const double speed = std::hypot(x(i), x(i + 1));
                if (speed > cfg.speed_bound)
                {
                    x(i) *= cfg.speed_bound / speed;
                    x(i + 1) *= cfg.speed_bound / speed;
                }
            }
        }

        // Objective, or +inf where the forward model is singular
        double safe_objective(const Eigen::VectorXd &x, const ObservationModel &model)
        {
            try
            {
                const double f = objective(unpack(x), model);
                return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
            }
            catch (const GeometryError &)
            {
                return std::numeric_limits<double>::infinity();
            }
        }
    } // namespace

    LmResult lm_fit(const MotionParams &init, const ObservationModel &model, const EstimatorConfig &cfg)
    {
        cfg.validate();
        check_model(init, model);

        Eigen::VectorXd x = pack(init);
        project(x, cfg);

        LmResult out;
        double cost = safe_objective(x, model);
        if (!std::isfinite(cost))
            throw EstimationError("lm_fit: initial point is geometrically singular");
        out.accepted_objectives.push_back(cost);

        double lambda = -1.0;
        constexpr double lambda_max = 1e16;

        for (std::size_t it = 0; it < cfg.max_iters; ++it)
        {
            out.iterations = it + 1;
            if (cost <= std::numeric_limits<double>::min())
            {
                out.converged = true;
                break;
            }
            const MotionParams mp = unpack(x);
            const Eigen::VectorXd r = residuals(mp, model);
            const Eigen::MatrixXd jac = jacobian(mp, model);
            const Eigen::MatrixXd jtj = jac.transpose() * jac;
            const Eigen::VectorXd grad = jac.transpose() * r;
            const double diag_max = std::max(jtj.diagonal().maxCoeff(), std::numeric_limits<double>::min());
            if (lambda < 0.0)
                lambda = cfg.damping_init * diag_max;

            bool accepted = false;
            bool small_step = false;
            while (!accepted)
            {
                Eigen::MatrixXd a = jtj;
                a.diagonal().array() += lambda;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
                if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
                {
                    lambda *= 4.0;
                    if (lambda > lambda_max * diag_max)
                        break;
                    continue;
                }
                const Eigen::VectorXd delta = ldlt.solve(-grad);
                Eigen::VectorXd trial = x + delta;
                project(trial, cfg);
                const double trial_cost = safe_objective(trial, model);

                const double step = (trial - x).norm();
                small_step = step <= cfg.step_tol * (x.norm() + cfg.step_tol);
                if (trial_cost < cost)
                {
                    const double decrease = cost - trial_cost;
                    x = trial;
                    cost = trial_cost;
                    out.accepted_objectives.push_back(cost);
                    lambda = std::max(lambda / 3.0, 1e-15 * diag_max);
                    accepted = true;
                    if (decrease <= cfg.objective_tol * std::max(cost, 1.0) || small_step)
                        out.converged = true;
                }
                else
                {
                    if (small_step)
                        break;
                    lambda *= 4.0;
                    if (lambda > lambda_max * diag_max)
                        break;
                }
            }
            if (!accepted)
            {
                // No descent at any damping: stationary to working precision
                out.converged = small_step;
                break;
            }
            if (out.converged)
                break;
        }

        out.params = unpack(x);
        out.objective = cost;
        return out;
    }

    std::optional<Velocity2> doppler_consistent_velocity(const Point2 &p, double d, const AdoaPair &adoa,
                                                         const std::array<double, 2> &wavelengths, double f1,
                                                         double f2)
    {
        const Point2 tx1{d, 0.0};
        const Point2 tx2 = tx2_position(adoa, d);
        // Each band's Doppler is linear in v: f_m = g_m . v
        const double g1x = bistatic_doppler(p, {1.0, 0.0}, tx1, wavelengths[0]);
        const double g1y = bistatic_doppler(p, {0.0, 1.0}, tx1, wavelengths[0]);
        const double g2x = bistatic_doppler(p, {1.0, 0.0}, tx2, wavelengths[1]);
        const double g2y = bistatic_doppler(p, {0.0, 1.0}, tx2, wavelengths[1]);
        const double det = g1x * g2y - g1y * g2x;
        const double scale = std::hypot(g1x, g1y) * std::hypot(g2x, g2y);
        if (!(scale > 0.0) || std::abs(det) < 1e-3 * scale)
            return std::nullopt;
        return Velocity2{(f1 * g2y - g1y * f2) / det, (g1x * f2 - f1 * g2x) / det};
    }

    std::vector<MotionParams> init_candidates(const ObservationModel &model, const EstimatorConfig &cfg)
    {
        cfg.validate();
        const auto first = std::find_if(model.features.begin(), model.features.end(),
                                         [](const FeatureVector &z) { return z.valid(); });
        if (first == model.features.end())
            throw EstimationError("init_candidates: no valid features");
        const auto k0 = static_cast<std::size_t>(first - model.features.begin());
        const double phi = deg2rad(*first->aoa);
        const Point2 ray{std::cos(phi), cfg.aoa_half_plane * std::sin(phi)};

        // Latin hypercube over (d, range): independent stratum permutations
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<std::size_t> d_strata(cfg.starts), r_strata(cfg.starts);
        std::iota(d_strata.begin(), d_strata.end(), 0);
        std::iota(r_strata.begin(), r_strata.end(), 0);
        std::shuffle(r_strata.begin(), r_strata.end(), rng);

        const double s_count = static_cast<double>(cfg.starts);
        std::vector<MotionParams> out;
        out.reserve(cfg.starts);
        for (std::size_t s = 0; s < cfg.starts; ++s)
        {
            const double d = cfg.d_bounds[0] + (static_cast<double>(d_strata[s]) + unit(rng)) / s_count *
                                                   (cfg.d_bounds[1] - cfg.d_bounds[0]);
            const double range = cfg.range_bounds[0] + (static_cast<double>(r_strata[s]) + unit(rng)) / s_count *
                                                           (cfg.range_bounds[1] - cfg.range_bounds[0]);
            const Point2 pk = ray * range;

            Velocity2 v{};
            if (first->f1 && first->f2)
            {
                try
                {
                    if (auto sol = doppler_consistent_velocity(pk, d, model.adoa, model.wavelengths, *first->f1,
                                                               *first->f2))
                        v = *sol;
                }
                catch (const GeometryError &)
                {
                }
            }
            if (v.speed() > cfg.speed_bound)
                v = v * (cfg.speed_bound / v.speed());

            MotionParams mp;
            mp.d = d;
            mp.p1 = pk + v * (-static_cast<double>(k0) * model.sweep_period);
            mp.velocities.assign(model.features.size(), v);
            out.push_back(std::move(mp));
        }
        return out;
    }

    void fill_unobserved(MotionParams &mp, std::span<const FeatureVector> features, double sweep_period)
    {
        std::vector<std::size_t> seen;
        for (std::size_t k = 0; k < std::min(mp.sweeps(), features.size()); ++k)
            if (features[k].aoa || features[k].f1 || features[k].f2)
                seen.push_back(k);
        if (seen.empty())
            return;

        auto &v = mp.velocities;
        // Leading sweeps: keep the first observed position fixed
        const std::size_t first = seen.front();
        Point2 p = mp.p1;
        for (std::size_t k = 0; k < first; ++k)
            p = p + v[k] * sweep_period;
        for (std::size_t k = 0; k < first; ++k)
            v[k] = v[first];
        mp.p1 = p + v[first] * (-static_cast<double>(first) * sweep_period);

        // Interior gaps: only the sum of the gap velocities is observable
        for (std::size_t i = 0; i + 1 < seen.size(); ++i)
        {
            const std::size_t lo = seen[i] + 1, hi = seen[i + 1];
            if (hi - lo < 2)
                continue;
            double vx = 0.0, vy = 0.0;
            for (std::size_t k = lo; k < hi; ++k)
            {
                vx += v[k].vx;
                vy += v[k].vy;
            }
            const double n = static_cast<double>(hi - lo);
            std::fill(v.begin() + static_cast<std::ptrdiff_t>(lo), v.begin() + static_cast<std::ptrdiff_t>(hi),
                      Velocity2{vx / n, vy / n});
        }

        for (std::size_t k = seen.back() + 1; k < v.size(); ++k)
            v[k] = v[seen.back()];
    }

    Estimate estimate(const ObservationModel &model, const EstimatorConfig &cfg)
    {
        cfg.validate();
        if (valid_sweeps(model.features) < 3)
            throw EstimationError("estimate: fewer than 3 valid sweeps; the trajectory is not identifiable");

        const auto candidates = init_candidates(model, cfg);
        const auto n = static_cast<std::ptrdiff_t>(candidates.size());
        std::vector<std::optional<LmResult>> results(candidates.size());

#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t s = 0; s < n; ++s)
        {
            try
            {
                results[static_cast<std::size_t>(s)] = lm_fit(candidates[static_cast<std::size_t>(s)], model, cfg);
            }
            catch (const std::exception &)
            {
                // A start that lands on a singular point is dropped
            }
        }

        Estimate out;
        std::optional<std::size_t> best;
        for (std::size_t s = 0; s < results.size(); ++s)
        {
            const double f = results[s] ? results[s]->objective : std::numeric_limits<double>::infinity();
            out.start_objectives.push_back(f);
            if (results[s] && (!best || f < results[*best]->objective))
                best = s;
        }
        if (!best)
            throw EstimationError("estimate: all " + std::to_string(candidates.size()) +
                                  " starts failed at singular geometry");

        out.params = results[*best]->params;
        fill_unobserved(out.params, model.features, model.sweep_period);
        out.objective = results[*best]->objective;
        out.converged = results[*best]->converged;
        out.tx2 = tx2_position(model.adoa, out.params.d);
        return out;
    }

} // namespace psense
