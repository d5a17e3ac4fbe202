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

#include "psense/blockage.hpp"

#include <string>

namespace psense
{
    Velocity2 average_velocity(std::span<const Velocity2> velocities, const PredictorConfig &cfg)
    {
        if (cfg.window < 1)
            throw std::invalid_argument("average_velocity: window must be >= 1");
        if (cfg.window > velocities.size())
            throw std::invalid_argument("average_velocity: window " + std::to_string(cfg.window) +
                                        " exceeds the " + std::to_string(velocities.size()) + " estimated sweeps");
        Velocity2 sum{};
        for (std::size_t k = velocities.size() - cfg.window; k < velocities.size(); ++k)
        {
            sum.vx += velocities[k].vx;
            sum.vy += velocities[k].vy;
        }
        return sum * (1.0 / static_cast<double>(cfg.window));
    }

    namespace
    {
        double det2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }
    }

    Crossing blockage_time(const Point2 &p_hat, const Velocity2 &v_bar, const Point2 &p_tx)
    {
        // Columns p_tx and -v
        const double det = det2(p_tx.x, p_tx.y, -v_bar.vx, -v_bar.vy);
        const double scale = p_tx.norm() * v_bar.speed();
        if (det == 0.0 || std::abs(det) <= 1e-12 * scale)
            throw SingularCrossing("blockage_time: track is parallel to the link (singular 2x2 system)");
        // Cramer's rule
        const double mu = det2(p_hat.x, p_hat.y, -v_bar.vx, -v_bar.vy) / det;
        const double t = det2(p_tx.x, p_tx.y, p_hat.x, p_hat.y) / det;
        return {mu, t};
    }

    LinkPrediction blockage_indicator(const Point2 &p_hat, const Velocity2 &v_bar, const Point2 &p_tx)
    {
        LinkPrediction out;
        if (v_bar.speed() == 0.0)
        {
            out.degenerate = true;
            return out;
        }
        const Point2 to_rx = Point2{} - p_hat;
        const Point2 to_tx = p_tx - p_hat;
        const double side_rx = det2(v_bar.vx, v_bar.vy, to_rx.x, to_rx.y);
        const double side_tx = det2(v_bar.vx, v_bar.vy, to_tx.x, to_tx.y);

        Crossing c;
        try
        {
            c = blockage_time(p_hat, v_bar, p_tx);
        }
        catch (const SingularCrossing &)
        {
            out.degenerate = true;
            return out;
        }
        if (side_rx * side_tx < 0.0 && c.t >= 0.0 && c.mu >= 0.0 && c.mu <= 1.0)
        {
            out.blocked = true;
            out.t = c.t;
            out.mu = c.mu;
        }
        return out;
    }

    BlockagePrediction predict_blockage(const Point2 &p_last, std::span<const Velocity2> velocities,
                                        const std::array<Point2, 2> &tx, const PredictorConfig &cfg)
    {
        BlockagePrediction out;
        out.v_bar = average_velocity(velocities, cfg);
        for (std::size_t m = 0; m < 2; ++m)
            out.links[m] = blockage_indicator(p_last, out.v_bar, tx[m]);
        return out;
    }

} // namespace psense
