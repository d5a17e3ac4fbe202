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

#ifndef PSENSE_BLOCKAGE_HPP
#define PSENSE_BLOCKAGE_HPP

#include "psense/geometry.hpp"

#include <array>
#include <optional>
#include <span>
#include <stdexcept>

namespace psense
{
    class SingularCrossing : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    struct PredictorConfig
    {
        std::size_t window = 3; // sweeps averaged for the extrapolation velocity
    };

    struct Crossing
    {
        double mu = 0.0; // fraction along RX -> TX where the track meets the LoS line
        double t = 0.0;  // seconds after the last sweep
    };

    struct LinkPrediction
    {
        bool blocked = false;
        bool degenerate = false; // track parallel to the link, or zero velocity
        std::optional<double> t;
        std::optional<double> mu;
    };

    struct BlockagePrediction
    {
        std::array<LinkPrediction, 2> links;
        Velocity2 v_bar;
    };

    // Mean of the last `window` estimated sweep velocities
    Velocity2 average_velocity(std::span<const Velocity2> velocities, const PredictorConfig &cfg);

    // Solves [p_tx, -v] [mu, t]^T = p_hat; throws SingularCrossing when det = 0
    Crossing blockage_time(const Point2 &p_hat, const Velocity2 &v_bar, const Point2 &p_tx);

    // Determinant sign test, restricted to future crossings inside the RX-TX segment
    LinkPrediction blockage_indicator(const Point2 &p_hat, const Velocity2 &v_bar, const Point2 &p_tx);

    BlockagePrediction predict_blockage(const Point2 &p_last, std::span<const Velocity2> velocities,
                                        const std::array<Point2, 2> &tx, const PredictorConfig &cfg);

} // namespace psense

#endif
