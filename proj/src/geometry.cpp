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

#include "psense/geometry.hpp"

#include <algorithm>
#include <string>

namespace psense
{
    namespace
    {
        // Angle in radians between two non-zero vectors
        double inner_angle(const Point2 &a, const Point2 &b)
        {
            const double cross = a.x * b.y - a.y * b.x;
            const double dot = a.x * b.x + a.y * b.y;
            return std::atan2(std::abs(cross), dot);
        }
    } // namespace

    void AdoaPair::validate() const
    {
        if (!(phi_rx > 0.0 && phi_rx < 180.0) || !(phi_tx1 > 0.0 && phi_tx1 < 180.0))
            throw std::invalid_argument("ADoA angles must lie in (0, 180) degrees");
        if (phi_rx + phi_tx1 >= 180.0)
            throw std::invalid_argument("ADoA angles violate triangle feasibility (sum >= 180)");
        if (half_plane != 1 && half_plane != -1)
            throw std::invalid_argument("ADoA half_plane must be +1 or -1");
    }

    void MotionParams::validate() const
    {
        if (!(d > 0.0) || !std::isfinite(d))
            throw std::invalid_argument("MotionParams: d must be positive and finite");
        if (velocities.empty())
            throw std::invalid_argument("MotionParams: at least one sweep velocity is required");
        if (!std::isfinite(p1.x) || !std::isfinite(p1.y))
            throw std::invalid_argument("MotionParams: p1 must be finite");
    }

    AdoaResult adoa_from_positions(const Point2 &p_tx1, const Point2 &p_tx2)
    {
        const Point2 origin{};
        if (p_tx1 == origin || p_tx2 == origin || p_tx1 == p_tx2)
            throw GeometryError("adoa_from_positions: coincident transmitter/receiver positions");

        AdoaResult out;
        const double cross = p_tx1.x * p_tx2.y - p_tx1.y * p_tx2.x;
        const double scale = p_tx1.norm() * p_tx2.norm();
        out.collinear = std::abs(cross) <= 1e-12 * scale;

        out.adoa.phi_rx = rad2deg(inner_angle(p_tx1, p_tx2));
        out.adoa.phi_tx1 = rad2deg(inner_angle(origin - p_tx1, p_tx2 - p_tx1));
        out.adoa.half_plane = cross < 0.0 ? -1 : 1;
        return out;
    }

    Point2 tx2_position(const AdoaPair &adoa, double d)
    {
        adoa.validate();
        if (!(d > 0.0))
            throw std::invalid_argument("tx2_position: d must be positive");

        const double a_rx = deg2rad(adoa.phi_rx);
        const double a_tx1 = deg2rad(adoa.phi_tx1);
        const double range = d * std::sin(a_tx1) / std::sin(a_rx + a_tx1);
        return {range * std::cos(a_rx), adoa.half_plane * range * std::sin(a_rx)};
    }

    Point2 blocker_position(const MotionParams &mp, std::size_t k, double sweep_period)
    {
        if (k < 1 || k > mp.sweeps() + 1)
            throw std::out_of_range("blocker_position: sweep index " + std::to_string(k) + " outside [1, K+1]");

        Point2 p = mp.p1;
        for (std::size_t n = 0; n + 1 < k; ++n)
            p = p + mp.velocities[n] * sweep_period;
        return p;
    }

    double aoa(const Point2 &p)
    {
        const double r = p.norm();
        if (r == 0.0)
            throw GeometryError("aoa: blocker at the receiver");
        // atan2 form of arccos(x / |p|), better conditioned near the axis
        return rad2deg(std::atan2(std::abs(p.y), p.x));
    }

    double bistatic_doppler(const Point2 &p, const Velocity2 &v, const Point2 &p_tx, double wavelength)
    {
        if (!(wavelength > 0.0))
            throw std::invalid_argument("bistatic_doppler: wavelength must be positive");
        const Point2 to_tx = p - p_tx;
        const double r_tx = to_tx.norm();
        const double r_rx = p.norm();
        if (r_tx == 0.0 || r_rx == 0.0)
            throw GeometryError("bistatic_doppler: blocker coincides with a link endpoint");

        const double ux = to_tx.x / r_tx + p.x / r_rx;
        const double uy = to_tx.y / r_tx + p.y / r_rx;
        return (ux * v.vx + uy * v.vy) / wavelength;
    }

    TrueFeatures true_features(const MotionParams &mp, const AdoaPair &adoa,
                               const std::array<double, 2> &wavelengths, double sweep_period)
    {
        mp.validate();
        const Point2 tx1{mp.d, 0.0};
        const Point2 tx2 = tx2_position(adoa, mp.d);

        TrueFeatures out;
        out.reserve(mp.sweeps());
        Point2 p = mp.p1;
        for (const auto &v : mp.velocities)
        {
            out.push_back({aoa(p),
                           bistatic_doppler(p, v, tx1, wavelengths[0]),
                           bistatic_doppler(p, v, tx2, wavelengths[1])});
            p = p + v * sweep_period;
        }
        return out;
    }

} // namespace psense
