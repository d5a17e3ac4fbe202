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

#ifndef PSENSE_GEOMETRY_HPP
#define PSENSE_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace psense
{
    inline constexpr double speed_of_light = 299792458.0;

    inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
    inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

    // Carrier wavelength in meters for a carrier frequency in Hz
    inline double wavelength(double carrier_hz) { return speed_of_light / carrier_hz; }

    struct Point2
    {
        double x = 0.0;
        double y = 0.0;

        Point2 operator+(const Point2 &o) const { return {x + o.x, y + o.y}; }
        Point2 operator-(const Point2 &o) const { return {x - o.x, y - o.y}; }
        Point2 operator*(double s) const { return {x * s, y * s}; }
        double norm() const { return std::hypot(x, y); }
        bool operator==(const Point2 &) const = default;
    };

    struct Velocity2
    {
        double vx = 0.0;
        double vy = 0.0;

        double speed() const { return std::hypot(vx, vy); }
        Velocity2 operator*(double s) const { return {vx * s, vy * s}; }
        bool operator==(const Velocity2 &) const = default;
    };

    // Displacement after moving with velocity v for dt seconds
    inline Point2 operator+(const Point2 &p, const Velocity2 &v) { return {p.x + v.vx, p.y + v.vy}; }

    // Inner angles of the RX/TX1/TX2 triangle, in degrees. half_plane is the
    // side of the RX->TX1 axis on which TX2 lies (+1: y > 0, -1: y < 0).
    struct AdoaPair
    {
        double phi_rx = 0.0;
        double phi_tx1 = 0.0;
        int half_plane = 1;

        // Throws std::invalid_argument when the triangle is infeasible
        void validate() const;
    };

    struct MotionParams
    {
        double d = 0.0; // RX-TX1 distance
        Point2 p1;      // blocker position at sweep 1
        std::vector<Velocity2> velocities;

        std::size_t sweeps() const { return velocities.size(); }
        void validate() const;
    };

    struct FeatureTriple
    {
        double aoa = 0.0; // degrees
        double f1 = 0.0;  // Hz, band 1
        double f2 = 0.0;  // Hz, band 2
    };

    using TrueFeatures = std::vector<FeatureTriple>;

    // Raised when a geometric model is evaluated at a singular point
    class GeometryError : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    struct AdoaResult
    {
        AdoaPair adoa;
        bool collinear = false; // TX2 on the RX-TX1 line; angles are meaningless
    };

    // ADoA inner angles from transmitter positions with the receiver at the origin
    AdoaResult adoa_from_positions(const Point2 &p_tx1, const Point2 &p_tx2);

    // TX2 position by the law of sines, with TX1 at [d, 0]
    Point2 tx2_position(const AdoaPair &adoa, double d);

    // Blocker position at the start of sweep k (1-based, 1 <= k <= K+1)
    Point2 blocker_position(const MotionParams &mp, std::size_t k, double sweep_period);

    // Unsigned angle in degrees between p and the RX->TX1 axis
    double aoa(const Point2 &p);

    // Signed bistatic Doppler in Hz of a scatterer at p moving with v, RX at the origin
    double bistatic_doppler(const Point2 &p, const Velocity2 &v, const Point2 &p_tx, double wavelength);

    // Noise-free per-sweep features (AoA, band-1 Doppler, band-2 Doppler)
    TrueFeatures true_features(const MotionParams &mp, const AdoaPair &adoa,
                               const std::array<double, 2> &wavelengths, double sweep_period);

} // namespace psense

#endif
