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

#ifndef PSENSE_WAVEFORM_HPP
#define PSENSE_WAVEFORM_HPP

#include "psense/geometry.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace psense
{
    using cdouble = std::complex<double>;
    using Samples = std::vector<cdouble>;

    // One propagation path: complex amplitude and delay (seconds)
    struct PathSpec
    {
        cdouble gain{0.0, 0.0};
        double delay = 0.0;
    };

    // Static clutter path attached to a band and beam; 0 selects every band / beam
    struct ClutterSpec
    {
        int band = 0;
        int beam = 0;
        PathSpec path;
    };

    struct Scenario
    {
        double d_true = 2.7;
        AdoaPair adoa{37.874983651098205, 57.264773727892404, -1};
        std::array<double, 2> carriers{60.98e9, 60.985e9};
        double baseband_bandwidth = 1e6;
        double sample_period = 1e-7;
        double dwell = 0.05;
        std::vector<double> beam_grid{40.0, 27.0, 18.0, 10.0};
        double beamwidth = 10.0;
        int aoa_half_plane = 1; // side of the RX->TX1 axis covered by the surveillance sweep
        std::array<double, 2> snr_los_db{30.0, 30.0};
        std::array<double, 2> snr_target_db{10.0, 10.0};
        std::vector<ClutterSpec> clutter;
        std::array<double, 2> cfo{0.0, 0.0};
        bool ref_beam_target_leak = false;
        double leak_db = -20.0; // leaked target power relative to the surveillance target path
        std::uint64_t noise_seed = 1;
        std::uint64_t waveform_seed = 2;
        double max_speed = 3.0;

        std::size_t samples_per_dwell() const;
        std::size_t beams() const { return beam_grid.size(); }
        double sweep_period() const { return static_cast<double>(beams()) * dwell; }
        std::array<double, 2> wavelengths() const { return {wavelength(carriers[0]), wavelength(carriers[1])}; }
        Point2 tx1() const { return {d_true, 0.0}; }
        Point2 tx2() const { return tx2_position(adoa, d_true); }

        // Throws std::invalid_argument describing the first violated invariant
        void validate() const;
    };

    // Ground-truth blocker state at the start of one sweep
    struct TruthState
    {
        Point2 p;
        Velocity2 v;
    };

    struct DwellCapture
    {
        int band = 1;       // 1 or 2
        std::size_t sweep = 1;
        std::size_t beam = 1; // 1-based index into the beam grid
        double beam_angle = 0.0;
        Samples reference;
        Samples surveillance;
    };

    struct SweepCapture
    {
        std::size_t sweep = 1;
        std::vector<DwellCapture> dwells; // band-major: index (band - 1) * Q + (beam - 1)
        TruthState truth;

        const DwellCapture &dwell(int band, std::size_t beam, std::size_t beams) const
        {
            return dwells.at(static_cast<std::size_t>(band - 1) * beams + (beam - 1));
        }
    };

    // Order-independent seed derivation for per-dwell random streams
    std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                           std::uint64_t d = 0);

    // Unit-average-power pseudo-random sequence confined to |f| <= bandwidth / 2
    Samples make_baseband(std::uint64_t seed, std::size_t n0, double bandwidth, double sample_period);

    // Adds circular complex white Gaussian noise of the given per-sample power
    void add_awgn(std::span<cdouble> y, double noise_power, std::uint64_t seed);

    // Reference (LoS) channel: y[n] = a * s[n - tau] + noise
    Samples synth_reference(std::span<const cdouble> s, const PathSpec &los, double sample_period,
                            double noise_power, std::uint64_t seed);

    struct TargetPath
    {
        PathSpec path;
        double doppler = 0.0; // Hz, held constant over the dwell
    };

    // Surveillance channel: Doppler-shifted target echo plus static clutter plus noise
    Samples synth_surveillance(std::span<const cdouble> s, const std::optional<TargetPath> &target,
                               std::span<const PathSpec> clutter, double sample_period, double noise_power,
                               std::uint64_t seed);

    // Beam index (1-based) whose ideal sector covers the blocker, 0 when none does
    std::size_t covering_beam(const Scenario &sc, const Point2 &p);

    // All 2 x Q dwells of sweep k (1-based) for a ground-truth track indexed by sweep
    SweepCapture simulate_sweep(const Scenario &sc, std::span<const TruthState> truth, std::size_t k);

    // Straight constant-velocity track sampled at the start of each sweep
    std::vector<TruthState> straight_track(const Point2 &start, const Velocity2 &v, std::size_t sweeps,
                                           double sweep_period);

} // namespace psense

#endif
