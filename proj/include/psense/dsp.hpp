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

#ifndef PSENSE_DSP_HPP
#define PSENSE_DSP_HPP

#include "psense/kernels.hpp"
#include "psense/waveform.hpp"

#include <optional>
#include <span>
#include <vector>

namespace psense
{
    struct DetectorConfig
    {
        double doppler_max = 1000.0;     // Hz, one-sided extent of the Doppler grid
        std::size_t decimation = 0;      // 0 selects the largest R with 1/(R T_s) >= 2 doppler_max
        double gamma = 3.0;              // threshold scale, > 1
        std::size_t train_half_width = 16;
        std::size_t guard_halfwidth = 2; // bins around 0 Hz excluded from detection
        std::size_t clutter_taps = 64;
        std::size_t delay_search_max = 64;

        void validate() const;

        // Kernel grid for a given sample period, with the decimation resolved
        kernels::CafGrid grid(double sample_period) const;
    };

    // CAF magnitudes over (beam, Doppler bin) for one band and sweep
    struct DopplerAngleMap
    {
        int band = 1;
        std::size_t sweep = 1;
        double df = 0.0;
        std::vector<double> bin_hz;              // bin centers, ascending, symmetric about 0
        std::vector<std::vector<double>> rows;   // rows[q-1][bin]

        std::size_t beams() const { return rows.size(); }
    };

    struct Detection
    {
        double doppler = 0.0;  // Hz
        std::size_t beam = 0;  // 1-based
        double magnitude = 0.0;
    };

    struct FeatureVector
    {
        std::size_t sweep = 1;
        double t_start = 0.0;
        std::optional<double> aoa; // degrees
        std::optional<double> f1;  // Hz
        std::optional<double> f2;  // Hz
        double peak1 = 0.0;
        double peak2 = 0.0;
        // Seconds from sweep start to the midpoint of the dwell each measurement came from
        double aoa_dwell = 0.0;
        double f1_dwell = 0.0;
        double f2_dwell = 0.0;

        double aoa_time() const { return t_start + aoa_dwell; }
        bool valid() const { return aoa.has_value(); }
    };

    // Surveillance signal with the zero-Doppler reference span removed
    Samples clutter_cancel(std::span<const cdouble> surveillance, std::span<const cdouble> reference,
                           std::size_t taps);

    // One Doppler row of the Doppler-angle map
    std::vector<double> caf(std::span<const cdouble> surveillance_cancelled, std::span<const cdouble> reference,
                            const DetectorConfig &cfg, double sample_period);

    // Cell-averaging threshold over 2 W_T + 1 cells (cell under test included);
    // edge windows are renormalized by the available cell count
    std::vector<double> adaptive_threshold(std::span<const double> row, const DetectorConfig &cfg);

    // Strongest above-threshold cell outside the zero-Doppler guard
    std::optional<Detection> detect_band(const DopplerAngleMap &map, const DetectorConfig &cfg);

    // Single AoA from the band with the larger selected peak. A nonzero dwell
    // duration stamps each measurement with its beam's dwell midpoint.
    FeatureVector fuse_bands(const std::optional<Detection> &det1, const std::optional<Detection> &det2,
                             std::span<const double> beam_grid, std::size_t sweep, double t_start,
                             double dwell = 0.0);

    // Clutter cancellation and CAF for every beam of one band of a sweep
    DopplerAngleMap doppler_angle_map(const SweepCapture &capture, int band, std::size_t beams,
                                      double sample_period, const DetectorConfig &cfg);

    struct SweepFeatures
    {
        FeatureVector features;
        std::array<DopplerAngleMap, 2> maps;
    };

    SweepFeatures extract_features(const SweepCapture &capture, std::span<const double> beam_grid,
                                   double sample_period, double sweep_period, const DetectorConfig &cfg);

    struct SmoothResult
    {
        std::vector<FeatureVector> features;
        bool passthrough = false; // too few valid AoAs for the requested degree
    };

    // Least-squares polynomial fit of valid (t_k, AoA_k) pairs; invalid entries untouched
    SmoothResult smooth_aoa(std::span<const FeatureVector> features, int degree = 3);

} // namespace psense

#endif
