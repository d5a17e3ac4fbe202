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

#include "psense/dsp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace psense
{
    void DetectorConfig::validate() const
    {
        if (!(gamma > 1.0))
            throw std::invalid_argument("detector: gamma must exceed 1");
        if (train_half_width < 1)
            throw std::invalid_argument("detector: train_half_width must be >= 1");
        if (!(doppler_max > 0.0))
            throw std::invalid_argument("detector: doppler_max must be positive");
        if (clutter_taps < 1)
            throw std::invalid_argument("detector: clutter_taps must be >= 1");
    }

    kernels::CafGrid DetectorConfig::grid(double sample_period) const
    {
        validate();
        kernels::CafGrid g;
        g.sample_period = sample_period;
        g.doppler_max = doppler_max;
        g.delay_search_max = delay_search_max;
        g.decimation = decimation;
        if (g.decimation == 0)
            g.decimation = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(1.0 / (2.0 * doppler_max * sample_period) + 1e-9)));
        if (1.0 / (static_cast<double>(g.decimation) * sample_period) < 2.0 * doppler_max * (1.0 - 1e-12))
            throw std::invalid_argument("detector: post-decimation rate below 2 * doppler_max");
        return g;
    }

    Samples clutter_cancel(std::span<const cdouble> surveillance, std::span<const cdouble> reference,
                           std::size_t taps)
    {
        return kernels::clutter_cancel(surveillance, reference, taps).residual;
    }

    std::vector<double> caf(std::span<const cdouble> surveillance_cancelled, std::span<const cdouble> reference,
                            const DetectorConfig &cfg, double sample_period)
    {
        return kernels::caf_row(surveillance_cancelled, reference, cfg.grid(sample_period));
    }

    std::vector<double> adaptive_threshold(std::span<const double> row, const DetectorConfig &cfg)
    {
        cfg.validate();
        const std::size_t w = cfg.train_half_width;
        if (row.size() < 2 * w + 1)
            throw std::invalid_argument("adaptive_threshold: row shorter than the training window");

        // Prefix sums keep the sliding window O(N)
        std::vector<double> prefix(row.size() + 1, 0.0);
        for (std::size_t i = 0; i < row.size(); ++i)
            prefix[i + 1] = prefix[i] + row[i];

        std::vector<double> thr(row.size());
        for (std::size_t i = 0; i < row.size(); ++i)
        {
            const std::size_t lo = i >= w ? i - w : 0;
            const std::size_t hi = std::min(row.size() - 1, i + w);
            const double cells = static_cast<double>(hi - lo + 1);
            thr[i] = cfg.gamma * (prefix[hi + 1] - prefix[lo]) / cells;
        }
        return thr;
    }

    std::optional<Detection> detect_band(const DopplerAngleMap &map, const DetectorConfig &cfg)
    {
        const double guard_hz = static_cast<double>(cfg.guard_halfwidth) * map.df;
        std::optional<Detection> best;
        for (std::size_t q = 0; q < map.beams(); ++q)
        {
            const auto &row = map.rows[q];
            const auto thr = adaptive_threshold(row, cfg);
            for (std::size_t i = 0; i < row.size(); ++i)
            {
                // Tolerance keeps the guard edge from flipping on grid rounding
                if (std::abs(map.bin_hz[i]) <= guard_hz + 1e-9 * map.df)
                    continue;
                if (row[i] < thr[i])
                    continue;
                if (!best || row[i] > best->magnitude)
                    best = Detection{map.bin_hz[i], q + 1, row[i]};
            }
        }
        return best;
    }

    FeatureVector fuse_bands(const std::optional<Detection> &det1, const std::optional<Detection> &det2,
                             std::span<const double> beam_grid, std::size_t sweep, double t_start, double dwell)
    {
        auto midpoint = [dwell](const Detection &det) { return (static_cast<double>(det.beam) - 0.5) * dwell; };
        FeatureVector z;
        z.sweep = sweep;
        z.t_start = t_start;
        if (det1)
        {
            z.f1 = det1->doppler;
            z.peak1 = det1->magnitude;
            z.f1_dwell = midpoint(*det1);
        }
        if (det2)
        {
            z.f2 = det2->doppler;
            z.peak2 = det2->magnitude;
            z.f2_dwell = midpoint(*det2);
        }

        const Detection *lead = nullptr;
        if (det1 && det2)
            lead = det2->magnitude > det1->magnitude ? &*det2 : &*det1;
        else if (det1)
            lead = &*det1;
        else if (det2)
            lead = &*det2;
        if (lead)
        {
            z.aoa = beam_grid[lead->beam - 1];
            z.aoa_dwell = midpoint(*lead);
        }
        return z;
    }

    DopplerAngleMap doppler_angle_map(const SweepCapture &capture, int band, std::size_t beams,
                                      double sample_period, const DetectorConfig &cfg)
    {
        const auto grid = cfg.grid(sample_period);
        DopplerAngleMap map;
        map.band = band;
        map.sweep = capture.sweep;

        for (std::size_t q = 1; q <= beams; ++q)
        {
            const DwellCapture &dw = capture.dwell(band, q, beams);
            const Samples cancelled = clutter_cancel(dw.surveillance, dw.reference, cfg.clutter_taps);
            map.rows.push_back(kernels::caf_row(cancelled, dw.reference, grid));
        }

        const std::size_t n0 = capture.dwell(band, 1, beams).reference.size();
        map.df = kernels::doppler_resolution(n0, sample_period);
        const auto half = static_cast<std::ptrdiff_t>(kernels::doppler_half_bins(n0, grid));
        for (std::ptrdiff_t i = -half; i <= half; ++i)
            map.bin_hz.push_back(static_cast<double>(i) * map.df);
        return map;
    }

    SweepFeatures extract_features(const SweepCapture &capture, std::span<const double> beam_grid,
                                   double sample_period, double sweep_period, const DetectorConfig &cfg)
    {
        SweepFeatures out;
        std::array<std::optional<Detection>, 2> det;
        for (int band = 1; band <= 2; ++band)
        {
            out.maps[band - 1] = doppler_angle_map(capture, band, beam_grid.size(), sample_period, cfg);
            det[band - 1] = detect_band(out.maps[band - 1], cfg);
        }
        const double t_start = static_cast<double>(capture.sweep - 1) * sweep_period;
        out.features = fuse_bands(det[0], det[1], beam_grid, capture.sweep, t_start,
                                  sweep_period / static_cast<double>(beam_grid.size()));
        return out;
    }

    SmoothResult smooth_aoa(std::span<const FeatureVector> features, int degree)
    {
        if (degree < 0)
            throw std::invalid_argument("smooth_aoa: negative polynomial degree");

        SmoothResult out;
        out.features.assign(features.begin(), features.end());

        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < features.size(); ++i)
            if (features[i].aoa)
                idx.push_back(i);
        if (idx.size() < static_cast<std::size_t>(degree) + 1)
        {
            out.passthrough = true;
            return out;
        }

        // Fit on time mapped to [-1, 1] for a well-conditioned Vandermonde system
        const double t0 = features[idx.front()].aoa_time();
        const double t1 = features[idx.back()].aoa_time();
        const double mid = 0.5 * (t0 + t1);
        const double half = t1 > t0 ? 0.5 * (t1 - t0) : 1.0;

        const auto rows = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd v(rows, degree + 1);
        Eigen::VectorXd y(rows);
        for (Eigen::Index r = 0; r < rows; ++r)
        {
            const double t = (features[idx[r]].aoa_time() - mid) / half;
            double pw = 1.0;
            for (int c = 0; c <= degree; ++c, pw *= t)
                v(r, c) = pw;
            y(r) = *features[idx[r]].aoa;
        }
        const Eigen::VectorXd coef = v.colPivHouseholderQr().solve(y);
        const Eigen::VectorXd fitted = v * coef;
        for (Eigen::Index r = 0; r < rows; ++r)
            out.features[idx[r]].aoa = std::clamp(fitted(r), 0.0, 180.0);
        return out;
    }

} // namespace psense
