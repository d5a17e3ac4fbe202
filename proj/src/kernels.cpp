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

#include "psense/kernels.hpp"

#include <Eigen/Dense>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace psense::kernels
{
    namespace
    {
        using CMat = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic>;
        using CVec = Eigen::Matrix<cdouble, Eigen::Dynamic, 1>;

        void check_clutter_inputs(std::span<const cdouble> sur, std::span<const cdouble> ref, std::size_t taps)
        {
            if (sur.size() != ref.size())
                throw std::invalid_argument("clutter_cancel: surveillance and reference lengths differ");
            if (taps == 0 || taps >= sur.size())
                throw std::invalid_argument("clutter_cancel: taps must satisfy 1 <= D < N0");
        }

        [[noreturn]] void rank_deficient(std::size_t taps)
        {
            throw DspError("clutter_cancel: delayed-reference matrix with " + std::to_string(taps) +
                           " taps is rank deficient (reference empty or too narrowband)");
        }

        // Pivot ratio below which the normal matrix is declared singular
        constexpr double rank_tolerance = 1e-10;
    } // namespace

    ClutterResult clutter_cancel(std::span<const cdouble> sur, std::span<const cdouble> ref, std::size_t taps)
    {
        check_clutter_inputs(sur, ref, taps);
        const auto n0 = static_cast<std::ptrdiff_t>(sur.size());
        const auto d = static_cast<std::ptrdiff_t>(taps);

        // Lag products c_l = sum_{m=0}^{N-1-l} conj(r[m+l]) r[m] give the first row of A^H A;
        // every later row follows by peeling one tail term.
        CMat gram(d, d);
        CVec rhs(d);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t l = 0; l < d; ++l)
        {
            cdouble acc{0.0, 0.0};
            for (std::ptrdiff_t m = 0; m + l < n0; ++m)
                acc += std::conj(ref[m + l]) * ref[m];
            gram(0, l) = acc;

            cdouble proj{0.0, 0.0};
            for (std::ptrdiff_t n = l; n < n0; ++n)
                proj += std::conj(ref[n - l]) * sur[n];
            rhs(l) = proj;
        }
        for (std::ptrdiff_t i = 1; i < d; ++i)
            for (std::ptrdiff_t j = i; j < d; ++j)
                gram(i, j) = gram(i - 1, j - 1) - std::conj(ref[n0 - i]) * ref[n0 - i - (j - i)];
        for (std::ptrdiff_t i = 0; i < d; ++i)
            for (std::ptrdiff_t j = 0; j < i; ++j)
                gram(i, j) = std::conj(gram(j, i));

        Eigen::LDLT<CMat> ldlt(gram);
        const auto pivots = ldlt.vectorD().cwiseAbs();
        if (ldlt.info() != Eigen::Success || !(pivots.maxCoeff() > 0.0) ||
            pivots.minCoeff() < rank_tolerance * pivots.maxCoeff())
            rank_deficient(taps);
        const CVec coeffs = ldlt.solve(rhs);

        ClutterResult out;
        out.coeffs.assign(coeffs.data(), coeffs.data() + d);
        out.residual.resize(sur.size());
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t n = 0; n < n0; ++n)
        {
            cdouble fit{0.0, 0.0};
            const std::ptrdiff_t top = std::min(d - 1, n);
            for (std::ptrdiff_t i = 0; i <= top; ++i)
                fit += coeffs(i) * ref[n - i];
            out.residual[n] = sur[n] - fit;
        }
        return out;
    }

    ClutterResult clutter_cancel_serial(std::span<const cdouble> sur, std::span<const cdouble> ref, std::size_t taps)
    {
        check_clutter_inputs(sur, ref, taps);
        const auto n0 = static_cast<Eigen::Index>(sur.size());
        const auto d = static_cast<Eigen::Index>(taps);

        CMat a = CMat::Zero(n0, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index n = i; n < n0; ++n)
                a(n, i) = ref[static_cast<std::size_t>(n - i)];
        const CVec y = Eigen::Map<const CVec>(sur.data(), n0);

        Eigen::ColPivHouseholderQR<CMat> qr(a);
        qr.setThreshold(std::sqrt(rank_tolerance));
        if (qr.rank() < d)
            rank_deficient(taps);
        const CVec coeffs = qr.solve(y);
        const CVec residual = y - a * coeffs;

        ClutterResult out;
        out.coeffs.assign(coeffs.data(), coeffs.data() + d);
        out.residual.assign(residual.data(), residual.data() + n0);
        return out;
    }

    double doppler_resolution(std::size_t n0, double sample_period)
    {
        return 1.0 / (static_cast<double>(n0) * sample_period);
    }

    std::size_t doppler_half_bins(std::size_t n0, const CafGrid &grid)
    {
        const double df = doppler_resolution(n0, grid.sample_period);
        return static_cast<std::size_t>(std::floor(grid.doppler_max / df + 1e-9));
    }

    namespace
    {
        struct CafPlan
        {
            std::size_t n0 = 0;
            std::size_t blocks = 0;
            std::size_t bins = 0;
            std::size_t max_delay = 0;
            std::vector<cdouble> twiddle; // bins x blocks, exp(j 2 pi f_i b R T_s)
            std::vector<double> droop;    // R / |H_R(f_i)|
        };

        CafPlan make_plan(std::size_t n0, const CafGrid &grid)
        {
            if (grid.decimation == 0)
                throw std::invalid_argument("caf: decimation must be >= 1");
            if (!(grid.sample_period > 0.0) || !(grid.doppler_max > 0.0))
                throw std::invalid_argument("caf: sample period and doppler_max must be positive");
            const double out_rate = 1.0 / (static_cast<double>(grid.decimation) * grid.sample_period);
            if (out_rate < 2.0 * grid.doppler_max * (1.0 - 1e-12))
                throw std::invalid_argument("caf: decimated rate below 2 * doppler_max");
            if (grid.delay_search_max >= n0)
                throw std::invalid_argument("caf: delay search window exceeds the dwell");

            CafPlan plan;
            plan.n0 = n0;
            plan.max_delay = grid.delay_search_max;
            const std::size_t r = grid.decimation;
            plan.blocks = (n0 + r - 1) / r;
            const std::size_t half = doppler_half_bins(n0, grid);
            plan.bins = 2 * half + 1;
            const double df = doppler_resolution(n0, grid.sample_period);

            plan.twiddle.resize(plan.bins * plan.blocks);
            plan.droop.resize(plan.bins);
            for (std::size_t i = 0; i < plan.bins; ++i)
            {
                const double f = (static_cast<double>(i) - static_cast<double>(half)) * df;
                const double step = 2.0 * std::numbers::pi * f * static_cast<double>(r) * grid.sample_period;
                for (std::size_t b = 0; b < plan.blocks; ++b)
                    plan.twiddle[i * plan.blocks + b] = std::polar(1.0, step * static_cast<double>(b));
                const double x = std::numbers::pi * f * grid.sample_period;
                const double h = std::abs(std::sin(x)) < 1e-300
                                     ? static_cast<double>(r)
                                     : std::abs(std::sin(x * static_cast<double>(r)) / std::sin(x));
                plan.droop[i] = static_cast<double>(r) / h;
            }
            return plan;
        }

        // Decimated lag-product spectrum at one delay, folded into row by max
        void accumulate_delay(std::span<const cdouble> sur, std::span<const cdouble> ref, std::size_t tau,
                              const CafPlan &plan, std::size_t r, std::vector<cdouble> &blocks,
                              std::vector<double> &row)
        {
            std::fill(blocks.begin(), blocks.end(), cdouble{0.0, 0.0});
            for (std::size_t n = tau; n < plan.n0; ++n)
                blocks[n / r] += sur[n] * std::conj(ref[n - tau]);

            for (std::size_t i = 0; i < plan.bins; ++i)
            {
                const cdouble *tw = &plan.twiddle[i * plan.blocks];
                cdouble acc{0.0, 0.0};
                for (std::size_t b = 0; b < plan.blocks; ++b)
                    acc += blocks[b] * tw[b];
                row[i] = std::max(row[i], std::abs(acc) * plan.droop[i]);
            }
        }

        void check_caf_inputs(std::span<const cdouble> sur, std::span<const cdouble> ref)
        {
            if (sur.size() != ref.size())
                throw std::invalid_argument("caf: surveillance and reference lengths differ");
            if (sur.empty())
                throw std::invalid_argument("caf: empty dwell");
        }
    } // namespace

    std::vector<double> caf_row(std::span<const cdouble> sur, std::span<const cdouble> ref, const CafGrid &grid)
    {
        check_caf_inputs(sur, ref);
        const CafPlan plan = make_plan(sur.size(), grid);
        std::vector<double> row(plan.bins, 0.0);

#pragma omp parallel
        {
            std::vector<cdouble> blocks(plan.blocks);
            std::vector<double> local(plan.bins, 0.0);
#pragma omp for schedule(dynamic)
            for (std::ptrdiff_t tau = 0; tau <= static_cast<std::ptrdiff_t>(plan.max_delay); ++tau)
                accumulate_delay(sur, ref, static_cast<std::size_t>(tau), plan, grid.decimation, blocks, local);
#pragma omp critical
            for (std::size_t i = 0; i < plan.bins; ++i)
                row[i] = std::max(row[i], local[i]);
        }
        return row;
    }

    std::vector<double> caf_row_serial(std::span<const cdouble> sur, std::span<const cdouble> ref,
                                       const CafGrid &grid)
    {
        check_caf_inputs(sur, ref);
        const CafPlan plan = make_plan(sur.size(), grid);
        std::vector<double> row(plan.bins, 0.0);
        std::vector<cdouble> blocks(plan.blocks);
        for (std::size_t tau = 0; tau <= plan.max_delay; ++tau)
            accumulate_delay(sur, ref, tau, plan, grid.decimation, blocks, row);
        return row;
    }

} // namespace psense::kernels
