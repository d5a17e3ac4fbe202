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

// Hot DSP kernels. Each kernel has an OpenMP implementation used by the
// pipeline and a plain serial implementation kept as a reference for tests
// and for the benchmark.

#ifndef PSENSE_KERNELS_HPP
#define PSENSE_KERNELS_HPP

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

namespace psense
{
    class DspError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };
}

namespace psense::kernels
{
    using cdouble = std::complex<double>;

    struct ClutterResult
    {
        std::vector<cdouble> residual;
        std::vector<cdouble> coeffs; // one per reference tap
    };

    // Least-squares projection of the surveillance signal out of the span of
    // the reference delayed by 0..taps-1 samples. Throws DspError when the
    // delayed-reference matrix is rank deficient.
    ClutterResult clutter_cancel(std::span<const cdouble> surveillance, std::span<const cdouble> reference,
                                 std::size_t taps);

    // Dense QR on the explicit delayed-reference matrix
    ClutterResult clutter_cancel_serial(std::span<const cdouble> surveillance, std::span<const cdouble> reference,
                                        std::size_t taps);

    struct CafGrid
    {
        double sample_period = 1e-6;
        double doppler_max = 1000.0;
        std::size_t decimation = 250;
        std::size_t delay_search_max = 64;
    };

    // Doppler bin spacing 1/(N0 T_s) and number of bins on each side of 0 Hz
    double doppler_resolution(std::size_t n0, double sample_period);
    std::size_t doppler_half_bins(std::size_t n0, const CafGrid &grid);

    // Cross-ambiguity magnitude maximized over integer delays 0..delay_search_max,
    // one value per Doppler bin i * df for i in [-M, M]. Computed by
    // integrate-and-dump decimation of the lag product followed by a DFT, with
    // the boxcar droop compensated per bin.
    std::vector<double> caf_row(std::span<const cdouble> surveillance, std::span<const cdouble> reference,
                                const CafGrid &grid);

    std::vector<double> caf_row_serial(std::span<const cdouble> surveillance, std::span<const cdouble> reference,
                                       const CafGrid &grid);

} // namespace psense::kernels

#endif
