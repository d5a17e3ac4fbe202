// SPDX-License-Identifier: Apache-2.0
//
// Times the OpenMP kernels against their serial reference versions on one
// simulated dwell. Usage: bench_kernels [N0] [taps] [repeats]

#include "psense/kernels.hpp"
#include "psense/waveform.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

using namespace psense;

namespace
{
    double best_of(int repeats, const std::function<void()> &fn)
    {
        double best = 1e300;
        for (int r = 0; r < repeats; ++r)
        {
            const auto t0 = std::chrono::steady_clock::now();
            fn();
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    }

    double max_abs_diff(const std::vector<double> &a, const std::vector<double> &b)
    {
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            d = std::max(d, std::abs(a[i] - b[i]));
        return d;
    }
}

int main(int argc, char **argv)
{
    const std::size_t n0 = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 50000;
    const std::size_t taps = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 64;
    const int repeats = argc > 3 ? std::atoi(argv[3]) : 3;
    const double ts = 1e-6;

    const Samples s = make_baseband(1, n0, 1.0 / ts, ts);
    const Samples ref = synth_reference(s, {{30.0, 0.0}, 0.0}, ts, 1.0, 2);
    const std::vector<PathSpec> clutter{{{10.0, 0.0}, 0.0}, {{3.0, 4.0}, 2 * ts}};
    const Samples sur = synth_surveillance(s, TargetPath{{{3.0, 0.0}, 5 * ts}, 140.0}, clutter, ts, 1.0, 3);

    std::printf("N0 = %zu, taps = %zu, threads = %d, best of %d\n", n0, taps, omp_get_max_threads(), repeats);

    kernels::ClutterResult fast, serial;
    const double t_fast = best_of(repeats, [&] { fast = kernels::clutter_cancel(sur, ref, taps); });
    const double t_serial = best_of(repeats, [&] { serial = kernels::clutter_cancel_serial(sur, ref, taps); });
    double coeff_diff = 0.0;
    for (std::size_t i = 0; i < taps; ++i)
        coeff_diff = std::max(coeff_diff, std::abs(fast.coeffs[i] - serial.coeffs[i]));
    std::printf("clutter_cancel  parallel %8.4f s  serial %8.4f s  speedup %5.2fx  max coeff diff %.2e\n", t_fast,
                t_serial, t_serial / t_fast, coeff_diff);

    const kernels::CafGrid grid{ts, 1000.0, 500, 64};
    std::vector<double> row_fast, row_serial;
    const double c_fast = best_of(repeats, [&] { row_fast = kernels::caf_row(fast.residual, ref, grid); });
    const double c_serial = best_of(repeats, [&] { row_serial = kernels::caf_row_serial(fast.residual, ref, grid); });
    std::printf("caf_row         parallel %8.4f s  serial %8.4f s  speedup %5.2fx  max diff %.2e\n", c_fast, c_serial,
                c_serial / c_fast, max_abs_diff(row_fast, row_serial));
    return 0;
}
