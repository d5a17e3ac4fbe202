// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference computations shared by the unit and acceptance tests.

#ifndef PSENSE_TEST_ORACLES_HPP
#define PSENSE_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace oracle
{
    using cdouble = std::complex<double>;

    // max over tau in [0, max_delay] of |sum_n y[n] conj(r[n - tau]) exp(j 2 pi f n Ts)|
    // for f = i * df, i in [-half, half]
    inline std::vector<double> direct_caf(std::span<const cdouble> y, std::span<const cdouble> r, double ts,
                                          double df, int half, std::size_t max_delay)
    {
        std::vector<double> row(static_cast<std::size_t>(2 * half + 1), 0.0);
        std::vector<cdouble> prod(y.size());
        for (std::size_t tau = 0; tau <= max_delay; ++tau)
        {
            for (std::size_t n = 0; n < y.size(); ++n)
                prod[n] = n >= tau ? y[n] * std::conj(r[n - tau]) : cdouble{0.0, 0.0};
            for (int i = -half; i <= half; ++i)
            {
                // Recursive phasor to keep the oracle cheap; renormalized periodically
                const cdouble step = std::polar(1.0, 2.0 * std::numbers::pi * i * df * ts);
                cdouble w{1.0, 0.0}, acc{0.0, 0.0};
                for (std::size_t n = 0; n < prod.size(); ++n)
                {
                    acc += prod[n] * w;
                    w *= step;
                    if ((n & 1023) == 1023)
                        w = std::polar(1.0, 2.0 * std::numbers::pi * i * df * ts * static_cast<double>(n + 1));
                }
                auto &cell = row[static_cast<std::size_t>(i + half)];
                cell = std::max(cell, std::abs(acc));
            }
        }
        return row;
    }

    inline double energy(std::span<const cdouble> y)
    {
        double e = 0.0;
        for (const auto &v : y)
            e += std::norm(v);
        return e;
    }

    inline double db(double ratio) { return 10.0 * std::log10(ratio); }
    inline double db20(double ratio) { return 20.0 * std::log10(ratio); }

} // namespace oracle

#endif
