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

#include "psense/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

namespace psense
{
    namespace
    {
        // FFTW planning is not thread-safe; execution on distinct arrays is
        std::mutex plan_mutex;

        std::vector<std::complex<double>> transform(std::span<const std::complex<double>> x, int sign)
        {
            const int n = static_cast<int>(x.size());
            std::vector<std::complex<double>> out(x.begin(), x.end());
            if (n == 0)
                return out;
            auto *buf = reinterpret_cast<fftw_complex *>(out.data());
            fftw_plan plan;
            {
                std::lock_guard<std::mutex> lock(plan_mutex);
                plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE);
            }
            fftw_execute(plan);
            {
                std::lock_guard<std::mutex> lock(plan_mutex);
                fftw_destroy_plan(plan);
            }
            return out;
        }
    } // namespace

    std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x)
    {
        return transform(x, FFTW_FORWARD);
    }

    std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> x)
    {
        auto out = transform(x, FFTW_BACKWARD);
        const double scale = out.empty() ? 1.0 : 1.0 / static_cast<double>(out.size());
        std::transform(out.begin(), out.end(), out.begin(), [scale](auto v) { return v * scale; });
        return out;
    }
}
