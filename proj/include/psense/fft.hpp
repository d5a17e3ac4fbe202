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

#ifndef PSENSE_FFT_HPP
#define PSENSE_FFT_HPP

#include <complex>
#include <span>
#include <vector>

namespace psense
{
    // Unnormalized forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N)
    std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x);

    // Inverse DFT normalized by 1/N
    std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> x);
}

#endif
