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

#include "psense/waveform.hpp"
#include "psense/fft.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace psense
{
    std::size_t Scenario::samples_per_dwell() const
    {
        return static_cast<std::size_t>(std::llround(dwell / sample_period));
    }

    void Scenario::validate() const
    {
        if (!(d_true > 0.0))
            throw std::invalid_argument("scenario: d_true must be positive");
        adoa.validate();
        if (!(sample_period > 0.0) || !(dwell > 0.0))
            throw std::invalid_argument("scenario: sample_period and dwell must be positive");
        const double ratio = dwell / sample_period;
        if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio)
            throw std::invalid_argument("scenario: dwell must be an integer multiple of sample_period");
        if (samples_per_dwell() < 16)
            throw std::invalid_argument("scenario: fewer than 16 samples per dwell");
        if (beam_grid.empty())
            throw std::invalid_argument("scenario: beam grid is empty");
        if (!(beamwidth > 0.0))
            throw std::invalid_argument("scenario: beamwidth must be positive");
        if (aoa_half_plane != 1 && aoa_half_plane != -1)
            throw std::invalid_argument("scenario: aoa_half_plane must be +1 or -1");
        if (!(carriers[0] > 0.0) || !(carriers[1] > 0.0))
            throw std::invalid_argument("scenario: carriers must be positive");
        if (!(baseband_bandwidth > 0.0) || baseband_bandwidth * sample_period > 1.0 + 1e-12)
            throw std::invalid_argument("scenario: baseband bandwidth exceeds the complex sampling rate");
        for (const auto &c : clutter)
        {
            if (c.band < 0 || c.band > 2 || c.beam < 0 || static_cast<std::size_t>(c.beam) > beams())
                throw std::invalid_argument("scenario: clutter entry references an unknown band or beam");
            if (c.path.delay < 0.0 || c.path.delay >= dwell / 4.0)
                throw std::invalid_argument("scenario: clutter delay outside [0, dwell / 4)");
        }
    }

    std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d)
    {
        // splitmix64 finalizer applied over the tuple
        auto mix = [](std::uint64_t z) {
            z += 0x9E3779B97F4A7C15ULL;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            return z ^ (z >> 31);
        };
        std::uint64_t h = mix(seed);
        for (std::uint64_t v : {a, b, c, d})
            h = mix(h ^ mix(v));
        return h;
    }

    Samples make_baseband(std::uint64_t seed, std::size_t n0, double bandwidth, double sample_period)
    {
        if (n0 == 0)
            throw std::invalid_argument("make_baseband: empty sequence requested");
        if (!(bandwidth > 0.0) || bandwidth * sample_period > 1.0 + 1e-12)
            throw std::invalid_argument("make_baseband: bandwidth exceeds the complex sampling rate 1/T_s");

        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
        Samples s(n0);
        for (auto &v : s)
            v = {gauss(rng), gauss(rng)};

        // Brick-wall band limit in the frequency domain
        if (bandwidth * sample_period < 1.0)
        {
            Samples spec = fft(s);
            const double df = 1.0 / (static_cast<double>(n0) * sample_period);
            for (std::size_t i = 0; i < n0; ++i)
            {
                const double f = (i <= n0 / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n0)) * df;
                if (std::abs(f) > bandwidth / 2.0)
                    spec[i] = 0.0;
            }
            s = ifft(spec);
        }

        double power = 0.0;
        for (const auto &v : s)
            power += std::norm(v);
        power /= static_cast<double>(n0);
        if (!(power > 0.0))
            throw std::runtime_error("make_baseband: degenerate all-zero sequence");
        const double scale = 1.0 / std::sqrt(power);
        for (auto &v : s)
            v *= scale;
        return s;
    }

    void add_awgn(std::span<cdouble> y, double noise_power, std::uint64_t seed)
    {
        if (noise_power <= 0.0)
            return;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
        for (auto &v : y)
        {
            const double re = gauss(rng);
            const double im = gauss(rng);
            v += cdouble{re, im};
        }
    }

    namespace
    {
        std::ptrdiff_t delay_samples(double delay, double sample_period)
        {
            return static_cast<std::ptrdiff_t>(std::llround(delay / sample_period));
        }

        // y[n] += a * s[n - shift] (zero before the start of the dwell)
        void accumulate_path(std::span<cdouble> y, std::span<const cdouble> s, cdouble a, std::ptrdiff_t shift)
        {
            const auto n0 = static_cast<std::ptrdiff_t>(y.size());
            for (std::ptrdiff_t n = std::max<std::ptrdiff_t>(shift, 0); n < n0; ++n)
                y[n] += a * s[n - shift];
        }
    } // namespace

    Samples synth_reference(std::span<const cdouble> s, const PathSpec &los, double sample_period,
                            double noise_power, std::uint64_t seed)
    {
        Samples y(s.size(), cdouble{0.0, 0.0});
        accumulate_path(y, s, los.gain, delay_samples(los.delay, sample_period));
        add_awgn(y, noise_power, seed);
        return y;
    }

    Samples synth_surveillance(std::span<const cdouble> s, const std::optional<TargetPath> &target,
                               std::span<const PathSpec> clutter, double sample_period, double noise_power,
                               std::uint64_t seed)
    {
        Samples y(s.size(), cdouble{0.0, 0.0});
        if (target)
        {
            const auto shift = delay_samples(target->path.delay, sample_period);
            const auto n0 = static_cast<std::ptrdiff_t>(y.size());
            const double w = -2.0 * std::numbers::pi * target->doppler * sample_period;
            for (std::ptrdiff_t n = std::max<std::ptrdiff_t>(shift, 0); n < n0; ++n)
                y[n] += target->path.gain * s[n - shift] * std::polar(1.0, w * static_cast<double>(n));
        }
        for (const auto &c : clutter)
            accumulate_path(y, s, c.gain, delay_samples(c.delay, sample_period));
        add_awgn(y, noise_power, seed);
        return y;
    }

    std::size_t covering_beam(const Scenario &sc, const Point2 &p)
    {
        if (p.norm() == 0.0)
            return 0;
        if (p.y != 0.0 && (p.y > 0.0 ? 1 : -1) != sc.aoa_half_plane)
            return 0;
        const double angle = aoa(p);
        std::size_t best = 0;
        double best_dist = sc.beamwidth / 2.0;
        for (std::size_t q = 0; q < sc.beams(); ++q)
        {
            const double dist = std::abs(angle - sc.beam_grid[q]);
            if (dist <= best_dist && (best == 0 || dist < best_dist))
            {
                best = q + 1;
                best_dist = dist;
            }
        }
        return best;
    }

    namespace
    {
        cdouble amplitude_from_snr(double snr_db, double noise_power)
        {
            return {std::sqrt(noise_power * std::pow(10.0, snr_db / 10.0)), 0.0};
        }

        void quantize_to_float(Samples &y)
        {
            for (auto &v : y)
                v = {static_cast<double>(static_cast<float>(v.real())), static_cast<double>(static_cast<float>(v.imag()))};
        }
    } // namespace

    SweepCapture simulate_sweep(const Scenario &sc, std::span<const TruthState> truth, std::size_t k)
    {
        if (k < 1 || k > truth.size())
            throw std::out_of_range("simulate_sweep: truth track undefined at sweep " + std::to_string(k));

        constexpr double noise_power = 1.0;
        const std::size_t n0 = sc.samples_per_dwell();
        const std::size_t nq = sc.beams();
        const auto lambdas = sc.wavelengths();
        const std::array<Point2, 2> tx{sc.tx1(), sc.tx2()};
        const TruthState &state = truth[k - 1];
        const std::size_t covered = covering_beam(sc, state.p);

        SweepCapture out;
        out.sweep = k;
        out.truth = state;
        out.dwells.resize(2 * nq);

        const auto total = static_cast<std::ptrdiff_t>(2 * nq);
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t idx = 0; idx < total; ++idx)
        {
            const int band = static_cast<int>(idx / static_cast<std::ptrdiff_t>(nq)) + 1;
            const std::size_t q = static_cast<std::size_t>(idx) % nq + 1;
            const std::size_t m = static_cast<std::size_t>(band - 1);

            DwellCapture &dw = out.dwells[static_cast<std::size_t>(idx)];
            dw.band = band;
            dw.sweep = k;
            dw.beam = q;
            dw.beam_angle = sc.beam_grid[q - 1];

            const Samples s = make_baseband(mix_seed(sc.waveform_seed, m, k, q), n0, sc.baseband_bandwidth,
                                            sc.sample_period);

            std::optional<TargetPath> target;
            if (q == covered)
            {
                const double offset = (static_cast<double>(q - 1) + 0.5) * sc.dwell;
                const Point2 mid = state.p + state.v * offset;
                const double excess = (mid - tx[m]).norm() + mid.norm() - tx[m].norm();
                TargetPath tp;
                tp.path.gain = amplitude_from_snr(sc.snr_target_db[m], noise_power) *
                               std::polar(1.0, -2.0 * std::numbers::pi * std::fmod(excess / lambdas[m], 1.0));
                tp.path.delay = excess / speed_of_light;
                tp.doppler = bistatic_doppler(mid, state.v, tx[m], lambdas[m]);
                target = tp;
            }

            std::vector<PathSpec> clutter;
            for (const auto &c : sc.clutter)
                if ((c.band == 0 || c.band == band) && (c.beam == 0 || static_cast<std::size_t>(c.beam) == q))
                    clutter.push_back(c.path);

            PathSpec los{amplitude_from_snr(sc.snr_los_db[m], noise_power), 0.0};
            dw.reference = synth_reference(s, los, sc.sample_period, 0.0, 0);
            if (target && sc.ref_beam_target_leak)
            {
                TargetPath leak = *target;
                leak.path.gain *= std::pow(10.0, sc.leak_db / 20.0);
                const Samples echo = synth_surveillance(s, leak, {}, sc.sample_period, 0.0, 0);
                for (std::size_t n = 0; n < n0; ++n)
                    dw.reference[n] += echo[n];
            }
            dw.surveillance = synth_surveillance(s, target, clutter, sc.sample_period, 0.0, 0);

            // Transmitter CFO rotates every signal component of this band
            if (sc.cfo[m] != 0.0)
            {
                const double w = 2.0 * std::numbers::pi * sc.cfo[m] * sc.sample_period;
                for (std::size_t n = 0; n < n0; ++n)
                {
                    const cdouble rot = std::polar(1.0, w * static_cast<double>(n));
                    dw.reference[n] *= rot;
                    dw.surveillance[n] *= rot;
                }
            }

            add_awgn(dw.reference, noise_power, mix_seed(sc.noise_seed, m, k, q, 0));
            add_awgn(dw.surveillance, noise_power, mix_seed(sc.noise_seed, m, k, q, 1));
            quantize_to_float(dw.reference);
            quantize_to_float(dw.surveillance);
        }
        return out;
    }

    std::vector<TruthState> straight_track(const Point2 &start, const Velocity2 &v, std::size_t sweeps,
                                           double sweep_period)
    {
        std::vector<TruthState> track;
        track.reserve(sweeps);
        for (std::size_t k = 0; k < sweeps; ++k)
            track.push_back({start + v * (static_cast<double>(k) * sweep_period), v});
        return track;
    }

} // namespace psense
