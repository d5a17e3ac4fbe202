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

// Joint estimation of the RX-TX1 distance and the blocker trajectory from
// per-sweep AoA and two-band Doppler measurements.
//
// The unknown vector is x = [d, p1.x, p1.y, v1.x, v1.y, ..., vK.x, vK.y]. The
// weighted residual of sweep k stacks sqrt(w_aoa) (aoa_k - aoa(p_k)) in
// radians and sqrt(w_f) (f_mk - doppler_m(p_k, v_k)) for each valid band.
// Invalid measurements contribute no row.
//
// With dwell timing enabled (off by default) each measurement is modelled at the blocker
// position at its dwell midpoint, p_k + v_k * dwell_offset, rather than at the
// sweep start p_k. Zero offsets reduce to the per-sweep model.

#ifndef PSENSE_ESTIMATOR_HPP
#define PSENSE_ESTIMATOR_HPP

#include "psense/dsp.hpp"
#include "psense/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace psense
{
    class EstimationError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct FeatureWeights
    {
        double aoa = 1.0;     // 1/rad^2
        double doppler1 = 1.0; // 1/Hz^2
        double doppler2 = 1.0;

        // Inverse-variance weights: AoA sigma = beamwidth, Doppler sigma = bin spacing
        static FeatureWeights inverse_variance(double beamwidth_deg, double doppler_bin_hz);
    };

    struct EstimatorConfig
    {
        FeatureWeights weights;
        std::size_t starts = 16;
        std::size_t max_iters = 300;
        double damping_init = 1e-3; // relative to the largest diagonal entry of J^T J
        double step_tol = 1e-10;
        double objective_tol = 1e-14;
        std::array<double, 2> d_bounds{0.5, 10.0};
        std::array<double, 2> range_bounds{0.3, 6.0}; // initial blocker range on the first AoA ray
        double speed_bound = 3.0;
        int aoa_half_plane = 1;
        bool dwell_timing = false;
        std::uint64_t seed = 1;

        void validate() const;
    };

    // Everything the forward model needs besides the unknowns
    struct ObservationModel
    {
        std::span<const FeatureVector> features;
        AdoaPair adoa;
        std::array<double, 2> wavelengths{};
        double sweep_period = 0.2;
        FeatureWeights weights;
        bool dwell_timing = false;
    };

    // Packing between MotionParams and the flat unknown vector
    Eigen::VectorXd pack(const MotionParams &mp);
    MotionParams unpack(const Eigen::VectorXd &x);

    std::size_t valid_sweeps(std::span<const FeatureVector> features);

    Eigen::VectorXd residuals(const MotionParams &mp, const ObservationModel &model);

    // Analytic d(residual)/dx, one row per residual entry
    Eigen::MatrixXd jacobian(const MotionParams &mp, const ObservationModel &model);

    double objective(const MotionParams &mp, const ObservationModel &model);

    struct LmResult
    {
        MotionParams params;
        double objective = 0.0;
        bool converged = false;
        std::size_t iterations = 0;
        std::vector<double> accepted_objectives; // objective after init and after each accepted step
    };

    LmResult lm_fit(const MotionParams &init, const ObservationModel &model, const EstimatorConfig &cfg);

    // Constant velocity reproducing a Doppler pair at a given blocker position
    std::optional<Velocity2> doppler_consistent_velocity(const Point2 &p, double d, const AdoaPair &adoa,
                                                         const std::array<double, 2> &wavelengths, double f1,
                                                         double f2);

    std::vector<MotionParams> init_candidates(const ObservationModel &model, const EstimatorConfig &cfg);

    // Replaces velocities the features cannot see (before the first and after
    // the last measured sweep, and inside gaps of two or more unmeasured
    // sweeps) with constant-velocity values. Every measured position, and so
    // the objective, is unchanged.
    void fill_unobserved(MotionParams &mp, std::span<const FeatureVector> features, double sweep_period);

    struct Estimate
    {
        MotionParams params;
        double objective = 0.0;
        std::vector<double> start_objectives;
        bool converged = false;
        Point2 tx2;
    };

    Estimate estimate(const ObservationModel &model, const EstimatorConfig &cfg);

} // namespace psense

#endif
