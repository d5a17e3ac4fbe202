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

#ifndef PSENSE_PIPELINE_HPP
#define PSENSE_PIPELINE_HPP

#include "psense/blockage.hpp"
#include "psense/dsp.hpp"
#include "psense/estimator.hpp"
#include "psense/io.hpp"
#include "psense/waveform.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace psense
{
    // Error carrying the pipeline stage that raised it
    class StageError : public std::runtime_error
    {
    public:
        StageError(std::string stage, const std::string &what)
            : std::runtime_error(stage + ": " + what), stage_(std::move(stage))
        {
        }
        const std::string &stage() const { return stage_; }

    private:
        std::string stage_;
    };

    struct Metrics
    {
        double tx1_error = 0.0;       // |d_hat - d|
        double tx2_error = 0.0;       // |tx2_hat - tx2|
        double traj_mean_error = 0.0; // mean_k |p_hat_k - p_k|
        double traj_rms_error = 0.0;
        double aoa_mean_error = 0.0;  // raw detected AoA vs truth, degrees
        double aoa_rms_error = 0.0;
        std::optional<double> true_crossing_t;    // LoS-1 crossing after the last sweep, from truth
        std::optional<double> blockage_time_error; // |t_hat_1 - t_true|
    };

    struct SweepEstimate
    {
        std::size_t k = 1;
        double t = 0.0;
        Point2 p;
        Velocity2 v;
    };

    struct RunReport
    {
        AdoaPair adoa;
        std::array<double, 2> carriers{};
        double sweep_period = 0.0;
        std::vector<FeatureVector> features;        // raw detections
        std::vector<FeatureVector> smoothed;        // AoA-smoothed, fed to the estimator
        double d = 0.0;
        Point2 tx2;
        double objective = 0.0;
        bool converged = false;
        std::vector<double> start_objectives;
        std::vector<SweepEstimate> sweeps;
        std::size_t window = 3;
        std::optional<BlockagePrediction> prediction;
        std::optional<Metrics> metrics;
    };

    nlohmann::json report_to_json(const RunReport &r);
    RunReport report_from_json(const nlohmann::json &j);

    // Writes one capture container per sweep plus truth.csv
    void simulate_to_dir(const Scenario &sc, std::span<const TruthState> truth, const std::filesystem::path &dir);

    struct DetectOutput
    {
        std::vector<FeatureVector> features;
        std::vector<std::array<DopplerAngleMap, 2>> maps; // kept only when requested
    };

    // Features for every sweep container in dir; a sweep with missing dwells yields an invalid row
    DetectOutput detect_dir(const std::filesystem::path &dir, const DetectorConfig &cfg, bool keep_maps = false);

    // Simulate and detect in memory, one sweep at a time
    DetectOutput simulate_and_detect(const Scenario &sc, std::span<const TruthState> truth, const DetectorConfig &cfg,
                                     bool keep_maps = false);

    // Smooth, estimate and predict from detected features
    RunReport estimate_report(std::span<const FeatureVector> features, const AdoaPair &adoa, const PipelineConfig &cfg);

    // Re-runs blockage prediction on a report's estimated trajectory
    void predict_report(RunReport &report, std::size_t window);

    Metrics compute_metrics(const RunReport &report, const Point2 &tx1_true, const Point2 &tx2_true,
                            std::span<const TruthState> truth);

    // Full simulate -> detect -> smooth -> estimate -> predict chain, with metrics
    RunReport run_pipeline(const Scenario &sc, std::span<const TruthState> truth, const PipelineConfig &cfg);

    // CSV/SVG artifacts for Doppler-angle maps, feature timelines and the trajectory
    void write_plots(const std::filesystem::path &dir, const RunReport &report, const DetectOutput &detected,
                     std::span<const TruthState> truth, std::optional<Point2> tx2_true);

} // namespace psense

#endif
