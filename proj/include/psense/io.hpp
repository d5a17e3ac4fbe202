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

// On-disk formats.
//
// Capture container (one file per sweep, extension .psiq): a sequence of
// dwell records, band-major then beam. Each record is a 48-byte header
// followed by N0 reference samples and N0 surveillance samples. All fields
// are little-endian:
//
//   offset  size  field
//   0       4     magic "PSIQ"
//   4       4     u32 format version (1)
//   8       4     u32 band (1 or 2)
//   12      4     u32 sweep index k (1-based)
//   16      4     u32 beam index q (1-based)
//   20      4     u32 N0
//   24      8     f64 sample period T_s [s]
//   32      8     f64 beam angle [deg]
//   40      8     f64 carrier [Hz]
//
// Each complex sample is two IEEE-754 binary32 values, I then Q.
//
// Scenario, pipeline configuration and run reports are JSON documents with a
// "format" tag and an integer "version"; see README.md for the field list.

#ifndef PSENSE_IO_HPP
#define PSENSE_IO_HPP

#include "psense/blockage.hpp"
#include "psense/dsp.hpp"
#include "psense/estimator.hpp"
#include "psense/waveform.hpp"

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace psense
{
    class FormatError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline constexpr std::uint32_t capture_version = 1;
    inline constexpr std::size_t capture_header_bytes = 48;

    struct CaptureRecord
    {
        DwellCapture dwell;
        double sample_period = 0.0;
        double carrier = 0.0;
    };

    std::vector<std::byte> encode_capture(std::span<const CaptureRecord> records);
    std::vector<CaptureRecord> decode_capture(std::span<const std::byte> bytes);

    // Writes through a temporary file and renames it into place
    void write_file_atomic(const std::filesystem::path &path, std::span<const std::byte> bytes);
    void write_text_atomic(const std::filesystem::path &path, const std::string &text);
    std::vector<std::byte> read_file(const std::filesystem::path &path);

    std::filesystem::path sweep_capture_path(const std::filesystem::path &dir, std::size_t sweep);
    void write_sweep_capture(const std::filesystem::path &dir, const SweepCapture &capture, const Scenario &sc);
    std::vector<CaptureRecord> read_sweep_capture(const std::filesystem::path &path);

    // Rebuilds a SweepCapture; missing dwells throw FormatError
    SweepCapture assemble_sweep(std::span<const CaptureRecord> records, std::size_t beams);

    // Features CSV: k,t_start_s,aoa_deg,aoa_valid,f1_hz,f1_valid,f2_hz,f2_valid,peak1_mag,peak2_mag,
    // aoa_dwell_s,f1_dwell_s,f2_dwell_s. Rows without the three dwell columns are accepted.
    std::string features_to_csv(std::span<const FeatureVector> rows);
    std::vector<FeatureVector> features_from_csv(const std::string &text);

    // Truth CSV: k,t,x,y,vx,vy (start-of-sweep state)
    std::string truth_to_csv(std::span<const TruthState> truth, double sweep_period);
    std::vector<TruthState> truth_from_csv(const std::string &text);

    std::string read_text(const std::filesystem::path &path);

    nlohmann::json scenario_to_json(const Scenario &sc);
    Scenario scenario_from_json(const nlohmann::json &j);

    // Radio parameters the estimator needs without the full scenario
    struct RadioConfig
    {
        std::array<double, 2> carriers{60.98e9, 60.985e9};
        double dwell = 0.05;
        std::size_t beams = 4;
        double beamwidth = 10.0;
        int aoa_half_plane = 1;

        double sweep_period() const { return dwell * static_cast<double>(beams); }
        double doppler_bin() const { return 1.0 / dwell; }
        std::array<double, 2> wavelengths() const { return {wavelength(carriers[0]), wavelength(carriers[1])}; }
        static RadioConfig from_scenario(const Scenario &sc);
    };

    struct PipelineConfig
    {
        DetectorConfig detector;
        EstimatorConfig estimator;
        bool weights_from_radio = true; // inverse-variance defaults unless weights are given
        PredictorConfig predictor;
        RadioConfig radio;
        int smoothing_degree = 3;

        // Estimator config with weights and half-plane resolved against the radio section
        EstimatorConfig resolved_estimator() const;
    };

    nlohmann::json config_to_json(const PipelineConfig &cfg);
    PipelineConfig config_from_json(const nlohmann::json &j);

    // Features as JSON objects (used inside reports)
    nlohmann::json feature_to_json(const FeatureVector &z);
    FeatureVector feature_from_json(const nlohmann::json &j);

} // namespace psense

#endif
