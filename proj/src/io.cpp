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

#include "psense/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace psense
{
    namespace
    {
        // Little-endian scalar codec
        template <typename T>
        void put(std::vector<std::byte> &out, T value)
        {
            static_assert(std::is_trivially_copyable_v<T>);
            std::array<std::byte, sizeof(T)> raw;
            std::memcpy(raw.data(), &value, sizeof(T));
            if constexpr (std::endian::native == std::endian::big)
                std::reverse(raw.begin(), raw.end());
            out.insert(out.end(), raw.begin(), raw.end());
        }

        template <typename T>
        T get(std::span<const std::byte> in, std::size_t &pos)
        {
            if (pos + sizeof(T) > in.size())
                throw FormatError("capture: truncated record at byte " + std::to_string(pos));
            std::array<std::byte, sizeof(T)> raw;
            std::memcpy(raw.data(), in.data() + pos, sizeof(T));
            if constexpr (std::endian::native == std::endian::big)
                std::reverse(raw.begin(), raw.end());
            pos += sizeof(T);
            T value;
            std::memcpy(&value, raw.data(), sizeof(T));
            return value;
        }

        constexpr std::array<char, 4> magic{'P', 'S', 'I', 'Q'};
    } // namespace

    std::vector<std::byte> encode_capture(std::span<const CaptureRecord> records)
    {
        std::vector<std::byte> out;
        for (const auto &rec : records)
        {
            const auto &dw = rec.dwell;
            if (dw.reference.size() != dw.surveillance.size())
                throw FormatError("capture: reference and surveillance lengths differ");
            out.reserve(out.size() + capture_header_bytes + dw.reference.size() * 16);
            for (char c : magic)
                out.push_back(static_cast<std::byte>(c));
            put<std::uint32_t>(out, capture_version);
            put<std::uint32_t>(out, static_cast<std::uint32_t>(dw.band));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(dw.sweep));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(dw.beam));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(dw.reference.size()));
            put<double>(out, rec.sample_period);
            put<double>(out, dw.beam_angle);
            put<double>(out, rec.carrier);
            for (const auto *seq : {&dw.reference, &dw.surveillance})
                for (const auto &v : *seq)
                {
                    put<float>(out, static_cast<float>(v.real()));
                    put<float>(out, static_cast<float>(v.imag()));
                }
        }
        return out;
    }

    std::vector<CaptureRecord> decode_capture(std::span<const std::byte> bytes)
    {
        std::vector<CaptureRecord> out;
        std::size_t pos = 0;
        while (pos < bytes.size())
        {
            if (pos + capture_header_bytes > bytes.size())
                throw FormatError("capture: truncated header at byte " + std::to_string(pos));
            for (char c : magic)
                if (static_cast<char>(bytes[pos++]) != c)
                    throw FormatError("capture: bad magic (expected \"PSIQ\")");
            const auto version = get<std::uint32_t>(bytes, pos);
            if (version != capture_version)
                throw FormatError("capture: unsupported format version " + std::to_string(version));

            CaptureRecord rec;
            rec.dwell.band = static_cast<int>(get<std::uint32_t>(bytes, pos));
            rec.dwell.sweep = get<std::uint32_t>(bytes, pos);
            rec.dwell.beam = get<std::uint32_t>(bytes, pos);
            const std::size_t n0 = get<std::uint32_t>(bytes, pos);
            rec.sample_period = get<double>(bytes, pos);
            rec.dwell.beam_angle = get<double>(bytes, pos);
            rec.carrier = get<double>(bytes, pos);
            if (pos + n0 * 16 > bytes.size())
                throw FormatError("capture: sample payload shorter than 2 * N0 complex samples");
            for (auto *seq : {&rec.dwell.reference, &rec.dwell.surveillance})
            {
                seq->resize(n0);
                for (auto &v : *seq)
                {
                    const float re = get<float>(bytes, pos);
                    const float im = get<float>(bytes, pos);
                    v = {re, im};
                }
            }
            out.push_back(std::move(rec));
        }
        return out;
    }

    void write_file_atomic(const std::filesystem::path &path, std::span<const std::byte> bytes)
    {
        const auto tmp = std::filesystem::path(path.string() + ".tmp");
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f)
                throw std::runtime_error("cannot open " + tmp.string() + " for writing");
            f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
            if (!f)
                throw std::runtime_error("write failed: " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

    void write_text_atomic(const std::filesystem::path &path, const std::string &text)
    {
        write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
    }

    std::vector<std::byte> read_file(const std::filesystem::path &path)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot open " + path.string());
        f.seekg(0, std::ios::end);
        std::vector<std::byte> bytes(static_cast<std::size_t>(f.tellg()));
        f.seekg(0);
        f.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        return bytes;
    }

    std::string read_text(const std::filesystem::path &path)
    {
        std::ifstream f(path);
        if (!f)
            throw std::runtime_error("cannot open " + path.string());
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    std::filesystem::path sweep_capture_path(const std::filesystem::path &dir, std::size_t sweep)
    {
        char name[32];
        std::snprintf(name, sizeof(name), "sweep_%05zu.psiq", sweep);
        return dir / name;
    }

    void write_sweep_capture(const std::filesystem::path &dir, const SweepCapture &capture, const Scenario &sc)
    {
        std::vector<CaptureRecord> recs;
        recs.reserve(capture.dwells.size());
        for (const auto &dw : capture.dwells)
            recs.push_back({dw, sc.sample_period, sc.carriers[static_cast<std::size_t>(dw.band - 1)]});
        write_file_atomic(sweep_capture_path(dir, capture.sweep), encode_capture(recs));
    }

    std::vector<CaptureRecord> read_sweep_capture(const std::filesystem::path &path)
    {
        return decode_capture(read_file(path));
    }

    SweepCapture assemble_sweep(std::span<const CaptureRecord> records, std::size_t beams)
    {
        if (records.empty())
            throw FormatError("capture: empty sweep container");
        SweepCapture sc;
        sc.sweep = records.front().dwell.sweep;
        sc.dwells.resize(2 * beams);
        std::vector<bool> seen(2 * beams, false);
        for (const auto &rec : records)
        {
            const auto &dw = rec.dwell;
            if (dw.band < 1 || dw.band > 2 || dw.beam < 1 || dw.beam > beams || dw.sweep != sc.sweep)
                throw FormatError("capture: record (band " + std::to_string(dw.band) + ", beam " +
                                  std::to_string(dw.beam) + ") outside the sweep grid");
            const std::size_t idx = static_cast<std::size_t>(dw.band - 1) * beams + dw.beam - 1;
            sc.dwells[idx] = dw;
            seen[idx] = true;
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i])
                throw FormatError("capture: sweep " + std::to_string(sc.sweep) + " is missing band " +
                                  std::to_string(i / beams + 1) + " beam " + std::to_string(i % beams + 1));
        return sc;
    }

    namespace
    {
        std::string fmt9(double v)
        {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            return buf;
        }

        std::string fmt17(double v)
        {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return buf;
        }

        std::vector<std::vector<std::string>> split_csv(const std::string &text, std::size_t columns,
                                                        const char *what, std::size_t legacy_columns = 0)
        {
            std::vector<std::vector<std::string>> rows;
            std::istringstream in(text);
            std::string line;
            bool header = true;
            std::size_t lineno = 0;
            while (std::getline(in, line))
            {
                ++lineno;
                if (!line.empty() && line.back() == '\r')
                    line.pop_back();
                if (line.empty())
                    continue;
                if (header)
                {
                    header = false;
                    continue;
                }
                std::vector<std::string> cells;
                std::istringstream ls(line);
                std::string cell;
                while (std::getline(ls, cell, ','))
                    cells.push_back(cell);
                if (cells.size() != columns && cells.size() != legacy_columns)
                    throw FormatError(std::string(what) + ": line " + std::to_string(lineno) + " has " +
                                      std::to_string(cells.size()) + " fields, expected " +
                                      std::to_string(columns));
                rows.push_back(std::move(cells));
            }
            return rows;
        }

        double to_double(const std::string &s)
        {
            try
            {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size())
                    throw FormatError("trailing characters in number '" + s + "'");
                return v;
            }
            catch (const std::logic_error &)
            {
                throw FormatError("not a number: '" + s + "'");
            }
        }
    } // namespace

    std::string features_to_csv(std::span<const FeatureVector> rows)
    {
        std::string out = "k,t_start_s,aoa_deg,aoa_valid,f1_hz,f1_valid,f2_hz,f2_valid,peak1_mag,peak2_mag,"
                          "aoa_dwell_s,f1_dwell_s,f2_dwell_s\n";
        for (const auto &z : rows)
        {
            out += std::to_string(z.sweep) + "," + fmt9(z.t_start) + ",";
            out += fmt9(z.aoa.value_or(0.0)) + "," + (z.aoa ? "1" : "0") + ",";
            out += fmt9(z.f1.value_or(0.0)) + "," + (z.f1 ? "1" : "0") + ",";
            out += fmt9(z.f2.value_or(0.0)) + "," + (z.f2 ? "1" : "0") + ",";
            out += fmt9(z.peak1) + "," + fmt9(z.peak2) + ",";
            out += fmt9(z.aoa_dwell) + "," + fmt9(z.f1_dwell) + "," + fmt9(z.f2_dwell) + "\n";
        }
        return out;
    }

    std::vector<FeatureVector> features_from_csv(const std::string &text)
    {
        std::vector<FeatureVector> out;
        for (const auto &c : split_csv(text, 13, "features csv", 10))
        {
            FeatureVector z;
            z.sweep = static_cast<std::size_t>(to_double(c[0]));
            z.t_start = to_double(c[1]);
            if (c[3] == "1")
                z.aoa = to_double(c[2]);
            if (c[5] == "1")
                z.f1 = to_double(c[4]);
            if (c[7] == "1")
                z.f2 = to_double(c[6]);
            z.peak1 = to_double(c[8]);
            z.peak2 = to_double(c[9]);
            if (c.size() == 13)
            {
                z.aoa_dwell = to_double(c[10]);
                z.f1_dwell = to_double(c[11]);
                z.f2_dwell = to_double(c[12]);
            }
            out.push_back(z);
        }
        return out;
    }

    std::string truth_to_csv(std::span<const TruthState> truth, double sweep_period)
    {
        std::string out = "k,t,x,y,vx,vy\n";
        for (std::size_t k = 0; k < truth.size(); ++k)
        {
            const auto &s = truth[k];
            out += std::to_string(k + 1) + "," + fmt17(static_cast<double>(k) * sweep_period) + "," + fmt17(s.p.x) +
                   "," + fmt17(s.p.y) + "," + fmt17(s.v.vx) + "," + fmt17(s.v.vy) + "\n";
        }
        return out;
    }

    std::vector<TruthState> truth_from_csv(const std::string &text)
    {
        std::vector<TruthState> out;
        for (const auto &c : split_csv(text, 6, "truth csv"))
        {
            const auto k = static_cast<std::size_t>(to_double(c[0]));
            if (k != out.size() + 1)
                throw FormatError("truth csv: sweep indices must be consecutive from 1");
            out.push_back({{to_double(c[2]), to_double(c[3])}, {to_double(c[4]), to_double(c[5])}});
        }
        return out;
    }

    // ---- JSON documents ----------------------------------------------------

    namespace
    {
        using nlohmann::json;

        void check_format(const json &j, const char *format)
        {
            if (!j.is_object() || j.value("format", "") != format)
                throw FormatError(std::string("expected a JSON document with \"format\": \"") + format + "\"");
            if (j.value("version", 0) != 1)
                throw FormatError(std::string(format) + ": unsupported version");
        }

        template <typename T>
        void read_opt(const json &j, const char *key, T &dst)
        {
            if (j.contains(key))
                dst = j.at(key).get<T>();
        }
    } // namespace

    nlohmann::json scenario_to_json(const Scenario &sc)
    {
        json clutter = json::array();
        for (const auto &c : sc.clutter)
            clutter.push_back({{"band", c.band},
                               {"beam", c.beam},
                               {"gain_re", c.path.gain.real()},
                               {"gain_im", c.path.gain.imag()},
                               {"delay_s", c.path.delay}});
        return {{"format", "psense-scenario"},
                {"version", 1},
                {"d_true", sc.d_true},
                {"adoa", {{"phi_rx", sc.adoa.phi_rx}, {"phi_tx1", sc.adoa.phi_tx1}, {"half_plane", sc.adoa.half_plane}}},
                {"carriers_hz", sc.carriers},
                {"baseband_bandwidth_hz", sc.baseband_bandwidth},
                {"sample_period_s", sc.sample_period},
                {"dwell_s", sc.dwell},
                {"beam_grid_deg", sc.beam_grid},
                {"beamwidth_deg", sc.beamwidth},
                {"aoa_half_plane", sc.aoa_half_plane},
                {"snr_los_db", sc.snr_los_db},
                {"snr_target_db", sc.snr_target_db},
                {"clutter", clutter},
                {"cfo_hz", sc.cfo},
                {"ref_beam_target_leak", sc.ref_beam_target_leak},
                {"leak_db", sc.leak_db},
                {"noise_seed", sc.noise_seed},
                {"waveform_seed", sc.waveform_seed},
                {"max_speed", sc.max_speed}};
    }

    Scenario scenario_from_json(const nlohmann::json &j)
    {
        check_format(j, "psense-scenario");
        Scenario sc;
        try
        {
            read_opt(j, "d_true", sc.d_true);
            if (j.contains("adoa"))
            {
                const auto &a = j.at("adoa");
                sc.adoa.phi_rx = a.at("phi_rx").get<double>();
                sc.adoa.phi_tx1 = a.at("phi_tx1").get<double>();
                sc.adoa.half_plane = a.at("half_plane").get<int>();
            }
            else if (j.contains("tx2"))
            {
                // Convenience: derive the ADoA pair from an explicit TX2 position
                const auto p = j.at("tx2").get<std::array<double, 2>>();
                const auto res = adoa_from_positions({sc.d_true, 0.0}, {p[0], p[1]});
                if (res.collinear)
                    throw FormatError("scenario: tx2 is collinear with the RX-TX1 axis");
                sc.adoa = res.adoa;
            }
            read_opt(j, "carriers_hz", sc.carriers);
            read_opt(j, "baseband_bandwidth_hz", sc.baseband_bandwidth);
            read_opt(j, "sample_period_s", sc.sample_period);
            read_opt(j, "dwell_s", sc.dwell);
            read_opt(j, "beam_grid_deg", sc.beam_grid);
            read_opt(j, "beamwidth_deg", sc.beamwidth);
            read_opt(j, "aoa_half_plane", sc.aoa_half_plane);
            read_opt(j, "snr_los_db", sc.snr_los_db);
            read_opt(j, "snr_target_db", sc.snr_target_db);
            if (j.contains("clutter"))
                for (const auto &c : j.at("clutter"))
                {
                    ClutterSpec spec;
                    spec.band = c.value("band", 0);
                    spec.beam = c.value("beam", 0);
                    spec.path.gain = {c.value("gain_re", 0.0), c.value("gain_im", 0.0)};
                    spec.path.delay = c.value("delay_s", 0.0);
                    sc.clutter.push_back(spec);
                }
            read_opt(j, "cfo_hz", sc.cfo);
            read_opt(j, "ref_beam_target_leak", sc.ref_beam_target_leak);
            read_opt(j, "leak_db", sc.leak_db);
            read_opt(j, "noise_seed", sc.noise_seed);
            read_opt(j, "waveform_seed", sc.waveform_seed);
            read_opt(j, "max_speed", sc.max_speed);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("scenario: ") + e.what());
        }
        sc.validate();
        return sc;
    }

    RadioConfig RadioConfig::from_scenario(const Scenario &sc)
    {
        return {sc.carriers, sc.dwell, sc.beams(), sc.beamwidth, sc.aoa_half_plane};
    }

    EstimatorConfig PipelineConfig::resolved_estimator() const
    {
        EstimatorConfig e = estimator;
        if (weights_from_radio)
            e.weights = FeatureWeights::inverse_variance(radio.beamwidth, radio.doppler_bin());
        e.aoa_half_plane = radio.aoa_half_plane;
        return e;
    }

    nlohmann::json config_to_json(const PipelineConfig &cfg)
    {
        const auto &d = cfg.detector;
        const auto &e = cfg.estimator;
        json est = {{"starts", e.starts},
                    {"max_iters", e.max_iters},
                    {"damping_init", e.damping_init},
                    {"step_tol", e.step_tol},
                    {"objective_tol", e.objective_tol},
                    {"d_bounds", e.d_bounds},
                    {"range_bounds", e.range_bounds},
                    {"speed_bound", e.speed_bound},
                    {"dwell_timing", e.dwell_timing},
                    {"seed", e.seed}};
        if (!cfg.weights_from_radio)
            est["weights"] = {e.weights.aoa, e.weights.doppler1, e.weights.doppler2};
        return {{"format", "psense-config"},
                {"version", 1},
                {"detector",
                 {{"doppler_max_hz", d.doppler_max},
                  {"decimation", d.decimation},
                  {"gamma", d.gamma},
                  {"train_half_width", d.train_half_width},
                  {"guard_halfwidth", d.guard_halfwidth},
                  {"clutter_taps", d.clutter_taps},
                  {"delay_search_max", d.delay_search_max}}},
                {"estimator", est},
                {"predictor", {{"window", cfg.predictor.window}}},
                {"radio",
                 {{"carriers_hz", cfg.radio.carriers},
                  {"dwell_s", cfg.radio.dwell},
                  {"beams", cfg.radio.beams},
                  {"beamwidth_deg", cfg.radio.beamwidth},
                  {"aoa_half_plane", cfg.radio.aoa_half_plane}}},
                {"smoothing_degree", cfg.smoothing_degree}};
    }

    PipelineConfig config_from_json(const nlohmann::json &j)
    {
        check_format(j, "psense-config");
        PipelineConfig cfg;
        try
        {
            if (j.contains("detector"))
            {
                const auto &d = j.at("detector");
                read_opt(d, "doppler_max_hz", cfg.detector.doppler_max);
                read_opt(d, "decimation", cfg.detector.decimation);
                read_opt(d, "gamma", cfg.detector.gamma);
                read_opt(d, "train_half_width", cfg.detector.train_half_width);
                read_opt(d, "guard_halfwidth", cfg.detector.guard_halfwidth);
                read_opt(d, "clutter_taps", cfg.detector.clutter_taps);
                read_opt(d, "delay_search_max", cfg.detector.delay_search_max);
            }
            if (j.contains("estimator"))
            {
                const auto &e = j.at("estimator");
                read_opt(e, "starts", cfg.estimator.starts);
                read_opt(e, "max_iters", cfg.estimator.max_iters);
                read_opt(e, "damping_init", cfg.estimator.damping_init);
                read_opt(e, "step_tol", cfg.estimator.step_tol);
                read_opt(e, "objective_tol", cfg.estimator.objective_tol);
                read_opt(e, "d_bounds", cfg.estimator.d_bounds);
                read_opt(e, "range_bounds", cfg.estimator.range_bounds);
                read_opt(e, "speed_bound", cfg.estimator.speed_bound);
                read_opt(e, "dwell_timing", cfg.estimator.dwell_timing);
                read_opt(e, "seed", cfg.estimator.seed);
                if (e.contains("weights"))
                {
                    const auto w = e.at("weights").get<std::array<double, 3>>();
                    cfg.estimator.weights = {w[0], w[1], w[2]};
                    cfg.weights_from_radio = false;
                }
            }
            if (j.contains("predictor"))
                read_opt(j.at("predictor"), "window", cfg.predictor.window);
            if (j.contains("radio"))
            {
                const auto &r = j.at("radio");
                read_opt(r, "carriers_hz", cfg.radio.carriers);
                read_opt(r, "dwell_s", cfg.radio.dwell);
                read_opt(r, "beams", cfg.radio.beams);
                read_opt(r, "beamwidth_deg", cfg.radio.beamwidth);
                read_opt(r, "aoa_half_plane", cfg.radio.aoa_half_plane);
            }
            read_opt(j, "smoothing_degree", cfg.smoothing_degree);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("config: ") + e.what());
        }
        cfg.detector.validate();
        cfg.resolved_estimator().validate();
        return cfg;
    }

    nlohmann::json feature_to_json(const FeatureVector &z)
    {
        json j = {{"k", z.sweep}, {"t_start_s", z.t_start}, {"peak1_mag", z.peak1}, {"peak2_mag", z.peak2}};
        j["aoa_deg"] = z.aoa ? json(*z.aoa) : json(nullptr);
        j["f1_hz"] = z.f1 ? json(*z.f1) : json(nullptr);
        j["f2_hz"] = z.f2 ? json(*z.f2) : json(nullptr);
        j["dwell_s"] = {z.aoa_dwell, z.f1_dwell, z.f2_dwell};
        return j;
    }

    FeatureVector feature_from_json(const nlohmann::json &j)
    {
        FeatureVector z;
        z.sweep = j.at("k").get<std::size_t>();
        z.t_start = j.at("t_start_s").get<double>();
        z.peak1 = j.value("peak1_mag", 0.0);
        z.peak2 = j.value("peak2_mag", 0.0);
        if (!j.at("aoa_deg").is_null())
            z.aoa = j.at("aoa_deg").get<double>();
        if (!j.at("f1_hz").is_null())
            z.f1 = j.at("f1_hz").get<double>();
        if (!j.at("f2_hz").is_null())
            z.f2 = j.at("f2_hz").get<double>();
        if (j.contains("dwell_s"))
        {
            const auto dw = j.at("dwell_s").get<std::array<double, 3>>();
            z.aoa_dwell = dw[0];
            z.f1_dwell = dw[1];
            z.f2_dwell = dw[2];
        }
        return z;
    }

} // namespace psense
