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

#include "psense/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>

namespace psense
{
    using nlohmann::json;

    namespace
    {
        json point_json(const Point2 &p) { return json::array({p.x, p.y}); }
        Point2 point_from(const json &j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

        json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }
        std::optional<double> optional_from(const json &j, const char *key)
        {
            if (!j.contains(key) || j.at(key).is_null())
                return std::nullopt;
            return j.at(key).get<double>();
        }
    } // namespace

    nlohmann::json report_to_json(const RunReport &r)
    {
        json features = json::array();
        for (std::size_t k = 0; k < r.features.size(); ++k)
        {
            json f = feature_to_json(r.features[k]);
            f["aoa_smoothed_deg"] = k < r.smoothed.size() ? optional_json(r.smoothed[k].aoa) : json(nullptr);
            features.push_back(f);
        }
        json sweeps = json::array();
        for (const auto &s : r.sweeps)
            sweeps.push_back({{"k", s.k}, {"t_s", s.t}, {"x", s.p.x}, {"y", s.p.y}, {"vx", s.v.vx}, {"vy", s.v.vy}});

        json j = {{"format", "psense-report"},
                  {"version", 1},
                  {"adoa", {{"phi_rx", r.adoa.phi_rx}, {"phi_tx1", r.adoa.phi_tx1}, {"half_plane", r.adoa.half_plane}}},
                  {"carriers_hz", r.carriers},
                  {"sweep_period_s", r.sweep_period},
                  {"features", features},
                  {"estimate",
                   {{"d", r.d},
                    {"tx1", point_json({r.d, 0.0})},
                    {"tx2", point_json(r.tx2)},
                    {"objective", r.objective},
                    {"converged", r.converged},
                    {"start_objectives", r.start_objectives}}},
                  {"sweeps", sweeps}};

        if (r.prediction)
        {
            json links = json::array();
            for (std::size_t m = 0; m < 2; ++m)
            {
                const auto &l = r.prediction->links[m];
                links.push_back({{"link", m + 1},
                                 {"blocked", l.blocked ? 1 : 0},
                                 {"degenerate", l.degenerate},
                                 {"t_s", optional_json(l.t)},
                                 {"mu", optional_json(l.mu)}});
            }
            j["prediction"] = {{"window", r.window},
                               {"v_bar", json::array({r.prediction->v_bar.vx, r.prediction->v_bar.vy})},
                               {"links", links}};
        }
        if (r.metrics)
        {
            const auto &m = *r.metrics;
            j["metrics"] = {{"tx1_error_m", m.tx1_error},
                            {"tx2_error_m", m.tx2_error},
                            {"trajectory_mean_error_m", m.traj_mean_error},
                            {"trajectory_rms_error_m", m.traj_rms_error},
                            {"aoa_mean_error_deg", m.aoa_mean_error},
                            {"aoa_rms_error_deg", m.aoa_rms_error},
                            {"true_crossing_t_s", optional_json(m.true_crossing_t)},
                            {"blockage_time_error_s", optional_json(m.blockage_time_error)}};
        }
        return j;
    }

    RunReport report_from_json(const nlohmann::json &j)
    {
        if (!j.is_object() || j.value("format", "") != "psense-report" || j.value("version", 0) != 1)
            throw FormatError("expected a psense-report version 1 document");
        RunReport r;
        try
        {
            const auto &a = j.at("adoa");
            r.adoa = {a.at("phi_rx").get<double>(), a.at("phi_tx1").get<double>(), a.at("half_plane").get<int>()};
            r.carriers = j.at("carriers_hz").get<std::array<double, 2>>();
            r.sweep_period = j.at("sweep_period_s").get<double>();
            for (const auto &f : j.at("features"))
            {
                r.features.push_back(feature_from_json(f));
                FeatureVector s = r.features.back();
                s.aoa = optional_from(f, "aoa_smoothed_deg");
                r.smoothed.push_back(s);
            }
            const auto &e = j.at("estimate");
            r.d = e.at("d").get<double>();
            r.tx2 = point_from(e.at("tx2"));
            r.objective = e.at("objective").get<double>();
            r.converged = e.at("converged").get<bool>();
            r.start_objectives = e.at("start_objectives").get<std::vector<double>>();
            for (const auto &s : j.at("sweeps"))
                r.sweeps.push_back({s.at("k").get<std::size_t>(), s.at("t_s").get<double>(),
                                    {s.at("x").get<double>(), s.at("y").get<double>()},
                                    {s.at("vx").get<double>(), s.at("vy").get<double>()}});
            if (j.contains("prediction"))
            {
                const auto &p = j.at("prediction");
                r.window = p.at("window").get<std::size_t>();
                BlockagePrediction bp;
                bp.v_bar = {p.at("v_bar").at(0).get<double>(), p.at("v_bar").at(1).get<double>()};
                for (std::size_t m = 0; m < 2; ++m)
                {
                    const auto &l = p.at("links").at(m);
                    bp.links[m].blocked = l.at("blocked").get<int>() == 1;
                    bp.links[m].degenerate = l.at("degenerate").get<bool>();
                    bp.links[m].t = optional_from(l, "t_s");
                    bp.links[m].mu = optional_from(l, "mu");
                }
                r.prediction = bp;
            }
            if (j.contains("metrics"))
            {
                const auto &m = j.at("metrics");
                Metrics mt;
                mt.tx1_error = m.at("tx1_error_m").get<double>();
                mt.tx2_error = m.at("tx2_error_m").get<double>();
                mt.traj_mean_error = m.at("trajectory_mean_error_m").get<double>();
                mt.traj_rms_error = m.at("trajectory_rms_error_m").get<double>();
                mt.aoa_mean_error = m.at("aoa_mean_error_deg").get<double>();
                mt.aoa_rms_error = m.at("aoa_rms_error_deg").get<double>();
                mt.true_crossing_t = optional_from(m, "true_crossing_t_s");
                mt.blockage_time_error = optional_from(m, "blockage_time_error_s");
                r.metrics = mt;
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            throw FormatError(std::string("report: ") + e.what());
        }
        return r;
    }

    void simulate_to_dir(const Scenario &sc, std::span<const TruthState> truth, const std::filesystem::path &dir)
    {
        sc.validate();
        std::filesystem::create_directories(dir);
        for (std::size_t k = 1; k <= truth.size(); ++k)
            write_sweep_capture(dir, simulate_sweep(sc, truth, k), sc);
        write_text_atomic(dir / "truth.csv", truth_to_csv(truth, sc.sweep_period()));
    }

    DetectOutput detect_dir(const std::filesystem::path &dir, const DetectorConfig &cfg, bool keep_maps)
    {
        cfg.validate();
        if (!std::filesystem::is_directory(dir))
            throw std::runtime_error("capture directory " + dir.string() + " does not exist");

        std::map<std::size_t, std::filesystem::path> files;
        const std::regex pattern(R"(sweep_(\d+)\.psiq)");
        for (const auto &entry : std::filesystem::directory_iterator(dir))
        {
            std::smatch m;
            const std::string name = entry.path().filename().string();
            if (std::regex_match(name, m, pattern))
                files[std::stoul(m[1].str())] = entry.path();
        }

        DetectOutput out;
        if (files.empty())
            return out;

        // Sweep timing and the beam grid come from the first readable container
        double sample_period = 0.0;
        std::vector<double> beam_grid;
        std::size_t n0 = 0;
        for (const auto &[k, path] : files)
        {
            try
            {
                const auto recs = read_sweep_capture(path);
                std::map<std::size_t, double> beams;
                for (const auto &r : recs)
                    beams[r.dwell.beam] = r.dwell.beam_angle;
                if (beams.empty() || beams.rbegin()->first != beams.size())
                    continue;
                sample_period = recs.front().sample_period;
                n0 = recs.front().dwell.reference.size();
                for (const auto &[q, angle] : beams)
                    beam_grid.push_back(angle);
                break;
            }
            catch (const FormatError &)
            {
            }
        }
        if (beam_grid.empty())
            throw FormatError("detect: no readable capture container in " + dir.string());
        const double sweep_period = static_cast<double>(beam_grid.size()) * static_cast<double>(n0) * sample_period;

        const std::size_t last = files.rbegin()->first;
        for (std::size_t k = 1; k <= last; ++k)
        {
            FeatureVector invalid;
            invalid.sweep = k;
            invalid.t_start = static_cast<double>(k - 1) * sweep_period;
            const auto it = files.find(k);
            if (it == files.end())
            {
                out.features.push_back(invalid);
                if (keep_maps)
                    out.maps.emplace_back();
                continue;
            }
            try
            {
                const auto recs = read_sweep_capture(it->second);
                const SweepCapture capture = assemble_sweep(recs, beam_grid.size());
                auto sf = extract_features(capture, beam_grid, sample_period, sweep_period, cfg);
                out.features.push_back(sf.features);
                if (keep_maps)
                    out.maps.push_back(std::move(sf.maps));
            }
            catch (const FormatError &)
            {
                out.features.push_back(invalid);
                if (keep_maps)
                    out.maps.emplace_back();
            }
        }
        return out;
    }

    DetectOutput simulate_and_detect(const Scenario &sc, std::span<const TruthState> truth, const DetectorConfig &cfg,
                                     bool keep_maps)
    {
        sc.validate();
        DetectOutput out;
        for (std::size_t k = 1; k <= truth.size(); ++k)
        {
            const SweepCapture capture = simulate_sweep(sc, truth, k);
            auto sf = extract_features(capture, sc.beam_grid, sc.sample_period, sc.sweep_period(), cfg);
            out.features.push_back(sf.features);
            if (keep_maps)
                out.maps.push_back(std::move(sf.maps));
        }
        return out;
    }

    void predict_report(RunReport &report, std::size_t window)
    {
        if (report.sweeps.empty())
            throw StageError("predict", "report has no estimated sweeps");
        std::vector<Velocity2> velocities;
        for (const auto &s : report.sweeps)
            velocities.push_back(s.v);
        report.window = window;
        try
        {
            report.prediction = predict_blockage(report.sweeps.back().p, velocities,
                                                 {Point2{report.d, 0.0}, report.tx2}, PredictorConfig{window});
        }
        catch (const std::exception &e)
        {
            throw StageError("predict", e.what());
        }
    }

    RunReport estimate_report(std::span<const FeatureVector> features, const AdoaPair &adoa, const PipelineConfig &cfg)
    {
        RunReport r;
        r.adoa = adoa;
        r.carriers = cfg.radio.carriers;
        r.sweep_period = cfg.radio.sweep_period();
        r.features.assign(features.begin(), features.end());
        r.smoothed = smooth_aoa(features, cfg.smoothing_degree).features;

        ObservationModel model{r.smoothed, adoa, cfg.radio.wavelengths(), r.sweep_period, {}};
        const EstimatorConfig ecfg = cfg.resolved_estimator();
        model.weights = ecfg.weights;
        model.dwell_timing = ecfg.dwell_timing;

        Estimate est;
        try
        {
            est = estimate(model, ecfg);
        }
        catch (const std::exception &e)
        {
            throw StageError("estimate", e.what());
        }
        r.d = est.params.d;
        r.tx2 = est.tx2;
        r.objective = est.objective;
        r.converged = est.converged;
        r.start_objectives = est.start_objectives;
        for (std::size_t k = 1; k <= est.params.sweeps(); ++k)
            r.sweeps.push_back({k, static_cast<double>(k - 1) * r.sweep_period,
                                blocker_position(est.params, k, r.sweep_period), est.params.velocities[k - 1]});

        predict_report(r, std::min(cfg.predictor.window, r.sweeps.size()));
        return r;
    }

    Metrics compute_metrics(const RunReport &report, const Point2 &tx1_true, const Point2 &tx2_true,
                            std::span<const TruthState> truth)
    {
        if (truth.size() != report.sweeps.size())
            throw StageError("eval", "truth has " + std::to_string(truth.size()) + " sweeps, report has " +
                                         std::to_string(report.sweeps.size()));
        Metrics m;
        m.tx1_error = (Point2{report.d, 0.0} - tx1_true).norm();
        m.tx2_error = (report.tx2 - tx2_true).norm();

        double sum = 0.0, sum2 = 0.0;
        for (std::size_t k = 0; k < truth.size(); ++k)
        {
            const double e = (report.sweeps[k].p - truth[k].p).norm();
            sum += e;
            sum2 += e * e;
        }
        m.traj_mean_error = sum / static_cast<double>(truth.size());
        m.traj_rms_error = std::sqrt(sum2 / static_cast<double>(truth.size()));

        double asum = 0.0, asum2 = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < std::min(truth.size(), report.features.size()); ++k)
        {
            if (!report.features[k].aoa)
                continue;
            const double e = std::abs(*report.features[k].aoa - aoa(truth[k].p));
            asum += e;
            asum2 += e * e;
            ++count;
        }
        if (count > 0)
        {
            m.aoa_mean_error = asum / static_cast<double>(count);
            m.aoa_rms_error = std::sqrt(asum2 / static_cast<double>(count));
        }

        const TruthState &last = truth.back();
        const LinkPrediction truth_link = blockage_indicator(last.p, last.v, tx1_true);
        if (truth_link.blocked)
        {
            m.true_crossing_t = truth_link.t;
            if (report.prediction && report.prediction->links[0].blocked)
                m.blockage_time_error = std::abs(*report.prediction->links[0].t - *truth_link.t);
        }
        return m;
    }

    RunReport run_pipeline(const Scenario &sc, std::span<const TruthState> truth, const PipelineConfig &cfg)
    {
        DetectOutput det;
        try
        {
            det = simulate_and_detect(sc, truth, cfg.detector);
        }
        catch (const std::exception &e)
        {
            throw StageError("detect", e.what());
        }
        PipelineConfig local = cfg;
        local.radio = RadioConfig::from_scenario(sc);
        RunReport r = estimate_report(det.features, sc.adoa, local);
        r.metrics = compute_metrics(r, sc.tx1(), sc.tx2(), truth);
        return r;
    }

    namespace
    {
        std::string num(double v)
        {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            return buf;
        }
    } // namespace

    void write_plots(const std::filesystem::path &dir, const RunReport &report, const DetectOutput &detected,
                     std::span<const TruthState> truth, std::optional<Point2> tx2_true)
    {
        std::filesystem::create_directories(dir);

        std::string maps = "band,k,beam,doppler_hz,magnitude\n";
        for (const auto &pair : detected.maps)
            for (const auto &map : pair)
                for (std::size_t q = 0; q < map.rows.size(); ++q)
                    for (std::size_t i = 0; i < map.bin_hz.size(); ++i)
                        maps += std::to_string(map.band) + "," + std::to_string(map.sweep) + "," +
                                std::to_string(q + 1) + "," + num(map.bin_hz[i]) + "," + num(map.rows[q][i]) + "\n";
        write_text_atomic(dir / "doppler_angle_maps.csv", maps);

        std::string timeline = "k,t_s,aoa_deg,aoa_smoothed_deg,f1_hz,f2_hz\n";
        for (std::size_t k = 0; k < report.features.size(); ++k)
        {
            const auto &z = report.features[k];
            auto cell = [](const std::optional<double> &v) { return v ? num(*v) : std::string(); };
            timeline += std::to_string(z.sweep) + "," + num(z.t_start) + "," + cell(z.aoa) + "," +
                        cell(k < report.smoothed.size() ? report.smoothed[k].aoa : std::nullopt) + "," + cell(z.f1) +
                        "," + cell(z.f2) + "\n";
        }
        write_text_atomic(dir / "features_timeline.csv", timeline);

        std::string traj = "k,t_s,x_hat,y_hat,x_true,y_true\n";
        for (std::size_t k = 0; k < report.sweeps.size(); ++k)
        {
            const auto &s = report.sweeps[k];
            traj += std::to_string(s.k) + "," + num(s.t) + "," + num(s.p.x) + "," + num(s.p.y) + ",";
            traj += k < truth.size() ? num(truth[k].p.x) + "," + num(truth[k].p.y) : std::string(",");
            traj += "\n";
        }
        write_text_atomic(dir / "trajectory.csv", traj);

        // Trajectory overlay: world [-1, 4] x [-2, 3] m mapped to 500 x 500 px
        auto px = [](const Point2 &p) { return std::make_pair(100.0 * (p.x + 1.0), 100.0 * (3.0 - p.y)); };
        auto polyline = [&](auto get, std::size_t n, const char *color) {
            std::string s = "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
            for (std::size_t k = 0; k < n; ++k)
            {
                const auto [x, y] = px(get(k));
                s += num(x) + "," + num(y) + " ";
            }
            return s + "\"/>\n";
        };
        auto marker = [&](const Point2 &p, const char *color, const char *label) {
            const auto [x, y] = px(p);
            return "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"5\" fill=\"" + color + "\"/><text x=\"" +
                   num(x + 7) + "\" y=\"" + num(y - 7) + "\" font-size=\"12\">" + label + "</text>\n";
        };
        std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"500\">\n"
                          "<rect width=\"500\" height=\"500\" fill=\"white\"/>\n";
        svg += marker({0.0, 0.0}, "black", "RX");
        svg += marker({report.d, 0.0}, "green", "TX1 est");
        svg += marker(report.tx2, "green", "TX2 est");
        if (tx2_true)
            svg += marker(*tx2_true, "red", "TX2");
        if (!truth.empty())
            svg += polyline([&](std::size_t k) { return truth[k].p; }, truth.size(), "red");
        svg += polyline([&](std::size_t k) { return report.sweeps[k].p; }, report.sweeps.size(), "green");
        svg += "</svg>\n";
        write_text_atomic(dir / "trajectory.svg", svg);
    }

} // namespace psense
