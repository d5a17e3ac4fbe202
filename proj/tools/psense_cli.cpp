// SPDX-License-Identifier: Apache-2.0
//
// psense command-line front end: simulate, detect, estimate, predict, run, eval.

#include "psense/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

using namespace psense;
namespace fs = std::filesystem;

namespace
{
    enum Exit : int
    {
        ok = 0,
        failure = 1,
        bad_input = 2,
    };

    // Error tagged with the subcommand stage and an exit code
    struct CliError : std::runtime_error
    {
        CliError(const std::string &stage, const std::string &what, int code)
            : std::runtime_error(stage + ": " + what), code(code)
        {
        }
        int code;
    };

    nlohmann::json read_json(const fs::path &path, const std::string &stage)
    {
        try
        {
            return nlohmann::json::parse(read_text(path));
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw CliError(stage, path.string() + ": " + e.what(), bad_input);
        }
    }

    PipelineConfig load_config(const std::string &path, const std::string &stage)
    {
        if (path.empty())
            return PipelineConfig{};
        return config_from_json(read_json(path, stage));
    }

    std::vector<double> parse_list(const std::string &text, std::size_t count, const std::string &what)
    {
        std::vector<double> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            std::size_t used = 0;
            try
            {
                out.push_back(std::stod(item, &used));
            }
            catch (const std::exception &)
            {
                used = 0;
            }
            if (used == 0 || used != item.size())
                throw CliError("args", what + ": '" + item + "' is not a number", bad_input);
        }
        if (out.size() != count)
            throw CliError("args", what + " expects " + std::to_string(count) + " comma-separated values", bad_input);
        return out;
    }

    AdoaPair parse_adoa(const std::string &text)
    {
        const auto v = parse_list(text, 3, "--adoa");
        AdoaPair a{v[0], v[1], v[2] < 0.0 ? -1 : 1};
        a.validate();
        return a;
    }

    // Truth from a CSV file or from a straight-line spec "x,y,vx,vy,K"
    std::vector<TruthState> load_truth(const std::string &csv, const std::string &straight, const Scenario &sc)
    {
        if (!csv.empty() && !straight.empty())
            throw CliError("args", "give either --truth or --straight, not both", bad_input);
        if (!csv.empty())
            return truth_from_csv(read_text(csv));
        if (straight.empty())
            throw CliError("args", "one of --truth or --straight is required", bad_input);
        const auto v = parse_list(straight, 5, "--straight");
        if (v[4] < 0.0 || v[4] != std::floor(v[4]))
            throw CliError("args", "--straight sweep count must be a non-negative integer", bad_input);
        return straight_track({v[0], v[1]}, {v[2], v[3]}, static_cast<std::size_t>(v[4]), sc.sweep_period());
    }

    void write_report(const fs::path &path, const RunReport &r)
    {
        if (path.has_parent_path())
            fs::create_directories(path.parent_path());
        write_text_atomic(path, report_to_json(r).dump(2) + "\n");
    }

    void print_prediction(const RunReport &r)
    {
        if (!r.prediction)
        {
            std::printf("no blockage prediction\n");
            return;
        }
        const auto &p = *r.prediction;
        std::printf("v_bar = (%.3f, %.3f) m/s over %zu sweeps\n", p.v_bar.vx, p.v_bar.vy, r.window);
        for (std::size_t m = 0; m < 2; ++m)
        {
            const auto &l = p.links[m];
            if (l.blocked)
                std::printf("link %zu: blocked in %.3f s at mu = %.3f\n", m + 1, *l.t, *l.mu);
            else
                std::printf("link %zu: clear%s\n", m + 1, l.degenerate ? " (track parallel to link)" : "");
        }
    }

    void print_metrics(const Metrics &m)
    {
        std::printf("tx1 error        %.4f m\n", m.tx1_error);
        std::printf("tx2 error        %.4f m\n", m.tx2_error);
        std::printf("trajectory mean  %.4f m\n", m.traj_mean_error);
        std::printf("trajectory rms   %.4f m\n", m.traj_rms_error);
        std::printf("aoa mean / rms   %.2f / %.2f deg\n", m.aoa_mean_error, m.aoa_rms_error);
        if (m.true_crossing_t)
            std::printf("true crossing    %.3f s after the last sweep\n", *m.true_crossing_t);
        if (m.blockage_time_error)
            std::printf("blockage error   %.3f s\n", *m.blockage_time_error);
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Passive mmWave blocker tracking and blockage prediction"};
    app.require_subcommand(1);

    std::string scenario_path, truth_path, straight, out, in, config_path, features_path, adoa_text, report_path,
        plot_dir;
    std::size_t window = 3;

    auto *sim = app.add_subcommand("simulate", "Write per-sweep capture containers and truth.csv");
    sim->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--truth", truth_path, "Truth CSV (k,t,x,y,vx,vy)")->check(CLI::ExistingFile);
    sim->add_option("--straight", straight, "Straight track x,y,vx,vy,K instead of --truth");
    sim->add_option("--out", out, "Output directory")->required();

    auto *det = app.add_subcommand("detect", "Extract per-sweep features from a capture directory");
    det->add_option("--in", in, "Capture directory")->required()->check(CLI::ExistingDirectory);
    det->add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
    det->add_option("--out", out, "Features CSV")->required();
    det->add_option("--plot", plot_dir, "Directory for Doppler-angle map CSV");

    auto *est = app.add_subcommand("estimate", "Fit TX positions and the blocker trajectory to features");
    est->add_option("--features", features_path, "Features CSV")->required()->check(CLI::ExistingFile);
    est->add_option("--adoa", adoa_text, "phi_rx,phi_tx1,half_plane (degrees, sign of TX2 y)")->required();
    est->add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
    est->add_option("--out", out, "Report JSON")->required();

    auto *pred = app.add_subcommand("predict", "Recompute blockage prediction for a report");
    pred->add_option("--report", report_path, "Report JSON")->required()->check(CLI::ExistingFile);
    pred->add_option("--window", window, "Sweeps averaged for the velocity")->check(CLI::PositiveNumber);
    pred->add_option("--out", out, "Write the updated report here (default: in place)");

    auto *run = app.add_subcommand("run", "Simulate, detect, estimate, predict and evaluate in one go");
    run->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--truth", truth_path, "Truth CSV")->check(CLI::ExistingFile);
    run->add_option("--straight", straight, "Straight track x,y,vx,vy,K instead of --truth");
    run->add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory (report.json, features.csv, truth.csv)")->required();
    run->add_option("--plot", plot_dir, "Directory for CSV/SVG plots");

    auto *ev = app.add_subcommand("eval", "Score a report against ground truth");
    ev->add_option("--report", report_path, "Report JSON")->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", truth_path, "Truth CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--scenario", scenario_path, "Scenario JSON with the true TX positions")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("--out", out, "Write the report with metrics here");

    CLI11_PARSE(app, argc, argv);

    std::string stage = "args";
    try
    {
        if (*sim)
        {
            stage = "simulate";
            const Scenario sc = scenario_from_json(read_json(scenario_path, stage));
            const auto truth = load_truth(truth_path, straight, sc);
            simulate_to_dir(sc, truth, out);
            std::printf("wrote %zu sweeps (%zu dwell records) to %s\n", truth.size(), truth.size() * 2 * sc.beams(),
                        out.c_str());
        }
        else if (*det)
        {
            stage = "detect";
            const PipelineConfig cfg = load_config(config_path, stage);
            const DetectOutput d = detect_dir(in, cfg.detector, !plot_dir.empty());
            write_text_atomic(out, features_to_csv(d.features));
            if (!plot_dir.empty())
            {
                RunReport features_only;
                features_only.features = d.features;
                write_plots(plot_dir, features_only, d, {}, std::nullopt);
            }
            std::printf("%zu sweeps, %zu with a detection\n", d.features.size(), valid_sweeps(d.features));
        }
        else if (*est)
        {
            stage = "estimate";
            const PipelineConfig cfg = load_config(config_path, stage);
            const AdoaPair adoa = parse_adoa(adoa_text);
            const auto features = features_from_csv(read_text(features_path));
            const RunReport r = estimate_report(features, adoa, cfg);
            write_report(out, r);
            std::printf("d = %.4f m, tx2 = (%.4f, %.4f), objective %.4g\n", r.d, r.tx2.x, r.tx2.y, r.objective);
            print_prediction(r);
        }
        else if (*pred)
        {
            stage = "predict";
            RunReport r = report_from_json(read_json(report_path, stage));
            predict_report(r, window);
            write_report(out.empty() ? report_path : out, r);
            print_prediction(r);
        }
        else if (*run)
        {
            stage = "run";
            const Scenario sc = scenario_from_json(read_json(scenario_path, stage));
            PipelineConfig cfg = load_config(config_path, stage);
            cfg.radio = RadioConfig::from_scenario(sc);
            const auto truth = load_truth(truth_path, straight, sc);

            stage = "detect";
            const DetectOutput d = simulate_and_detect(sc, truth, cfg.detector, !plot_dir.empty());
            RunReport r = estimate_report(d.features, sc.adoa, cfg);
            r.metrics = compute_metrics(r, sc.tx1(), sc.tx2(), truth);

            stage = "run";
            fs::create_directories(out);
            write_report(fs::path(out) / "report.json", r);
            write_text_atomic(fs::path(out) / "features.csv", features_to_csv(r.features));
            write_text_atomic(fs::path(out) / "truth.csv", truth_to_csv(truth, sc.sweep_period()));
            if (!plot_dir.empty())
                write_plots(plot_dir, r, d, truth, sc.tx2());
            std::printf("d = %.4f m, tx2 = (%.4f, %.4f)\n", r.d, r.tx2.x, r.tx2.y);
            print_prediction(r);
            print_metrics(*r.metrics);
        }
        else if (*ev)
        {
            stage = "eval";
            RunReport r = report_from_json(read_json(report_path, stage));
            const Scenario sc = scenario_from_json(read_json(scenario_path, stage));
            const auto truth = truth_from_csv(read_text(truth_path));
            r.metrics = compute_metrics(r, sc.tx1(), sc.tx2(), truth);
            if (!out.empty())
                write_report(out, r);
            print_metrics(*r.metrics);
        }
    }
    catch (const CliError &e)
    {
        std::cerr << "psense " << e.what() << "\n";
        return e.code;
    }
    catch (const StageError &e)
    {
        std::cerr << "psense " << e.what() << "\n";
        return failure;
    }
    catch (const FormatError &e)
    {
        std::cerr << "psense " << stage << ": " << e.what() << "\n";
        return bad_input;
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << "psense " << stage << ": " << e.what() << "\n";
        return bad_input;
    }
    catch (const std::exception &e)
    {
        std::cerr << "psense " << stage << ": " << e.what() << "\n";
        return failure;
    }
    return ok;
}
