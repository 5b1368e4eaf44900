// firecast command-line front end.
#include "firecast/conformal.hpp"
#include "firecast/estimation.hpp"
#include "firecast/grid.hpp"
#include "firecast/io.hpp"
#include "firecast/marks.hpp"
#include "firecast/metrics.hpp"
#include "firecast/model.hpp"
#include "firecast/pipeline.hpp"
#include "firecast/preprocess.hpp"
#include "firecast/simulation.hpp"
#include "firecast/thresholding.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace firecast;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed{1};
    std::string config;
    std::string out_dir{"."};
};

std::string in_out_dir(const Globals& g, const std::string& explicit_path, const std::string& name) {
    return explicit_path.empty() ? (fs::path(g.out_dir) / name).string() : explicit_path;
}

std::vector<double> parse_marks(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string field = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        out.push_back(parse_double(field, 0));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

MarkModel load_mark_model(const std::string& variant, const std::string& scores_path, const EventSequence& seq) {
    if (variant == "linear") return MarkModel::linear();
    if (variant == "kde") {
        std::vector<std::vector<double>> samples;
        for (const auto& e : seq.events()) samples.push_back(e.marks);
        return MarkModel::nonlinear(std::make_shared<KernelDensityScorer>(std::move(samples)));
    }
    if (variant == "precomputed") {
        if (scores_path.empty()) throw std::invalid_argument("--marks precomputed needs --scores");
        return MarkModel::nonlinear(std::make_shared<PrecomputedScorer>(PrecomputedScorer::from_csv(scores_path)));
    }
    throw std::invalid_argument(fmt::format("unknown mark model '{}'", variant));
}

// Values from a --config JSON object fill options the command line left out.
// Keys are long option names, either at the top level or under the
// subcommand's name.
std::vector<std::string> config_arguments(const nlohmann::json& config, const std::string& subcommand,
                                          const std::vector<std::string>& argv) {
    nlohmann::json merged = nlohmann::json::object();
    for (const auto& item : config.items()) {
        if (!item.value().is_object()) merged[item.key()] = item.value();
    }
    if (config.contains(subcommand) && config.at(subcommand).is_object()) {
        for (const auto& item : config.at(subcommand).items()) merged[item.key()] = item.value();
    }
    std::vector<std::string> extra;
    for (const auto& item : merged.items()) {
        const std::string flag = "--" + item.key();
        const bool given = std::any_of(argv.begin(), argv.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (given) continue;
        const auto& v = item.value();
        if (v.is_boolean()) {
            if (v.get<bool>()) extra.push_back(flag);
        } else if (v.is_array()) {
            for (const auto& x : v) {
                extra.push_back(flag);
                extra.push_back(x.is_string() ? x.get<std::string>() : x.dump());
            }
        } else {
            extra.push_back(flag);
            extra.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
    }
    return extra;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal Hawkes risk prediction with dynamic thresholds and conformal sets"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
    app.add_option("--config", g.config, "JSON file (run: the config bundle; others: option defaults)");
    app.add_option("--out-dir", g.out_dir, "Directory for outputs")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Sample events from known parameters");
    std::string sim_params, sim_out;
    double sim_horizon = 1000.0;
    sim->add_option("--params", sim_params, "Params JSON (default: built-in 4-location chain)");
    sim->add_option("--horizon", sim_horizon, "Horizon T in days")->capture_default_str();
    sim->add_option("--out", sim_out, "Output events CSV");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit model parameters");
    std::string fit_events, fit_marks = "linear", fit_scores, fit_method = "grid", fit_out, fit_trace;
    std::optional<double> fit_horizon;
    std::optional<std::size_t> fit_locations, fit_band;
    FitConfig fc;
    bool no_backtracking = false;
    fit->add_option("--events", fit_events, "Events CSV")->required();
    fit->add_option("--horizon", fit_horizon, "Horizon T (default: ceil of last time)");
    fit->add_option("--locations", fit_locations, "Number of locations K");
    fit->add_option("--marks", fit_marks, "linear | kde | precomputed")->capture_default_str();
    fit->add_option("--scores", fit_scores, "CSV time,location,score for --marks precomputed");
    fit->add_option("--method", fit_method, "grid | alternating")->capture_default_str();
    fit->add_option("--beta-low", fc.beta_low)->capture_default_str();
    fit->add_option("--beta-high", fc.beta_high)->capture_default_str();
    fit->add_option("--grid-points", fc.grid_points, "J")->capture_default_str();
    fit->add_option("--pgd-steps", fc.pgd_steps, "k_max")->capture_default_str();
    fit->add_option("--kappa", fc.kappa, "Step-size scale")->capture_default_str();
    fit->add_option("--l1", fc.l1_weight, "l1 weight on gamma")->capture_default_str();
    fit->add_option("--beta-tolerance", fc.beta_tolerance)->capture_default_str();
    fit->add_option("--max-outer", fc.max_outer_iterations)->capture_default_str();
    fit->add_option("--mask-band", fit_band, "Allow alpha(i, j) only for |i - j| < band");
    fit->add_flag("--no-backtracking", no_backtracking);
    fit->add_option("--out", fit_out, "Output params JSON");
    fit->add_option("--trace", fit_trace, "Output trace CSV");

    // predict
    auto* pred = app.add_subcommand("predict", "Daily risk and threshold decisions");
    std::string pred_params, pred_events, pred_marks = "linear", pred_out;
    std::optional<double> pred_horizon;
    std::optional<std::size_t> pred_first, pred_last, val_first, val_last;
    ThresholdOptions topt;
    bool no_screening = false;
    pred->add_option("--params", pred_params, "Params JSON")->required();
    pred->add_option("--events", pred_events, "Events CSV")->required();
    pred->add_option("--horizon", pred_horizon, "Horizon T");
    pred->add_option("--marks", pred_marks, "linear | kde")->capture_default_str();
    pred->add_option("--first-day", pred_first, "First test day (default 0)");
    pred->add_option("--last-day", pred_last, "End of test days, exclusive (default floor(T))");
    pred->add_option("--validation-first", val_first, "First validation day for screening");
    pred->add_option("--validation-last", val_last, "End of validation days, exclusive");
    pred->add_option("--delta", topt.delta)->capture_default_str();
    pred->add_option("--a1", topt.a1)->capture_default_str();
    pred->add_option("--a2", topt.a2)->capture_default_str();
    pred->add_flag("--no-screening", no_screening);
    pred->add_option("--out", pred_out, "Output detection trace CSV");

    // conformal
    auto* conf = app.add_subcommand("conformal", "Magnitude prediction sets");
    std::string conf_input, conf_method = "eraps";
    std::optional<std::size_t> conf_train_rows;
    ConformalConfig cc;
    cc.alphas = {0.05, 0.1, 0.2};
    conf->add_option("--input", conf_input, "Labelled CSV: feature columns plus magnitude (1..C)")->required();
    conf->add_option("--train-rows", conf_train_rows, "Leading rows used for training (default half)");
    conf->add_option("--B", cc.bootstrap_models, "Bootstrap models")->capture_default_str();
    conf->add_option("--s", cc.batch_size, "Sliding batch size")->capture_default_str();
    conf->add_option("--alpha", cc.alphas, "Significance levels")->capture_default_str();
    conf->add_option("--lambda", cc.score.lambda_reg)->capture_default_str();
    conf->add_option("--kreg", cc.score.k_reg)->capture_default_str();
    conf->add_option("--split-fraction", cc.split_fraction, "SRAPS proper-training share")->capture_default_str();
    conf->add_option("--method", conf_method, "eraps | sraps | both")->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Precision, recall and F1 per location");
    std::string eval_trace, cf_params, cf_events, cf_a, cf_b;
    bool counterfactual = false;
    double cf_time = 0.0;
    std::size_t cf_location = 0;
    eval->add_option("--trace", eval_trace, "Detection trace CSV");
    eval->add_flag("--counterfactual", counterfactual, "Intensity difference between two mark vectors");
    eval->add_option("--params", cf_params, "Params JSON (counterfactual)");
    eval->add_option("--events", cf_events, "Events CSV (counterfactual)");
    eval->add_option("--time", cf_time, "Query time (counterfactual)");
    eval->add_option("--location", cf_location, "Query location (counterfactual)");
    eval->add_option("--marks-a", cf_a, "Baseline marks, comma separated");
    eval->add_option("--marks-b", cf_b, "Alternative marks, comma separated");

    // gridify
    auto* gridify = app.add_subcommand("gridify", "Map raw lat/lon events onto grid cells and preprocess marks");
    std::string grid_input, grid_out;
    double lat_min = 0, lon_min = 0, lat_max = 0, lon_max = 0, cell = 0.24;
    std::vector<std::size_t> excluded;
    std::vector<std::string> one_hot;
    int spline_degree = 5;
    gridify->add_option("--input", grid_input, "Raw CSV with time, lat, lon and mark columns")->required();
    gridify->add_option("--lat-min", lat_min)->required();
    gridify->add_option("--lon-min", lon_min)->required();
    gridify->add_option("--lat-max", lat_max)->required();
    gridify->add_option("--lon-max", lon_max)->required();
    gridify->add_option("--cell-size", cell, "Cell side in degrees")->capture_default_str();
    gridify->add_option("--exclude", excluded, "Raw cell indices to drop");
    gridify->add_option("--one-hot", one_hot, "Categorical columns");
    gridify->add_option("--spline-degree", spline_degree)->capture_default_str();
    gridify->add_option("--out", grid_out, "Output events CSV");

    // run
    auto* run = app.add_subcommand("run", "End-to-end run from a JSON bundle (--config)");

    // Splice --config defaults in before parsing.
    std::vector<std::string> args(argv + 1, argv + argc);
    {
        std::string sub, config_path;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
            for (const auto* s : app.get_subcommands({})) {
                if (sub.empty() && args[i] == s->get_name()) sub = args[i];
            }
        }
        if (!config_path.empty() && !sub.empty() && sub != "run") {
            try {
                const auto extra = config_arguments(read_json(config_path), sub, args);
                args.insert(args.end(), extra.begin(), extra.end());
            } catch (const std::exception& e) {
                std::cerr << "[config] " << e.what() << "\n";
                return 2;
            }
        }
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    std::string stage = "cli";
    try {
        if (*sim) {
            stage = "simulate";
            SimConfig sc;
            sc.params = sim_params.empty() ? demo_params() : load_params(sim_params);
            sc.horizon = sim_horizon;
            sc.seed = g.seed;
            const EventSequence seq = simulate(sc);
            const std::string out = in_out_dir(g, sim_out, "events.csv");
            write_events_csv(out, seq);
            std::cout << fmt::format("wrote {} events to {}\n", seq.size(), out);
        } else if (*fit) {
            stage = "fit";
            const EventSequence seq = read_events_csv(fit_events, fit_horizon, fit_locations);
            const MarkModel marks = load_mark_model(fit_marks, fit_scores, seq);
            fc.backtracking = !no_backtracking;
            if (fit_band) fc.constraints.mask = mask_from_index_band(seq.num_locations(), *fit_band);
            FitResult result;
            if (fit_method == "grid") {
                result = grid_fit(seq, marks, fc);
            } else if (fit_method == "alternating") {
                result = alternating_fit(seq, marks, fc);
            } else {
                throw std::invalid_argument(fmt::format("unknown fit method '{}'", fit_method));
            }
            save_params(in_out_dir(g, fit_out, "params.json"), result.params);
            write_text(in_out_dir(g, fit_trace, "fit_trace.csv"), fit_trace_csv(result));
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            for (const auto& f : result.failures) std::cerr << "grid point failed: " << f << "\n";
            std::cout << fmt::format("beta={} objective={} events={}\n", format_double(result.params.beta),
                                     format_double(result.objective), seq.size());
        } else if (*pred) {
            stage = "predict";
            const ModelParams params = load_params(pred_params);
            const EventSequence seq = read_events_csv(pred_events, pred_horizon, params.num_locations());
            if (pred_marks == "precomputed") {
                throw std::invalid_argument("daily risk needs marks for unseen days; use linear or kde");
            }
            const MarkModel marks = load_mark_model(pred_marks, "", seq);
            const std::size_t first = pred_first.value_or(0);
            const std::size_t last = pred_last.value_or(static_cast<std::size_t>(std::floor(seq.horizon())));
            const RiskSeries series = daily_risk(params, seq, marks, first, last);
            topt.screening = !no_screening && val_first && val_last;
            std::vector<std::vector<int>> validation;
            if (topt.screening) validation = daily_truth(seq, *val_first, *val_last);
            const DetectionTrace trace = predict_series(series, validation, topt);
            const std::string out = in_out_dir(g, pred_out, "detection_trace.csv");
            write_text(out, detection_trace_csv(trace));
            std::size_t positives = 0;
            for (const auto& l : trace.locations) positives += l.detections();
            std::cout << fmt::format("{} days x {} locations, {} positives -> {}\n", trace.times.size(),
                                     trace.locations.size(), positives, out);
        } else if (*conf) {
            stage = "conformal";
            const CsvTable table = read_csv(conf_input);
            const std::size_t ycol = table.column("magnitude");
            LabeledData all;
            std::vector<std::size_t> fcols;
            for (std::size_t c = 0; c < table.header.size(); ++c) {
                if (c != ycol) fcols.push_back(c);
            }
            all.features.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(fcols.size()));
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                for (std::size_t j = 0; j < fcols.size(); ++j) {
                    all.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                        parse_double(table.rows[r][fcols[j]], r + 2);
                }
                const long long y = parse_index(table.rows[r][ycol], r + 2);
                if (y < 1) throw ParseError(fmt::format("line {}: magnitude labels start at 1", r + 2));
                all.labels.push_back(static_cast<int>(y - 1));
                all.num_classes = std::max(all.num_classes, static_cast<std::size_t>(y));
            }
            const std::size_t n_train = conf_train_rows.value_or(all.size() / 2);
            if (n_train == 0 || n_train >= all.size()) throw std::invalid_argument("need rows for both training and test");
            auto take = [&](std::size_t from, std::size_t to) {
                LabeledData d;
                d.num_classes = all.num_classes;
                d.features = all.features.middleRows(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to - from));
                d.labels.assign(all.labels.begin() + static_cast<std::ptrdiff_t>(from),
                                all.labels.begin() + static_cast<std::ptrdiff_t>(to));
                return d;
            };
            const LabeledData train = take(0, n_train), test = take(n_train, all.size());
            cc.seed = g.seed;
            std::vector<ConformalRun> runs;
            if (conf_method != "eraps" && conf_method != "sraps" && conf_method != "both") {
                throw std::invalid_argument(fmt::format("unknown method '{}'", conf_method));
            }
            if (conf_method != "sraps") runs.push_back(eraps(train, test, cc, logistic_trainer()));
            if (conf_method != "eraps") runs.push_back(sraps(train, test, cc, logistic_trainer()));
            for (const auto& r : runs) {
                write_text(in_out_dir(g, "", fmt::format("conformal_sets_{}.jsonl", r.method)), conformal_sets_jsonl(r));
                for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
            }
            const std::string summary = conformal_summary_csv(runs);
            write_text(in_out_dir(g, "", "conformal_summary.csv"), summary);
            std::cout << summary;
        } else if (*eval) {
            stage = "eval";
            if (counterfactual) {
                if (cf_params.empty() || cf_events.empty()) {
                    throw std::invalid_argument("--counterfactual needs --params and --events");
                }
                const ModelParams params = load_params(cf_params);
                const EventSequence seq = read_events_csv(cf_events, std::nullopt, params.num_locations());
                const MarkModel marks = MarkModel::linear();
                const auto a = parse_marks(cf_a), b = parse_marks(cf_b);
                const double ia = conditional_intensity(params, seq, marks, cf_time, cf_location, a);
                const double ib = conditional_intensity(params, seq, marks, cf_time, cf_location, b);
                const nlohmann::json out = {{"time", cf_time}, {"location", cf_location}, {"intensity_a", ia},
                                            {"intensity_b", ib}, {"delta", ib - ia}};
                write_text(in_out_dir(g, "", "counterfactual.json"), out.dump(2) + "\n");
                std::cout << out.dump() << "\n";
            }
            if (!eval_trace.empty()) {
                const DetectionTrace trace = parse_detection_trace_csv(read_text(eval_trace), eval_trace);
                const MetricsReport report = f1_metrics(trace);
                write_text(in_out_dir(g, "", "metrics.csv"), metrics_csv(report));
                write_text(in_out_dir(g, "", "f1_histogram.csv"), histogram_csv(report));
                double mean_f1 = 0.0;
                for (const auto& s : report.locations) mean_f1 += s.f1;
                if (!report.locations.empty()) mean_f1 /= static_cast<double>(report.locations.size());
                std::cout << fmt::format("{} locations, mean F1 {}\n", report.locations.size(), format_double(mean_f1));
            } else if (!counterfactual) {
                throw std::invalid_argument("eval needs --trace or --counterfactual");
            }
        } else if (*gridify) {
            stage = "gridify";
            const GridSpec grid(lat_min, lon_min, lat_max, lon_max, cell, excluded);
            PreprocessConfig pc;
            pc.spline_degree = spline_degree;
            pc.one_hot_columns = one_hot;
            const IngestResult result = ingest(grid_input, grid, pc);
            write_text(in_out_dir(g, grid_out, "events.csv"), events_csv(result.events));
            std::string cells = "location,row,col,lat,lon\n";
            for (std::size_t id = 0; id < grid.num_cells(); ++id) {
                const auto [row, col] = grid.row_col(id);
                const Centroid c = grid.centroid(id);
                cells += fmt::format("{},{},{},{},{}\n", id, row, col, format_double(c.lat), format_double(c.lon));
            }
            write_text(in_out_dir(g, "", "cells.csv"), cells);
            write_text(in_out_dir(g, "", "scalers.json"), scalers_to_json(result.scalers).dump(2) + "\n");
            std::string names = "index,name\n";
            for (std::size_t i = 0; i < result.mark_names.size(); ++i) names += fmt::format("{},{}\n", i, result.mark_names[i]);
            write_text(in_out_dir(g, "", "mark_names.csv"), names);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << fmt::format("{} events on {} cells, {} marks imputed\n", result.events.size(),
                                     grid.num_cells(), result.imputed);
        } else if (*run) {
            stage = "run";
            if (g.config.empty()) throw std::invalid_argument("run needs --config <bundle.json>");
            RunConfig rc = RunConfig::from_json(read_json(g.config));
            if (app.get_option("--seed")->count() > 0) rc.seed = g.seed;
            const RunReport report = run_end_to_end(rc, g.out_dir);
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << fmt::format("{} artifacts in {}\n", report.artifacts.size(), g.out_dir);
        }
    } catch (const StageError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "[" << stage << "] " << e.what() << "\n";
        return 1;
    }
    return 0;
}
