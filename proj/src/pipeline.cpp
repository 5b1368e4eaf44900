#include "firecast/pipeline.hpp"

#include "firecast/io.hpp"
#include "firecast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace firecast {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";
constexpr std::uint64_t kSimulationStream = 0x51;
constexpr std::uint64_t kConformalStream = 0xc0;

template <typename F>
auto in_stage(const std::string& name, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(fmt::format("{} must be a JSON object", where));
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw std::invalid_argument(fmt::format("unknown key '{}' in {}", item.key(), where));
        }
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace

RiskSeries daily_risk(const ModelParams& params, const EventSequence& seq, const MarkModel& marks,
                      std::size_t first_day, std::size_t last_day) {
    params.check_shapes();
    if (params.num_locations() != seq.num_locations()) {
        throw std::domain_error("params and events disagree on the number of locations");
    }
    if (last_day < first_day) throw std::domain_error("last day precedes first day");
    if (last_day > first_day && static_cast<double>(last_day - 1) > seq.horizon()) {
        throw std::domain_error(fmt::format("day {} lies past the horizon {}", last_day - 1, seq.horizon()));
    }
    const std::size_t k = seq.num_locations();
    const std::size_t p = seq.mark_dim();
    const auto ki = static_cast<Eigen::Index>(k);

    RiskSeries out;
    out.truth = daily_truth(seq, first_day, last_day);
    out.risk.assign(k, std::vector<double>(last_day - first_day));
    for (std::size_t d = first_day; d < last_day; ++d) out.days.push_back(static_cast<double>(d));

    Eigen::VectorXd decayed = Eigen::VectorXd::Zero(ki);
    double clock = 0.0;
    std::vector<std::optional<std::vector<double>>> latest(k);
    std::vector<double> mark_sum(p, 0.0);
    std::size_t seen = 0;
    std::size_t next = 0;
    const Eigen::MatrixXd alpha_t = params.alpha.transpose();
    std::vector<double> query(p);
    for (std::size_t d = first_day; d < last_day; ++d) {
        const double t = static_cast<double>(d);
        while (next < seq.size() && seq[next].time < t) {
            const auto& e = seq[next++];
            decayed *= std::exp(-params.beta * (e.time - clock));
            clock = e.time;
            decayed[static_cast<Eigen::Index>(e.location)] += 1.0;
            latest[e.location] = e.marks;
            for (std::size_t c = 0; c < p; ++c) mark_sum[c] += e.marks[c];
            ++seen;
        }
        const Eigen::VectorXd now = decayed * std::exp(-params.beta * (t - clock));
        const Eigen::VectorXd ground = params.mu + params.beta * (alpha_t * now);
        for (std::size_t loc = 0; loc < k; ++loc) {
            if (latest[loc]) {
                query = *latest[loc];
            } else {
                for (std::size_t c = 0; c < p; ++c) {
                    query[c] = seen > 0 ? mark_sum[c] / static_cast<double>(seen) : 0.5;
                }
            }
            const double score = marks.score(params, query, t, loc);
            out.risk[loc][d - first_day] = std::max(ground[static_cast<Eigen::Index>(loc)] * score, kRateFloor);
        }
    }
    return out;
}

std::vector<std::vector<int>> daily_truth(const EventSequence& seq, std::size_t first_day, std::size_t last_day) {
    std::vector<std::vector<int>> truth(seq.num_locations(), std::vector<int>(last_day - first_day, -1));
    for (const auto& e : seq.events()) {
        const double day = std::floor(e.time);
        if (day >= static_cast<double>(first_day) && day < static_cast<double>(last_day)) {
            truth[e.location][static_cast<std::size_t>(day) - first_day] = 1;
        }
    }
    return truth;
}

double counterfactual_delta(const ModelParams& params, const EventSequence& seq, const MarkModel& marks,
                            double t, std::size_t k, std::span<const double> marks_a,
                            std::span<const double> marks_b) {
    return conditional_intensity(params, seq, marks, t, k, marks_b) -
           conditional_intensity(params, seq, marks, t, k, marks_a);
}

DetectionTrace predict_series(const RiskSeries& test, const std::vector<std::vector<int>>& validation_truth,
                              const ThresholdOptions& options) {
    const std::size_t k = test.risk.size();
    std::vector<ThresholdParams> params(k);
    std::vector<std::optional<ScreeningStats>> screening(k);
    if (options.screening && validation_truth.size() != k) {
        throw std::domain_error("validation truths do not cover every location");
    }
    for (std::size_t loc = 0; loc < k; ++loc) {
        if (test.days.empty()) break;
        params[loc] = ThresholdParams::from_first_risk(test.risk[loc].front(), test.days.size());
        params[loc].delta = options.delta;
        params[loc].a1 = options.a1;
        params[loc].a2 = options.a2;
        if (options.screening) screening[loc] = ScreeningStats::from_validation(validation_truth[loc]);
    }
    return detect(test.days, test.risk, test.truth, params, screening);
}

std::string fit_trace_csv(const FitResult& fit) {
    std::string out = "iter,objective\n";
    for (std::size_t i = 0; i < fit.objective_trace.size(); ++i) {
        out += fmt::format("{},{}\n", i, format_double(fit.objective_trace[i]));
    }
    return out;
}

std::string detection_trace_csv(const DetectionTrace& trace) {
    std::string out = "time,location,risk,threshold,prediction,truth\n";
    for (std::size_t t = 0; t < trace.times.size(); ++t) {
        for (std::size_t loc = 0; loc < trace.locations.size(); ++loc) {
            const auto& l = trace.locations[loc];
            out += fmt::format("{},{},{},{},{},{}\n", format_double(trace.times[t]), loc, format_double(l.risk[t]),
                               format_double(l.threshold[t]), l.prediction[t], l.truth[t]);
        }
    }
    return out;
}

DetectionTrace parse_detection_trace_csv(const std::string& text, const std::string& source) {
    const CsvTable table = parse_csv(text, source);
    const std::size_t tc = table.column("time"), lc = table.column("location"), rc = table.column("risk"),
                      hc = table.column("threshold"), pc = table.column("prediction"), yc = table.column("truth");
    DetectionTrace trace;
    std::vector<double> times;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        const double t = parse_double(row[tc], line);
        const auto loc = static_cast<std::size_t>(parse_index(row[lc], line));
        if (times.empty() || times.back() != t) {
            if (!times.empty() && t < times.back()) throw ParseError(fmt::format("{}:{}: times go backwards", source, line));
            times.push_back(t);
        }
        if (loc >= trace.locations.size()) trace.locations.resize(loc + 1);
        auto& l = trace.locations[loc];
        if (l.risk.size() + 1 != times.size()) {
            throw ParseError(fmt::format("{}:{}: location {} is missing a step before time {}", source, line, loc, t));
        }
        l.risk.push_back(parse_double(row[rc], line));
        l.threshold.push_back(parse_double(row[hc], line));
        const double pred = parse_double(row[pc], line);
        const double truth = parse_double(row[yc], line);
        if ((pred != 1 && pred != -1) || (truth != 1 && truth != -1)) {
            throw ParseError(fmt::format("{}:{}: prediction and truth must be 1 or -1", source, line));
        }
        l.prediction.push_back(static_cast<int>(pred));
        l.truth.push_back(static_cast<int>(truth));
    }
    for (std::size_t loc = 0; loc < trace.locations.size(); ++loc) {
        if (trace.locations[loc].risk.size() != times.size()) {
            throw ParseError(fmt::format("{}: location {} has {} of {} steps", source, loc,
                                         trace.locations[loc].risk.size(), times.size()));
        }
    }
    trace.times = std::move(times);
    return trace;
}

std::string metrics_csv(const MetricsReport& report) {
    std::string out = "location,precision,recall,f1,true_positives,predicted,actual\n";
    for (std::size_t loc = 0; loc < report.locations.size(); ++loc) {
        const auto& s = report.locations[loc];
        out += fmt::format("{},{},{},{},{},{},{}\n", loc, format_double(s.precision), format_double(s.recall),
                           format_double(s.f1), s.true_positives, s.predicted, s.actual);
    }
    return out;
}

std::string histogram_csv(const MetricsReport& report) {
    std::string out = "bin_low,bin_high,count\n";
    const auto bins = static_cast<double>(report.f1_histogram.size());
    for (std::size_t b = 0; b < report.f1_histogram.size(); ++b) {
        out += fmt::format("{},{},{}\n", format_double(static_cast<double>(b) / bins),
                           format_double(static_cast<double>(b + 1) / bins), report.f1_histogram[b]);
    }
    return out;
}

std::string conformal_sets_jsonl(const ConformalRun& run) {
    std::string out;
    const std::size_t m = run.truths.size();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t a = 0; a < run.alphas.size(); ++a) {
            json labels = json::array();
            for (std::size_t c : run.sets[a][i].labels) labels.push_back(c + 1);
            out += json{{"index", i}, {"alpha", run.alphas[a]}, {"set", labels}}.dump();
            out += '\n';
        }
    }
    return out;
}

std::string conformal_summary_csv(const std::vector<ConformalRun>& runs) {
    std::string out = "alpha,coverage,mean_size,method\n";
    for (const auto& run : runs) {
        for (const auto& row : coverage_report(run)) {
            out += fmt::format("{},{},{},{}\n", format_double(row.alpha), format_double(row.coverage),
                               format_double(row.mean_size), run.method);
        }
    }
    return out;
}

GridSpec grid_from_json(const json& j) {
    require_keys(j, {"lat_min", "lon_min", "lat_max", "lon_max", "cell_size", "excluded"}, "grid");
    return GridSpec(j.at("lat_min").get<double>(), j.at("lon_min").get<double>(), j.at("lat_max").get<double>(),
                    j.at("lon_max").get<double>(), j.value("cell_size", 0.24),
                    j.value("excluded", std::vector<std::size_t>{}));
}

PreprocessConfig preprocess_from_json(const json& j) {
    PreprocessConfig c;
    if (j.is_null()) return c;
    require_keys(j, {"spline_degree", "one_hot", "horizon", "num_locations"}, "preprocess");
    read_opt(j, "spline_degree", c.spline_degree);
    read_opt(j, "one_hot", c.one_hot_columns);
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<double>();
    if (j.contains("num_locations")) c.num_locations = j.at("num_locations").get<std::size_t>();
    return c;
}

ModelParams demo_params() {
    ModelParams p = ModelParams::zeros(4, 2);
    p.mu << 0.2, 0.15, 0.25, 0.18;
    p.mask = mask_from_index_band(4, 2);
    p.alpha << 0.35, 0.1, 0.0, 0.0,
               0.08, 0.3, 0.12, 0.0,
               0.0, 0.1, 0.35, 0.08,
               0.0, 0.0, 0.12, 0.3;
    p.beta = 0.8;
    p.gamma << 0.6, 0.5;
    return p;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        require_keys(j, {"seed", "source", "params", "horizon", "events", "grid", "preprocess", "split", "fit",
                         "threshold", "conformal"},
                     "run config");
        read_opt(j, "seed", c.seed);
        read_opt(j, "source", c.source);
        if (c.source != "simulate" && c.source != "ingest") {
            throw std::invalid_argument(fmt::format("source must be 'simulate' or 'ingest', got '{}'", c.source));
        }
        if (j.contains("params")) c.true_params = params_from_json(j.at("params"));
        read_opt(j, "horizon", c.horizon);
        read_opt(j, "events", c.events_path);
        if (j.contains("grid")) c.grid = j.at("grid");
        if (j.contains("preprocess")) c.preprocess = j.at("preprocess");
        if (j.contains("split")) {
            const auto& s = j.at("split");
            require_keys(s, {"train_fraction", "validation_fraction"}, "split");
            read_opt(s, "train_fraction", c.train_fraction);
            read_opt(s, "validation_fraction", c.validation_fraction);
        }
        if (j.contains("fit")) {
            const auto& f = j.at("fit");
            require_keys(f, {"method", "beta_low", "beta_high", "grid_points", "pgd_steps", "kappa", "backtracking",
                             "l1_weight", "initial_beta", "beta_tolerance", "max_outer_iterations", "pgd_tolerance",
                             "mask_band", "neighbor_radius", "parallel"},
                         "fit");
            read_opt(f, "method", c.fit_method);
            read_opt(f, "beta_low", c.fit.beta_low);
            read_opt(f, "beta_high", c.fit.beta_high);
            read_opt(f, "grid_points", c.fit.grid_points);
            read_opt(f, "pgd_steps", c.fit.pgd_steps);
            read_opt(f, "kappa", c.fit.kappa);
            read_opt(f, "backtracking", c.fit.backtracking);
            read_opt(f, "l1_weight", c.fit.l1_weight);
            read_opt(f, "initial_beta", c.fit.initial_beta);
            read_opt(f, "beta_tolerance", c.fit.beta_tolerance);
            read_opt(f, "max_outer_iterations", c.fit.max_outer_iterations);
            read_opt(f, "pgd_tolerance", c.fit.pgd_tolerance);
            read_opt(f, "parallel", c.fit.parallel);
            if (f.contains("mask_band")) c.mask_band = f.at("mask_band").get<std::size_t>();
            if (f.contains("neighbor_radius")) c.neighbor_radius = f.at("neighbor_radius").get<double>();
            if (c.fit_method != "grid" && c.fit_method != "alternating") {
                throw std::invalid_argument(fmt::format("fit method must be 'grid' or 'alternating', got '{}'", c.fit_method));
            }
        }
        if (j.contains("threshold")) {
            const auto& t = j.at("threshold");
            require_keys(t, {"delta", "a1", "a2", "screening"}, "threshold");
            read_opt(t, "delta", c.threshold.delta);
            read_opt(t, "a1", c.threshold.a1);
            read_opt(t, "a2", c.threshold.a2);
            read_opt(t, "screening", c.threshold.screening);
        }
        if (j.contains("conformal")) {
            const auto& cf = j.at("conformal");
            require_keys(cf, {"enabled", "method", "bootstrap_models", "batch_size", "alphas", "lambda_reg", "k_reg",
                              "split_fraction", "train", "test", "parallel"},
                         "conformal");
            read_opt(cf, "enabled", c.conformal_enabled);
            read_opt(cf, "method", c.conformal_method);
            read_opt(cf, "bootstrap_models", c.conformal.bootstrap_models);
            read_opt(cf, "batch_size", c.conformal.batch_size);
            read_opt(cf, "alphas", c.conformal.alphas);
            read_opt(cf, "lambda_reg", c.conformal.score.lambda_reg);
            read_opt(cf, "k_reg", c.conformal.score.k_reg);
            read_opt(cf, "split_fraction", c.conformal.split_fraction);
            read_opt(cf, "train", c.synthetic_train);
            read_opt(cf, "test", c.synthetic_test);
            read_opt(cf, "parallel", c.conformal.parallel);
            if (c.conformal_method != "eraps" && c.conformal_method != "sraps" && c.conformal_method != "both") {
                throw std::invalid_argument(
                    fmt::format("conformal method must be 'eraps', 'sraps' or 'both', got '{}'", c.conformal_method));
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(fmt::format("invalid run config: {}", e.what()));
    }
    if (!(c.train_fraction > 0.0) || !(c.validation_fraction >= 0.0) ||
        !(c.train_fraction + c.validation_fraction < 1.0)) {
        throw std::invalid_argument("split fractions must leave a nonempty training and test period");
    }
    c.fit.validate();
    return c;
}

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["source"] = source;
    if (true_params) j["params"] = params_to_json(*true_params);
    j["horizon"] = horizon;
    if (!events_path.empty()) j["events"] = events_path;
    if (!grid.is_null()) j["grid"] = grid;
    if (!preprocess.is_null()) j["preprocess"] = preprocess;
    j["split"] = {{"train_fraction", train_fraction}, {"validation_fraction", validation_fraction}};
    json f = {{"method", fit_method},
              {"beta_low", fit.beta_low},
              {"beta_high", fit.beta_high},
              {"grid_points", fit.grid_points},
              {"pgd_steps", fit.pgd_steps},
              {"kappa", fit.kappa},
              {"backtracking", fit.backtracking},
              {"l1_weight", fit.l1_weight},
              {"initial_beta", fit.initial_beta},
              {"beta_tolerance", fit.beta_tolerance},
              {"max_outer_iterations", fit.max_outer_iterations},
              {"pgd_tolerance", fit.pgd_tolerance}};
    if (mask_band) f["mask_band"] = *mask_band;
    if (neighbor_radius) f["neighbor_radius"] = *neighbor_radius;
    j["fit"] = f;
    j["threshold"] = {{"delta", threshold.delta}, {"a1", threshold.a1}, {"a2", threshold.a2},
                      {"screening", threshold.screening}};
    j["conformal"] = {{"enabled", conformal_enabled},
                      {"method", conformal_method},
                      {"bootstrap_models", conformal.bootstrap_models},
                      {"batch_size", conformal.batch_size},
                      {"alphas", conformal.alphas},
                      {"lambda_reg", conformal.score.lambda_reg},
                      {"k_reg", conformal.score.k_reg},
                      {"split_fraction", conformal.split_fraction},
                      {"train", synthetic_train},
                      {"test", synthetic_test}};
    return j;
}

RunReport run_end_to_end(const RunConfig& config, const std::string& out_dir) {
    namespace fs = std::filesystem;
    RunReport report;
    json artifacts = json::array();
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text((fs::path(out_dir) / name).string(), text);
        report.artifacts.push_back(name);
        artifacts.push_back({{"file", name}, {"bytes", text.size()}, {"fnv1a64", hex64(fnv1a64(text))}});
    };
    const MarkModel marks = MarkModel::linear();
    const ModelParams truth_params = config.true_params.value_or(demo_params());

    // Events.
    std::optional<GridSpec> grid;
    const EventSequence events = in_stage("ingest", [&]() {
        if (!config.grid.is_null()) grid = grid_from_json(config.grid);
        if (config.source == "simulate") {
            SimConfig sim;
            sim.params = truth_params;
            sim.horizon = config.horizon;
            sim.seed = derive_seed(config.seed, kSimulationStream);
            EventSequence seq = simulate(sim);
            emit("events.csv", events_csv(seq));
            return seq;
        }
        if (config.events_path.empty()) throw std::invalid_argument("ingest needs an 'events' path");
        IngestResult ingested = ingest(config.events_path, grid, preprocess_from_json(config.preprocess));
        for (auto& w : ingested.warnings) report.warnings.push_back(std::move(w));
        emit("scalers.json", scalers_to_json(ingested.scalers).dump(2) + "\n");
        return std::move(ingested.events);
    });

    const auto total_days = static_cast<std::size_t>(std::floor(events.horizon()));
    const auto train_days = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(total_days)));
    const auto test_start = static_cast<std::size_t>(
        std::floor((config.train_fraction + config.validation_fraction) * static_cast<double>(total_days)));
    if (train_days == 0 || test_start >= total_days) {
        throw StageError("ingest", fmt::format("horizon of {} days is too short to split", total_days));
    }

    // Fit on the training period.
    report.fit = in_stage("fit", [&]() {
        const EventSequence train = events.truncated(static_cast<double>(train_days), static_cast<double>(train_days));
        FitConfig fc = config.fit;
        if (config.mask_band) {
            fc.constraints.mask = mask_from_index_band(events.num_locations(), *config.mask_band);
        } else if (grid) {
            const auto centroids = grid->centroids();
            fc.constraints.mask = mask_from_centroids(centroids, config.neighbor_radius.value_or(grid->cell_size()));
        } else if (config.source == "simulate") {
            fc.constraints.mask = truth_params.mask;
        }
        FitResult fit = config.fit_method == "alternating" ? alternating_fit(train, marks, fc) : grid_fit(train, marks, fc);
        for (const auto& w : fit.warnings) report.warnings.push_back(w);
        emit("params.json", params_to_json(fit.params).dump(2) + "\n");
        emit("fit_trace.csv", fit_trace_csv(fit));
        return fit;
    });
    if (config.source == "simulate") report.recovery = parameter_error(report.fit.params, truth_params);

    // Predict and evaluate on the test period.
    const DetectionTrace trace = in_stage("predict", [&]() {
        const RiskSeries test = daily_risk(report.fit.params, events, marks, test_start, total_days);
        const auto validation = daily_truth(events, train_days, test_start);
        DetectionTrace t = predict_series(test, validation, config.threshold);
        emit("detection_trace.csv", detection_trace_csv(t));
        return t;
    });
    report.metrics = in_stage("eval", [&]() {
        MetricsReport m = f1_metrics(trace);
        emit("metrics.csv", metrics_csv(m));
        emit("f1_histogram.csv", histogram_csv(m));
        return m;
    });

    // Conformal sets for magnitudes.
    if (config.conformal_enabled) {
        in_stage("conformal", [&]() {
            LabeledData train, test;
            const bool labelled = std::any_of(events.events().begin(), events.events().end(),
                                              [](const EventRecord& e) { return e.magnitude.has_value(); });
            if (labelled) {
                std::size_t classes = 0;
                for (const auto& e : events.events()) {
                    if (e.magnitude) classes = std::max(classes, static_cast<std::size_t>(*e.magnitude));
                }
                std::vector<const EventRecord*> tr, te;
                for (const auto& e : events.events()) {
                    if (!e.magnitude) continue;
                    (e.time < static_cast<double>(test_start) ? tr : te).push_back(&e);
                }
                auto fill = [&](LabeledData& d, const std::vector<const EventRecord*>& rows) {
                    d.num_classes = classes;
                    d.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(events.mark_dim()));
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                        for (std::size_t c = 0; c < events.mark_dim(); ++c) {
                            d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i]->marks[c];
                        }
                        d.labels.push_back(*rows[i]->magnitude - 1);
                    }
                };
                fill(train, tr);
                fill(test, te);
            } else {
                Rng rng(derive_seed(config.seed, kConformalStream));
                train = gaussian_classes(config.synthetic_train, 3, 2.0, rng).data;
                test = gaussian_classes(config.synthetic_test, 3, 2.0, rng).data;
            }
            ConformalConfig cc = config.conformal;
            cc.seed = derive_seed(config.seed, kConformalStream + 1);
            if (cc.batch_size > test.size()) cc.batch_size = std::max<std::size_t>(1, test.size());
            std::vector<ConformalRun> runs;
            const Trainer trainer = logistic_trainer();
            if (config.conformal_method != "sraps") runs.push_back(eraps(train, test, cc, trainer));
            if (config.conformal_method != "eraps") runs.push_back(sraps(train, test, cc, trainer));
            for (const auto& r : runs) {
                emit(fmt::format("conformal_sets_{}.jsonl", r.method), conformal_sets_jsonl(r));
                for (const auto& w : r.warnings) report.warnings.push_back(w);
            }
            emit("conformal_summary.csv", conformal_summary_csv(runs));
            return 0;
        });
    }

    json manifest;
    manifest["tool"] = "firecast";
    manifest["version"] = kVersion;
    manifest["seed"] = config.seed;
    const json config_json = config.to_json();
    manifest["config"] = config_json;
    manifest["config_fnv1a64"] = hex64(fnv1a64(config_json.dump()));
    manifest["stages"] = json::array({"ingest", "fit", "predict", "eval"});
    if (config.conformal_enabled) manifest["stages"].push_back("conformal");
    manifest["fit"] = {{"method", config.fit_method},
                       {"objective", report.fit.objective},
                       {"beta", report.fit.params.beta},
                       {"best_index", report.fit.best_index},
                       {"iterations", report.fit.iterations}};
    if (report.recovery) {
        manifest["recovery"] = {{"total_relative", report.recovery->total_relative},
                                {"mu", report.recovery->mu},
                                {"alpha", report.recovery->alpha},
                                {"beta", report.recovery->beta}};
    }
    manifest["artifacts"] = artifacts;
    manifest["warnings"] = report.warnings;
    write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    report.artifacts.push_back("manifest.json");
    return report;
}

}  // namespace firecast
