#pragma once

#include "firecast/conformal.hpp"
#include "firecast/estimation.hpp"
#include "firecast/grid.hpp"
#include "firecast/marks.hpp"
#include "firecast/metrics.hpp"
#include "firecast/model.hpp"
#include "firecast/preprocess.hpp"
#include "firecast/simulation.hpp"
#include "firecast/thresholding.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace firecast {

/// Failure inside one stage of an end-to-end run.
class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& message)
        : std::runtime_error("[" + stage + "] " + message), stage_(stage) {}
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Daily risk and truth at every location over days [first_day, last_day).
/// Day d is scored at time d from events strictly before d; its truth is +1
/// when some event at the location has floor(time) == d.
struct RiskSeries {
    std::vector<double> days;
    std::vector<std::vector<double>> risk;   // [location][day]
    std::vector<std::vector<int>> truth;     // [location][day]
};

/// Marks for a (day, location) query: the latest earlier event mark at the
/// location, else the mean of all earlier marks, else 0.5 in every component.
[[nodiscard]] RiskSeries daily_risk(const ModelParams& params, const EventSequence& seq,
                                    const MarkModel& marks, std::size_t first_day,
                                    std::size_t last_day);

[[nodiscard]] std::vector<std::vector<int>> daily_truth(const EventSequence& seq,
                                                        std::size_t first_day,
                                                        std::size_t last_day);

/// lambda(t, k, B) - lambda(t, k, A).
[[nodiscard]] double counterfactual_delta(const ModelParams& params, const EventSequence& seq,
                                          const MarkModel& marks, double t, std::size_t k,
                                          std::span<const double> marks_a,
                                          std::span<const double> marks_b);

struct ThresholdOptions {
    double delta{0.05};
    double a1{1.1};
    double a2{1.1};
    bool screening{true};
};

/// Thresholds from each location's first test-day risk, screening statistics
/// from the validation truths, then detection over the test series.
[[nodiscard]] DetectionTrace predict_series(const RiskSeries& test,
                                            const std::vector<std::vector<int>>& validation_truth,
                                            const ThresholdOptions& options);

// Artifact formats.
[[nodiscard]] std::string fit_trace_csv(const FitResult& fit);
[[nodiscard]] std::string detection_trace_csv(const DetectionTrace& trace);
[[nodiscard]] DetectionTrace parse_detection_trace_csv(const std::string& text,
                                                       const std::string& source);
[[nodiscard]] std::string metrics_csv(const MetricsReport& report);
[[nodiscard]] std::string histogram_csv(const MetricsReport& report);
[[nodiscard]] std::string conformal_sets_jsonl(const ConformalRun& run);
[[nodiscard]] std::string conformal_summary_csv(const std::vector<ConformalRun>& runs);

/// {"lat_min", "lon_min", "lat_max", "lon_max", "cell_size", "excluded"}.
[[nodiscard]] GridSpec grid_from_json(const nlohmann::json& j);
/// {"spline_degree", "one_hot", "horizon", "num_locations"}.
[[nodiscard]] PreprocessConfig preprocess_from_json(const nlohmann::json& j);

/// Everything `run` needs, parsed from a JSON bundle. Missing keys keep the
/// defaults below.
struct RunConfig {
    std::uint64_t seed{1};
    std::string source{"simulate"};  // or "ingest"
    // simulate
    std::optional<ModelParams> true_params;  // default: a 4-location chain
    double horizon{600.0};
    // ingest
    std::string events_path;
    nlohmann::json grid;        // optional GridSpec fields
    nlohmann::json preprocess;  // optional PreprocessConfig fields
    // split, in days
    double train_fraction{0.6};
    double validation_fraction{0.2};
    // fit
    std::string fit_method{"grid"};  // or "alternating"
    FitConfig fit;
    std::optional<std::size_t> mask_band;
    std::optional<double> neighbor_radius;
    // predict
    ThresholdOptions threshold;
    // conformal
    bool conformal_enabled{true};
    std::string conformal_method{"eraps"};
    ConformalConfig conformal;
    std::size_t synthetic_train{300};
    std::size_t synthetic_test{200};

    [[nodiscard]] static RunConfig from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;
};

/// The 4-location chain used by default for simulated runs.
[[nodiscard]] ModelParams demo_params();

struct RunReport {
    std::vector<std::string> artifacts;  // file names relative to out_dir
    FitResult fit;
    MetricsReport metrics;
    std::optional<ParameterError> recovery;
    std::vector<std::string> warnings;
};

/// simulate-or-ingest, fit, predict, evaluate, conformal; writes each
/// artifact into out_dir as soon as its stage finishes and a manifest last.
[[nodiscard]] RunReport run_end_to_end(const RunConfig& config, const std::string& out_dir);

}  // namespace firecast
