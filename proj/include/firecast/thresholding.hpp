#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace firecast {

/// Per-location knobs of the dynamic threshold rule.
struct ThresholdParams {
    double tau_min{0.0};
    double tau_max{0.0};
    double eta{0.0};    // learning rate
    double delta{0.05}; // minimum relative increase for a positive
    double a1{1.1};     // floor knob: tau never drops below previous risk / a1
    double a2{1.1};     // reset knob: a drop by this factor resets tau to the risk

    /// tau_min = r / 1.8, tau_max = 1.8 r, eta = (tau_max - tau_min) / T^1.5.
    /// A nonpositive first-day risk is rejected.
    [[nodiscard]] static ThresholdParams from_first_risk(double first_risk, std::size_t steps);

    /// Throws std::domain_error when the knobs are inconsistent.
    void validate() const;
};

/// Clamp to [tau_min, tau_max].
[[nodiscard]] double project_threshold(double x, const ThresholdParams& params);

/// Validation-period history at one location.
struct ScreeningStats {
    std::size_t fire_count{0};
    double average_gap{0.0}; // in steps

    /// From a +1/-1 validation series. With fewer than two fires the gap is the
    /// window length.
    [[nodiscard]] static ScreeningStats from_validation(std::span<const int> truths);
};

/// Decisions at one location, one entry per step. `threshold` is the value the
/// step's decision was compared against.
struct LocationTrace {
    std::vector<double> risk;
    std::vector<double> threshold;
    std::vector<int> prediction;
    std::vector<int> truth;
    std::size_t vetoed{0};

    [[nodiscard]] std::size_t detections() const;
};

/// Runs the threshold rule over one location. Truths are +1 (event) or -1 and
/// are revealed after each decision. Screening, when present, turns emitted
/// positives into -1 and the feedback step sees the emitted value.
[[nodiscard]] LocationTrace detect_location(std::span<const double> risk,
                                            std::span<const int> truth,
                                            const ThresholdParams& params,
                                            const std::optional<ScreeningStats>& screening);

struct DetectionTrace {
    std::vector<double> times;
    std::vector<LocationTrace> locations;
};

/// Location-wise detect_location over aligned series. `risk[k]` and
/// `truth[k]` must share the length of `times`.
[[nodiscard]] DetectionTrace detect(const std::vector<double>& times,
                                    const std::vector<std::vector<double>>& risk,
                                    const std::vector<std::vector<int>>& truth,
                                    const std::vector<ThresholdParams>& params,
                                    const std::vector<std::optional<ScreeningStats>>& screening);

}  // namespace firecast
