#include "firecast/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

ThresholdParams ThresholdParams::from_first_risk(double first_risk, std::size_t steps) {
    if (!(first_risk > 0.0) || !std::isfinite(first_risk)) {
        throw std::domain_error(
            fmt::format("first-day risk must be positive and finite, got {}", first_risk));
    }
    if (steps == 0) throw std::domain_error("threshold horizon must be at least one step");
    ThresholdParams p;
    p.tau_min = first_risk / 1.8;
    p.tau_max = first_risk * 1.8;
    p.eta = (p.tau_max - p.tau_min) / std::pow(static_cast<double>(steps), 1.5);
    return p;
}

void ThresholdParams::validate() const {
    if (!(tau_min > 0.0) || !(tau_min <= tau_max) || !std::isfinite(tau_max)) {
        throw std::domain_error(
            fmt::format("need 0 < tau_min <= tau_max, got [{}, {}]", tau_min, tau_max));
    }
    if (!(eta >= 0.0)) throw std::domain_error("eta must be nonnegative");
    if (!(delta >= 0.0)) throw std::domain_error("delta must be nonnegative");
    if (!(a1 > 0.0) || !(a2 > 0.0)) throw std::domain_error("a1 and a2 must be positive");
}

double project_threshold(double x, const ThresholdParams& params) {
    return std::clamp(x, params.tau_min, params.tau_max);
}

ScreeningStats ScreeningStats::from_validation(std::span<const int> truths) {
    ScreeningStats s;
    std::optional<std::size_t> first;
    std::size_t last = 0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
        if (truths[t] != 1) continue;
        ++s.fire_count;
        if (!first) first = t;
        last = t;
    }
    s.average_gap = s.fire_count >= 2
                        ? static_cast<double>(last - *first) / static_cast<double>(s.fire_count - 1)
                        : static_cast<double>(truths.size());
    return s;
}

std::size_t LocationTrace::detections() const {
    return static_cast<std::size_t>(std::count(prediction.begin(), prediction.end(), 1));
}

LocationTrace detect_location(std::span<const double> risk, std::span<const int> truth,
                              const ThresholdParams& params,
                              const std::optional<ScreeningStats>& screening) {
    if (risk.size() != truth.size()) {
        throw std::domain_error(fmt::format("risk has {} steps but truth has {}", risk.size(),
                                            truth.size()));
    }
    params.validate();
    for (std::size_t t = 0; t < risk.size(); ++t) {
        if (!(risk[t] > 0.0) || !std::isfinite(risk[t])) {
            throw std::domain_error(fmt::format("risk at step {} is not positive: {}", t, risk[t]));
        }
        if (truth[t] != 1 && truth[t] != -1) {
            throw std::domain_error(fmt::format("truth at step {} must be +1 or -1", t));
        }
    }

    LocationTrace trace;
    const std::size_t n = risk.size();
    trace.risk.assign(risk.begin(), risk.end());
    trace.truth.assign(truth.begin(), truth.end());
    trace.threshold.resize(n);
    trace.prediction.resize(n);
    if (n == 0) return trace;

    std::size_t detected = 0;
    std::optional<std::size_t> last_positive;
    auto emit = [&](std::size_t t, bool positive) {
        if (positive && screening) {
            const bool had_fires = screening->fire_count >= 1;
            const bool under_count = detected < screening->fire_count;
            const bool spaced = !last_positive || static_cast<double>(t - *last_positive) >=
                                                      screening->average_gap;
            if (!(had_fires && under_count && spaced)) {
                ++trace.vetoed;
                positive = false;
            }
        }
        if (positive) {
            ++detected;
            last_positive = t;
        }
        return positive ? 1 : -1;
    };
    auto feedback = [&](double previous_tau, int prediction, double previous_risk) {
        return std::max(project_threshold(previous_tau + params.eta * prediction, params),
                        previous_risk / params.a1);
    };

    // settled[t] is tau after step t's feedback and reset; `pending` is the
    // threshold the next step starts from.
    std::vector<double> settled(n);
    settled[0] = params.tau_min;
    trace.threshold[0] = params.tau_min;
    trace.prediction[0] = emit(0, risk[0] > params.tau_min);
    double pending = settled[0];
    if (trace.prediction[0] != truth[0]) pending = feedback(settled[0], trace.prediction[0], risk[0]);

    for (std::size_t t = 1; t < n; ++t) {
        double tau = pending;
        trace.threshold[t] = tau;
        const double increase = std::abs((risk[t] - risk[t - 1]) / risk[t - 1]);
        trace.prediction[t] = emit(t, increase >= params.delta && risk[t] > tau);
        if (trace.prediction[t] != truth[t]) {
            tau = feedback(settled[t - 1], trace.prediction[t], risk[t - 1]);
        }
        if (risk[t] <= risk[t - 1] / params.a2) tau = risk[t];
        settled[t] = tau;
        pending = tau;
    }
    return trace;
}

DetectionTrace detect(const std::vector<double>& times,
                      const std::vector<std::vector<double>>& risk,
                      const std::vector<std::vector<int>>& truth,
                      const std::vector<ThresholdParams>& params,
                      const std::vector<std::optional<ScreeningStats>>& screening) {
    const std::size_t k = risk.size();
    if (truth.size() != k || params.size() != k || (!screening.empty() && screening.size() != k)) {
        throw std::domain_error("detect inputs disagree on the number of locations");
    }
    DetectionTrace out;
    out.times = times;
    out.locations.reserve(k);
    for (std::size_t loc = 0; loc < k; ++loc) {
        if (risk[loc].size() != times.size()) {
            throw std::domain_error(fmt::format("location {} has {} risk values for {} times", loc,
                                                risk[loc].size(), times.size()));
        }
        out.locations.push_back(detect_location(risk[loc], truth[loc], params[loc],
                                                screening.empty() ? std::nullopt : screening[loc]));
    }
    return out;
}

}  // namespace firecast
