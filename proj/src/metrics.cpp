#include "firecast/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

LocationScore score_location(std::span<const int> prediction, std::span<const int> truth) {
    if (prediction.size() != truth.size()) {
        throw std::domain_error(fmt::format("{} predictions for {} truths", prediction.size(),
                                            truth.size()));
    }
    LocationScore s;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const bool p = prediction[t] == 1;
        const bool y = truth[t] == 1;
        s.predicted += p;
        s.actual += y;
        s.true_positives += p && y;
    }
    auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    s.precision = ratio(s.true_positives, s.predicted);
    s.recall = ratio(s.true_positives, s.actual);
    const double sum = s.precision + s.recall;
    s.f1 = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
    return s;
}

MetricsReport f1_metrics(const DetectionTrace& trace, std::size_t bins) {
    if (bins == 0) throw std::domain_error("histogram needs at least one bin");
    MetricsReport report;
    report.f1_histogram.assign(bins, 0);
    for (const auto& loc : trace.locations) {
        const LocationScore s = score_location(loc.prediction, loc.truth);
        const auto bin = std::min(bins - 1, static_cast<std::size_t>(s.f1 * static_cast<double>(bins)));
        ++report.f1_histogram[bin];
        report.locations.push_back(s);
    }
    return report;
}

}  // namespace firecast
