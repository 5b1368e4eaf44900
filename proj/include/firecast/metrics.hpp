#pragma once

#include "firecast/thresholding.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace firecast {

struct LocationScore {
    double precision{1.0};
    double recall{1.0};
    double f1{1.0};
    std::size_t true_positives{0};
    std::size_t predicted{0};
    std::size_t actual{0};
};

/// Precision and recall with the 0/0 -> 1 convention; F1 = 0 when P + R = 0.
[[nodiscard]] LocationScore score_location(std::span<const int> prediction,
                                           std::span<const int> truth);

struct MetricsReport {
    std::vector<LocationScore> locations;
    // F1 counts over equal-width bins of [0, 1]; 1.0 falls in the last bin.
    std::vector<std::size_t> f1_histogram;
};

[[nodiscard]] MetricsReport f1_metrics(const DetectionTrace& trace, std::size_t bins = 10);

}  // namespace firecast
