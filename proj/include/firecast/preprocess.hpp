#pragma once

#include "firecast/grid.hpp"
#include "firecast/io.hpp"
#include "firecast/model.hpp"

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace firecast {

/// Standardize, then min-max scale the standardized values to [0, 1].
/// Statistics are frozen at fit time; later values are clamped into [0, 1].
/// A column without spread maps to 0.5.
struct ColumnScaler {
    double mean{0.0};
    double sd{1.0};
    double z_min{0.0};
    double z_max{1.0};
    bool constant{false};

    [[nodiscard]] static ColumnScaler fit(std::span<const double> values);
    [[nodiscard]] double apply(double value) const;
};

struct PreprocessConfig {
    int spline_degree{5};
    // Columns holding category codes; each distinct value becomes a 0/1 mark.
    std::vector<std::string> one_hot_columns;
    // When set, scaling reuses these rather than fitting on the input.
    std::optional<std::vector<ColumnScaler>> frozen_scalers;
    std::optional<double> horizon;
    std::optional<std::size_t> num_locations;
};

struct IngestResult {
    EventSequence events{{}, 1.0, 1, 0};
    std::vector<std::string> mark_names;
    std::vector<ColumnScaler> scalers;  // continuous columns, in mark order
    std::size_t dropped_outside{0};
    std::size_t imputed{0};
    std::vector<std::string> warnings;
};

/// Raw event table to a preprocessed EventSequence. Rows carry `time` and
/// either `location` or `lat,lon` (the latter needs a grid); an optional
/// `magnitude` column holds labels 1..C. Every other column is a mark. Missing
/// continuous marks are imputed per location over time; locations with no
/// observation of a column take the column mean.
[[nodiscard]] IngestResult ingest_table(const CsvTable& table, const std::optional<GridSpec>& grid,
                                        const PreprocessConfig& config);
[[nodiscard]] IngestResult ingest(const std::string& path, const std::optional<GridSpec>& grid,
                                  const PreprocessConfig& config);

[[nodiscard]] nlohmann::json scalers_to_json(const std::vector<ColumnScaler>& scalers);
[[nodiscard]] std::vector<ColumnScaler> scalers_from_json(const nlohmann::json& j);

}  // namespace firecast
