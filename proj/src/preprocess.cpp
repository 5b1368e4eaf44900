#include "firecast/preprocess.hpp"

#include "firecast/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace firecast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RawRow {
    double time{0.0};
    std::size_t location{0};
    std::optional<int> magnitude;
    std::vector<double> continuous;
    std::vector<std::string> categorical;
};

}  // namespace

ColumnScaler ColumnScaler::fit(std::span<const double> values) {
    ColumnScaler s;
    if (values.empty()) {
        s.constant = true;
        return s;
    }
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / n);
    if (!(s.sd > 0.0)) {
        s.constant = true;
        s.sd = 1.0;
        return s;
    }
    s.z_min = std::numeric_limits<double>::infinity();
    s.z_max = -std::numeric_limits<double>::infinity();
    for (double v : values) {
        const double z = (v - s.mean) / s.sd;
        s.z_min = std::min(s.z_min, z);
        s.z_max = std::max(s.z_max, z);
    }
    if (!(s.z_max > s.z_min)) s.constant = true;
    return s;
}

double ColumnScaler::apply(double value) const {
    if (constant) return 0.5;
    const double z = (value - mean) / sd;
    return std::clamp((z - z_min) / (z_max - z_min), 0.0, 1.0);
}

IngestResult ingest_table(const CsvTable& table, const std::optional<GridSpec>& grid,
                          const PreprocessConfig& config) {
    IngestResult result;
    const std::size_t t_col = table.column("time");
    const auto loc_col = table.find_column("location");
    const auto lat_col = table.find_column("lat");
    const auto lon_col = table.find_column("lon");
    const auto mag_col = table.find_column("magnitude");
    const bool use_coords = !loc_col;
    if (use_coords && (!lat_col || !lon_col)) {
        throw ParseError("event table needs a 'location' column or 'lat' and 'lon' columns");
    }
    if (use_coords && !grid) throw ParseError("coordinates given but no grid configured");

    std::vector<std::size_t> continuous_cols, categorical_cols;
    std::vector<bool> is_categorical;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string& name = table.header[c];
        if (c == t_col || (loc_col && c == *loc_col) || (mag_col && c == *mag_col)) continue;
        if ((lat_col && c == *lat_col) || (lon_col && c == *lon_col)) continue;
        const bool cat = std::find(config.one_hot_columns.begin(), config.one_hot_columns.end(), name) !=
                         config.one_hot_columns.end();
        (cat ? categorical_cols : continuous_cols).push_back(c);
        is_categorical.push_back(cat);
    }
    for (const auto& name : config.one_hot_columns) {
        if (!table.find_column(name)) throw ParseError(fmt::format("one-hot column '{}' not found", name));
    }

    std::vector<RawRow> rows;
    rows.reserve(table.rows.size());
    std::size_t max_location = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& fields = table.rows[r];
        const std::size_t line = r + 2;
        RawRow row;
        row.time = parse_double(fields[t_col], line);
        if (use_coords) {
            const double lat = parse_double(fields[*lat_col], line);
            const double lon = parse_double(fields[*lon_col], line);
            const auto cell = grid->locate(lat, lon);
            if (!cell) {
                ++result.dropped_outside;
                continue;
            }
            row.location = *cell;
        } else {
            row.location = static_cast<std::size_t>(parse_index(fields[*loc_col], line));
        }
        if (mag_col && !is_missing(fields[*mag_col])) {
            const long long m = parse_index(fields[*mag_col], line);
            if (m < 1) throw ParseError(fmt::format("line {}: magnitude labels start at 1", line));
            row.magnitude = static_cast<int>(m);
        }
        for (std::size_t c : continuous_cols) {
            row.continuous.push_back(is_missing(fields[c]) ? kNaN : parse_double(fields[c], line));
        }
        for (std::size_t c : categorical_cols) row.categorical.push_back(fields[c]);
        max_location = std::max(max_location, row.location);
        rows.push_back(std::move(row));
    }
    if (result.dropped_outside > 0) {
        result.warnings.push_back(
            fmt::format("dropped {} events outside the grid or in excluded cells", result.dropped_outside));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.time < b.time; });

    const std::size_t k = config.num_locations.value_or(
        grid ? grid->num_cells() : (rows.empty() ? 1 : max_location + 1));

    // Impute each continuous column per location over time.
    std::vector<std::vector<std::size_t>> by_location(k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].location >= k) {
            throw ParseError(fmt::format("location {} exceeds the {} configured locations", rows[i].location, k));
        }
        by_location[rows[i].location].push_back(i);
    }
    for (std::size_t d = 0; d < continuous_cols.size(); ++d) {
        for (const auto& members : by_location) {
            if (members.empty()) continue;
            std::vector<double> times, values;
            for (std::size_t i : members) {
                times.push_back(rows[i].time);
                values.push_back(rows[i].continuous[d]);
            }
            const auto filled = impute_missing(times, values, config.spline_degree);
            for (std::size_t j = 0; j < members.size(); ++j) {
                if (std::isnan(values[j]) && !std::isnan(filled[j])) ++result.imputed;
                rows[members[j]].continuous[d] = filled[j];
            }
        }
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& row : rows) {
            if (!std::isnan(row.continuous[d])) {
                sum += row.continuous[d];
                ++count;
            }
        }
        const double fill = count > 0 ? sum / static_cast<double>(count) : 0.0;
        for (auto& row : rows) {
            if (std::isnan(row.continuous[d])) {
                row.continuous[d] = fill;
                ++result.imputed;
            }
        }
    }

    // Scale continuous columns.
    if (config.frozen_scalers) {
        if (config.frozen_scalers->size() != continuous_cols.size()) {
            throw std::domain_error(fmt::format("{} frozen scalers for {} continuous columns",
                                                config.frozen_scalers->size(), continuous_cols.size()));
        }
        result.scalers = *config.frozen_scalers;
    } else {
        for (std::size_t d = 0; d < continuous_cols.size(); ++d) {
            std::vector<double> column;
            column.reserve(rows.size());
            for (const auto& row : rows) column.push_back(row.continuous[d]);
            result.scalers.push_back(ColumnScaler::fit(column));
        }
    }

    // Category levels in sorted order; a missing code sets no indicator.
    std::vector<std::vector<std::string>> levels(categorical_cols.size());
    for (std::size_t d = 0; d < categorical_cols.size(); ++d) {
        std::set<std::string> seen;
        for (const auto& row : rows) {
            if (!is_missing(row.categorical[d])) seen.insert(row.categorical[d]);
        }
        levels[d].assign(seen.begin(), seen.end());
    }

    std::size_t ci = 0, di = 0;
    for (bool cat : is_categorical) {
        if (cat) {
            for (const auto& level : levels[di]) {
                result.mark_names.push_back(fmt::format("{}={}", table.header[categorical_cols[di]], level));
            }
            ++di;
        } else {
            result.mark_names.push_back(table.header[continuous_cols[ci++]]);
        }
    }

    std::vector<EventRecord> events;
    events.reserve(rows.size());
    double last_time = 0.0;
    for (const auto& row : rows) {
        EventRecord e;
        e.time = row.time;
        e.location = row.location;
        e.magnitude = row.magnitude;
        std::size_t c = 0, d = 0;
        for (bool cat : is_categorical) {
            if (cat) {
                for (const auto& level : levels[d]) e.marks.push_back(row.categorical[d] == level ? 1.0 : 0.0);
                ++d;
            } else {
                e.marks.push_back(result.scalers[c].apply(row.continuous[c]));
                ++c;
            }
        }
        last_time = std::max(last_time, e.time);
        events.push_back(std::move(e));
    }
    const double horizon = config.horizon.value_or(std::max(1.0, std::ceil(last_time)));
    result.events = EventSequence(std::move(events), horizon, k, result.mark_names.size());
    return result;
}

IngestResult ingest(const std::string& path, const std::optional<GridSpec>& grid,
                    const PreprocessConfig& config) {
    return ingest_table(read_csv(path), grid, config);
}

nlohmann::json scalers_to_json(const std::vector<ColumnScaler>& scalers) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : scalers) {
        out.push_back({{"mean", s.mean}, {"sd", s.sd}, {"z_min", s.z_min}, {"z_max", s.z_max},
                       {"constant", s.constant}});
    }
    return out;
}

std::vector<ColumnScaler> scalers_from_json(const nlohmann::json& j) {
    std::vector<ColumnScaler> out;
    try {
        for (const auto& item : j) {
            ColumnScaler s;
            s.mean = item.at("mean").get<double>();
            s.sd = item.at("sd").get<double>();
            s.z_min = item.at("z_min").get<double>();
            s.z_max = item.at("z_max").get<double>();
            s.constant = item.at("constant").get<bool>();
            out.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("invalid scaler JSON: {}", e.what()));
    }
    return out;
}

}  // namespace firecast
