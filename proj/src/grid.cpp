#include "firecast/grid.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

namespace {

std::size_t cell_count(double span, double size) {
    // Guard against 0.72 / 0.24 landing a hair above 3.
    const double cells = std::ceil(span / size - 1e-9);
    return static_cast<std::size_t>(std::max(1.0, cells));
}

}  // namespace

GridSpec::GridSpec(double lat_min, double lon_min, double lat_max, double lon_max, double cell_size,
                   std::vector<std::size_t> excluded_raw)
    : lat_min_(lat_min), lon_min_(lon_min), lat_max_(lat_max), lon_max_(lon_max), cell_size_(cell_size) {
    if (!(cell_size > 0.0)) throw std::domain_error("cell size must be positive");
    if (!(lat_max > lat_min) || !(lon_max > lon_min)) {
        throw std::domain_error("bounding box must have positive extent");
    }
    rows_ = cell_count(lat_max - lat_min, cell_size);
    cols_ = cell_count(lon_max - lon_min, cell_size);
    // Partial cells on the upper edges are kept whole.
    lat_max_ = std::max(lat_max, lat_min + static_cast<double>(rows_) * cell_size);
    lon_max_ = std::max(lon_max, lon_min + static_cast<double>(cols_) * cell_size);
    const std::size_t raw_total = rows_ * cols_;
    std::vector<bool> excluded(raw_total, false);
    for (std::size_t raw : excluded_raw) {
        if (raw >= raw_total) {
            throw std::domain_error(fmt::format("excluded cell {} outside the {}x{} grid", raw, rows_, cols_));
        }
        excluded[raw] = true;
    }
    id_of_raw_.resize(raw_total);
    for (std::size_t raw = 0; raw < raw_total; ++raw) {
        if (excluded[raw]) continue;
        id_of_raw_[raw] = raw_of_id_.size();
        raw_of_id_.push_back(raw);
    }
}

std::optional<std::size_t> GridSpec::locate(double lat, double lon) const {
    if (!(lat >= lat_min_ && lat <= lat_max_ && lon >= lon_min_ && lon <= lon_max_)) return std::nullopt;
    const auto row = std::min(rows_ - 1, static_cast<std::size_t>((lat - lat_min_) / cell_size_));
    const auto col = std::min(cols_ - 1, static_cast<std::size_t>((lon - lon_min_) / cell_size_));
    return id_of_raw_[row * cols_ + col];
}

std::size_t GridSpec::raw_index(std::size_t id) const {
    if (id >= raw_of_id_.size()) throw std::out_of_range(fmt::format("no retained cell {}", id));
    return raw_of_id_[id];
}

std::optional<std::size_t> GridSpec::id_of_raw(std::size_t raw) const {
    if (raw >= id_of_raw_.size()) return std::nullopt;
    return id_of_raw_[raw];
}

std::pair<std::size_t, std::size_t> GridSpec::row_col(std::size_t id) const {
    const std::size_t raw = raw_index(id);
    return {raw / cols_, raw % cols_};
}

Centroid GridSpec::centroid(std::size_t id) const {
    const auto [row, col] = row_col(id);
    return {lat_min_ + (static_cast<double>(row) + 0.5) * cell_size_,
            lon_min_ + (static_cast<double>(col) + 0.5) * cell_size_};
}

std::vector<Centroid> GridSpec::centroids() const {
    std::vector<Centroid> out;
    out.reserve(num_cells());
    for (std::size_t id = 0; id < num_cells(); ++id) out.push_back(centroid(id));
    return out;
}

}  // namespace firecast
