#pragma once

#include "firecast/model.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace firecast {

/// Regular lat/lon grid over a bounding box. Raw cells are numbered row-major
/// from the (lat_min, lon_min) corner; retained cells (raw cells minus the
/// excluded ones) get contiguous ids in raw order. A box whose extent is not a
/// whole number of cells is widened on the upper edges.
class GridSpec {
public:
    GridSpec(double lat_min, double lon_min, double lat_max, double lon_max,
             double cell_size = 0.24, std::vector<std::size_t> excluded_raw = {});

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t num_cells() const noexcept { return raw_of_id_.size(); }
    [[nodiscard]] double cell_size() const noexcept { return cell_size_; }

    /// Retained id containing the point, or nothing when the point is outside
    /// the box or in an excluded cell. Points on the upper edges belong to the
    /// last row or column.
    [[nodiscard]] std::optional<std::size_t> locate(double lat, double lon) const;

    [[nodiscard]] std::size_t raw_index(std::size_t id) const;
    [[nodiscard]] std::optional<std::size_t> id_of_raw(std::size_t raw) const;
    [[nodiscard]] std::pair<std::size_t, std::size_t> row_col(std::size_t id) const;
    [[nodiscard]] Centroid centroid(std::size_t id) const;
    [[nodiscard]] std::vector<Centroid> centroids() const;

private:
    double lat_min_, lon_min_, lat_max_, lon_max_, cell_size_;
    std::size_t rows_{0}, cols_{0};
    std::vector<std::size_t> raw_of_id_;
    std::vector<std::optional<std::size_t>> id_of_raw_;
};

}  // namespace firecast
