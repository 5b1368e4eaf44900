#pragma once

#include "firecast/model.hpp"

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace firecast {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Plain comma-separated table with a header row. Fields are not quoted.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::optional<std::size_t> find_column(const std::string& name) const;
    /// Throws ParseError when the column is absent.
    [[nodiscard]] std::size_t column(const std::string& name) const;
};

[[nodiscard]] CsvTable read_csv(const std::string& path);
[[nodiscard]] CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");

/// `line` is the 1-based file line used in error messages.
[[nodiscard]] double parse_double(const std::string& field, std::size_t line);
[[nodiscard]] long long parse_index(const std::string& field, std::size_t line);
/// Empty, "NA", "nan" and "NaN" count as missing.
[[nodiscard]] bool is_missing(const std::string& field);

/// Shortest decimal text that round-trips to the same double.
[[nodiscard]] std::string format_double(double v);

/// `time,location,m_0,...,m_{p-1}[,magnitude]`.
[[nodiscard]] std::string events_csv(const EventSequence& seq);
void write_events_csv(const std::string& path, const EventSequence& seq);

/// Reads an already-preprocessed event CSV. Without an explicit horizon the
/// ceiling of the last event time (at least 1) is used; without an explicit
/// location count, max(location) + 1.
[[nodiscard]] EventSequence read_events_csv(const std::string& path,
                                            std::optional<double> horizon = std::nullopt,
                                            std::optional<std::size_t> num_locations = std::nullopt);

[[nodiscard]] nlohmann::json params_to_json(const ModelParams& params);
[[nodiscard]] ModelParams params_from_json(const nlohmann::json& j);
void save_params(const std::string& path, const ModelParams& params);
[[nodiscard]] ModelParams load_params(const std::string& path);

[[nodiscard]] nlohmann::json read_json(const std::string& path);
/// Writes `text` exactly, creating parent directories.
void write_text(const std::string& path, const std::string& text);
[[nodiscard]] std::string read_text(const std::string& path);

}  // namespace firecast
