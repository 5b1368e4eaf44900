#include "firecast/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace firecast {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    for (auto& f : out) {
        const auto first = f.find_first_not_of(" \t");
        const auto last = f.find_last_not_of(" \t");
        f = first == std::string::npos ? std::string{} : f.substr(first, last - first + 1);
    }
    return out;
}

}  // namespace

std::optional<std::size_t> CsvTable::find_column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto c = find_column(name);
    if (!c) throw ParseError(fmt::format("missing CSV column '{}'", name));
    return *c;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (!have_header) {
            // Tolerate a UTF-8 byte-order mark.
            if (fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ParseError(fmt::format("{}:{}: expected {} fields, found {}", source, line_no,
                                         table.header.size(), fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw ParseError(fmt::format("{}: empty CSV", source));
    return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

bool is_missing(const std::string& field) {
    return field.empty() || field == "NA" || field == "nan" || field == "NaN";
}

double parse_double(const std::string& field, std::size_t line) {
    double v = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || field.empty()) {
        throw ParseError(fmt::format("line {}: cannot parse '{}' as a number", line, field));
    }
    return v;
}

long long parse_index(const std::string& field, std::size_t line) {
    long long v = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || field.empty() || v < 0) {
        throw ParseError(fmt::format("line {}: cannot parse '{}' as an index", line, field));
    }
    return v;
}

std::string format_double(double v) { return fmt::format("{}", v); }

std::string events_csv(const EventSequence& seq) {
    const bool labelled = std::any_of(seq.events().begin(), seq.events().end(),
                                      [](const EventRecord& e) { return e.magnitude.has_value(); });
    std::string out = "time,location";
    for (std::size_t d = 0; d < seq.mark_dim(); ++d) out += fmt::format(",m_{}", d);
    if (labelled) out += ",magnitude";
    out += '\n';
    for (const auto& e : seq.events()) {
        out += format_double(e.time);
        out += fmt::format(",{}", e.location);
        for (double m : e.marks) out += "," + format_double(m);
        if (labelled) out += e.magnitude ? fmt::format(",{}", *e.magnitude) : std::string(",");
        out += '\n';
    }
    return out;
}

void write_events_csv(const std::string& path, const EventSequence& seq) { write_text(path, events_csv(seq)); }

EventSequence read_events_csv(const std::string& path, std::optional<double> horizon,
                              std::optional<std::size_t> num_locations) {
    const CsvTable table = read_csv(path);
    const std::size_t t_col = table.column("time");
    const std::size_t k_col = table.column("location");
    std::vector<std::size_t> mark_cols;
    for (std::size_t d = 0;; ++d) {
        const auto c = table.find_column(fmt::format("m_{}", d));
        if (!c) break;
        mark_cols.push_back(*c);
    }
    const auto mag_col = table.find_column("magnitude");
    std::vector<EventRecord> events;
    double last_time = 0.0;
    std::size_t max_location = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        EventRecord e;
        e.time = parse_double(row[t_col], line);
        e.location = static_cast<std::size_t>(parse_index(row[k_col], line));
        for (std::size_t c : mark_cols) e.marks.push_back(parse_double(row[c], line));
        if (mag_col && !is_missing(row[*mag_col])) {
            e.magnitude = static_cast<int>(parse_index(row[*mag_col], line));
        }
        last_time = std::max(last_time, e.time);
        max_location = std::max(max_location, e.location);
        events.push_back(std::move(e));
    }
    const double t = horizon.value_or(std::max(1.0, std::ceil(last_time)));
    const std::size_t k = num_locations.value_or(events.empty() ? 1 : max_location + 1);
    return EventSequence(std::move(events), t, k, mark_cols.size());
}

nlohmann::json params_to_json(const ModelParams& params) {
    params.check_shapes();
    nlohmann::json j;
    j["mu"] = std::vector<double>(params.mu.data(), params.mu.data() + params.mu.size());
    nlohmann::json alpha = nlohmann::json::array();
    nlohmann::json mask = nlohmann::json::array();
    for (Eigen::Index r = 0; r < params.alpha.rows(); ++r) {
        nlohmann::json arow = nlohmann::json::array();
        nlohmann::json mrow = nlohmann::json::array();
        for (Eigen::Index c = 0; c < params.alpha.cols(); ++c) {
            arow.push_back(params.alpha(r, c));
            mrow.push_back(static_cast<bool>(params.mask(r, c)));
        }
        alpha.push_back(std::move(arow));
        mask.push_back(std::move(mrow));
    }
    j["alpha"] = std::move(alpha);
    j["beta"] = params.beta;
    j["gamma"] = std::vector<double>(params.gamma.data(), params.gamma.data() + params.gamma.size());
    j["mask"] = std::move(mask);
    return j;
}

ModelParams params_from_json(const nlohmann::json& j) {
    try {
        ModelParams p;
        const auto mu = j.at("mu").get<std::vector<double>>();
        const auto gamma = j.at("gamma").get<std::vector<double>>();
        const auto alpha = j.at("alpha").get<std::vector<std::vector<double>>>();
        const auto k = static_cast<Eigen::Index>(mu.size());
        p.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), k);
        p.gamma = Eigen::Map<const Eigen::VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
        p.beta = j.at("beta").get<double>();
        if (static_cast<Eigen::Index>(alpha.size()) != k) throw ParseError("alpha row count");
        p.alpha.resize(k, k);
        for (Eigen::Index r = 0; r < k; ++r) {
            const auto& row = alpha[static_cast<std::size_t>(r)];
            if (static_cast<Eigen::Index>(row.size()) != k) throw ParseError("alpha column count");
            for (Eigen::Index c = 0; c < k; ++c) p.alpha(r, c) = row[static_cast<std::size_t>(c)];
        }
        p.mask = MaskMatrix::Constant(k, k, true);
        if (j.contains("mask")) {
            const auto mask = j.at("mask").get<std::vector<std::vector<bool>>>();
            if (static_cast<Eigen::Index>(mask.size()) != k) throw ParseError("mask row count");
            for (Eigen::Index r = 0; r < k; ++r) {
                const auto& row = mask[static_cast<std::size_t>(r)];
                if (static_cast<Eigen::Index>(row.size()) != k) throw ParseError("mask column count");
                for (Eigen::Index c = 0; c < k; ++c) p.mask(r, c) = row[static_cast<std::size_t>(c)];
            }
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("invalid params JSON: {}", e.what()));
    }
}

void save_params(const std::string& path, const ModelParams& params) {
    write_text(path, params_to_json(params).dump(2) + "\n");
}

ModelParams load_params(const std::string& path) { return params_from_json(read_json(path)); }

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
}

void write_text(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", path));
    out << text;
    if (!out) throw std::runtime_error(fmt::format("write failed for {}", path));
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace firecast
