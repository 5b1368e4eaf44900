#include "firecast/marks.hpp"

#include "firecast/io.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

ConstantScorer::ConstantScorer(double value) : value_(value) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument("constant mark score must be finite and nonnegative");
    }
}

void PrecomputedScorer::add(double time, std::size_t location, double value) {
    if (!(value >= 0.0)) {
        throw std::invalid_argument(fmt::format("negative precomputed score at t={}", time));
    }
    table_[{time, location}] = value;
}

double PrecomputedScorer::score(std::span<const double>, double time, std::size_t location) const {
    auto it = table_.find({time, location});
    if (it == table_.end()) {
        throw std::out_of_range(
            fmt::format("no precomputed score for time {} at location {}", time, location));
    }
    return it->second;
}

PrecomputedScorer PrecomputedScorer::from_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const std::size_t t_col = table.column("time");
    const std::size_t k_col = table.column("location");
    const std::size_t s_col = table.column("score");
    PrecomputedScorer scorer;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        scorer.add(parse_double(row.at(t_col), line),
                   static_cast<std::size_t>(parse_index(row.at(k_col), line)),
                   parse_double(row.at(s_col), line));
    }
    return scorer;
}

KernelDensityScorer::KernelDensityScorer(std::vector<std::vector<double>> training_marks)
    : samples_(std::move(training_marks)) {
    if (samples_.empty()) {
        throw std::invalid_argument("kernel density scorer needs at least one sample");
    }
    const std::size_t dim = samples_.front().size();
    const auto n = static_cast<double>(samples_.size());
    for (const auto& s : samples_) {
        if (s.size() != dim) throw std::invalid_argument("ragged training marks");
    }
    bandwidth_.assign(dim, 0.0);
    const double scott = std::pow(n, -1.0 / (static_cast<double>(dim) + 4.0));
    normalizer_ = 1.0 / n;
    for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (const auto& s : samples_) mean += s[d];
        mean /= n;
        double var = 0.0;
        for (const auto& s : samples_) var += (s[d] - mean) * (s[d] - mean);
        var = samples_.size() > 1 ? var / (n - 1.0) : 0.0;
        // Degenerate columns would give a point mass.
        bandwidth_[d] = std::max(std::sqrt(var) * scott, 1e-3);
        normalizer_ /= bandwidth_[d] * std::sqrt(2.0 * std::numbers::pi);
    }
}

double KernelDensityScorer::score(std::span<const double> marks, double, std::size_t) const {
    if (marks.size() != bandwidth_.size()) {
        throw std::domain_error("mark length does not match the density scorer");
    }
    double total = 0.0;
    for (const auto& s : samples_) {
        double exponent = 0.0;
        for (std::size_t d = 0; d < marks.size(); ++d) {
            const double z = (marks[d] - s[d]) / bandwidth_[d];
            exponent += z * z;
        }
        total += std::exp(-0.5 * exponent);
    }
    return total * normalizer_;
}

MarkModel MarkModel::linear() { return MarkModel{}; }

MarkModel MarkModel::nonlinear(std::shared_ptr<const MarkScorer> scorer) {
    if (!scorer) throw std::invalid_argument("nonlinear mark model needs a scorer");
    MarkModel model;
    model.scorer_ = std::move(scorer);
    return model;
}

double MarkModel::score(const ModelParams& params, std::span<const double> marks, double time,
                        std::size_t location) const {
    if (scorer_) return scorer_->score(marks, time, location);
    if (marks.size() != params.mark_dim()) {
        throw std::domain_error(fmt::format("mark vector has length {}, expected {}", marks.size(),
                                            params.mark_dim()));
    }
    double s = 0.0;
    for (std::size_t d = 0; d < marks.size(); ++d) s += params.gamma[static_cast<Eigen::Index>(d)] * marks[d];
    return s;
}

Eigen::VectorXd MarkModel::event_scores(const ModelParams& params, const EventSequence& seq) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(seq.size()));
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& e = seq[i];
        out[static_cast<Eigen::Index>(i)] = score(params, e.marks, e.time, e.location);
    }
    return out;
}

}  // namespace firecast
