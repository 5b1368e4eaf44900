#pragma once

#include "firecast/model.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace firecast {

/// Nonlinear mark score g(m | t, k). Implementations must be deterministic
/// once constructed and return a nonnegative value.
class MarkScorer {
public:
    virtual ~MarkScorer() = default;
    [[nodiscard]] virtual double score(std::span<const double> marks, double time,
                                       std::size_t location) const = 0;
};

class ConstantScorer final : public MarkScorer {
public:
    explicit ConstantScorer(double value);
    [[nodiscard]] double score(std::span<const double>, double, std::size_t) const override {
        return value_;
    }

private:
    double value_;
};

/// Scores looked up by exact (time, location). Unknown keys throw
/// std::out_of_range.
class PrecomputedScorer final : public MarkScorer {
public:
    PrecomputedScorer() = default;
    void add(double time, std::size_t location, double value);
    [[nodiscard]] double score(std::span<const double> marks, double time,
                               std::size_t location) const override;
    [[nodiscard]] std::size_t size() const noexcept { return table_.size(); }

    /// Reads `time,location,score` rows.
    static PrecomputedScorer from_csv(const std::string& path);

private:
    std::map<std::pair<double, std::size_t>, double> table_;
};

/// Product Gaussian kernel density over mark vectors with Scott's-rule
/// bandwidth h_d = sigma_d * n^(-1/(p+4)).
class KernelDensityScorer final : public MarkScorer {
public:
    explicit KernelDensityScorer(std::vector<std::vector<double>> training_marks);
    [[nodiscard]] double score(std::span<const double> marks, double time,
                               std::size_t location) const override;
    [[nodiscard]] const std::vector<double>& bandwidth() const noexcept { return bandwidth_; }

private:
    std::vector<std::vector<double>> samples_;
    std::vector<double> bandwidth_;
    double normalizer_{1.0};
};

/// Either the linear score gamma^T m (gamma taken from ModelParams) or a
/// fitted nonlinear scorer.
class MarkModel {
public:
    static MarkModel linear();
    static MarkModel nonlinear(std::shared_ptr<const MarkScorer> scorer);

    [[nodiscard]] bool is_linear() const noexcept { return scorer_ == nullptr; }
    [[nodiscard]] const MarkScorer* scorer() const noexcept { return scorer_.get(); }

    /// Unclamped score; throws std::domain_error on a mark-length mismatch.
    [[nodiscard]] double score(const ModelParams& params, std::span<const double> marks,
                               double time, std::size_t location) const;

    /// Unclamped scores of every event in seq.
    [[nodiscard]] Eigen::VectorXd event_scores(const ModelParams& params,
                                               const EventSequence& seq) const;

private:
    std::shared_ptr<const MarkScorer> scorer_;
};

}  // namespace firecast
