#pragma once

#include "firecast/classifier.hpp"
#include "firecast/stats.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace firecast {

/// Labels are 0-based here; files use 1..C.
struct ScoreParams {
    double lambda_reg{1.0};
    int k_reg{2};
};

/// Total probability of labels strictly more likely than c.
[[nodiscard]] double mass_above(std::span<const double> p, std::size_t c);
/// 1 + number of labels strictly more likely than c.
[[nodiscard]] std::size_t rank_of(std::span<const double> p, std::size_t c);
/// mass_above + p(c) u + lambda (rank - k_reg)^+.
[[nodiscard]] double nonconformity(std::span<const double> p, std::size_t c, double u,
                                   const ScoreParams& sp);

/// Fixed-size window of calibration scores in arrival order.
class CalibrationStore {
public:
    explicit CalibrationStore(std::vector<double> scores);

    [[nodiscard]] std::size_t size() const noexcept { return window_.size(); }
    [[nodiscard]] bool empty() const noexcept { return window_.empty(); }
    [[nodiscard]] const std::vector<double>& scores() const noexcept { return window_; }

    /// Drops the oldest newest.size() scores and appends `newest`.
    void slide(std::span<const double> newest);

    /// Fraction of stored scores <= x.
    [[nodiscard]] double fraction_at_most(double x) const;
    /// The ceil((1 - alpha)(N + 1))-th smallest score, +inf past the end.
    [[nodiscard]] double quantile(double alpha) const;

private:
    std::vector<double> window_;
    std::vector<double> sorted_;
};

struct PredictionSet {
    std::vector<std::size_t> labels;  // ascending
    double quantile{0.0};             // order-statistic diagnostic
    std::vector<double> scores;       // per label

    [[nodiscard]] bool contains(std::size_t c) const;
};

/// Label c is included iff fraction_at_most(score(c)) < 1 - alpha.
[[nodiscard]] PredictionSet build_set(std::span<const double> p, const CalibrationStore& store,
                                      double alpha, double u, const ScoreParams& sp);

struct LabeledData {
    Eigen::MatrixXd features;
    std::vector<int> labels;
    std::size_t num_classes{0};

    [[nodiscard]] std::size_t size() const { return labels.size(); }
};

struct ConformalConfig {
    std::size_t bootstrap_models{20};
    std::size_t batch_size{1};
    std::vector<double> alphas{0.1};
    ScoreParams score;
    std::uint64_t seed{1};
    double split_fraction{0.5};  // SRAPS proper-training share
    bool parallel{true};
};

struct ConformalRun {
    std::string method;
    std::vector<double> alphas;
    std::vector<std::vector<PredictionSet>> sets;  // [alpha][test point]
    std::vector<int> truths;
    Eigen::MatrixXd test_probabilities;
    std::size_t loo_fallbacks{0};
    std::vector<std::string> warnings;
};

/// The U_i draws for a run: calibration points first, then test points.
[[nodiscard]] std::vector<double> randomizers(std::uint64_t seed, std::size_t n);

/// Bootstrap ensemble with leave-one-out calibration scores and a sliding
/// window that absorbs each batch of revealed test labels.
[[nodiscard]] ConformalRun eraps(const LabeledData& train, const LabeledData& test,
                                 const ConformalConfig& config, const Trainer& trainer);
/// eraps with caller-chosen bootstrap index sets.
[[nodiscard]] ConformalRun eraps_with_samples(const LabeledData& train, const LabeledData& test,
                                              const std::vector<std::vector<std::size_t>>& samples,
                                              const ConformalConfig& config, const Trainer& trainer);

/// Split conformal with the same score: one model on a random proper-training
/// share, calibration on the rest, no sliding.
[[nodiscard]] ConformalRun sraps(const LabeledData& train, const LabeledData& test,
                                 const ConformalConfig& config, const Trainer& trainer);
/// sraps with an explicit split.
[[nodiscard]] ConformalRun sraps_with_split(const LabeledData& proper, const LabeledData& calibration,
                                            const LabeledData& test, const ConformalConfig& config,
                                            const Trainer& trainer);

struct CoverageRow {
    double alpha{0.0};
    double coverage{0.0};
    double mean_size{0.0};
};

[[nodiscard]] CoverageRow coverage_of(const std::vector<PredictionSet>& sets,
                                      std::span<const int> truths, double alpha);
[[nodiscard]] std::vector<CoverageRow> coverage_report(const ConformalRun& run);

/// Smallest set of most likely labels whose probability reaches 1 - alpha.
[[nodiscard]] std::vector<std::size_t> oracle_set(std::span<const double> p, double alpha);

/// Classes drawn uniformly, features N(mean_c, I) in two dimensions with the
/// means on a circle of the given radius. `true_probabilities` holds the exact
/// posterior for each row.
struct SyntheticClassification {
    LabeledData data;
    Eigen::MatrixXd true_probabilities;
};
[[nodiscard]] SyntheticClassification gaussian_classes(std::size_t n, std::size_t num_classes,
                                                       double radius, Rng& rng);

}  // namespace firecast
