#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>

namespace firecast {

/// A fitted map from a feature row to class probabilities (0-based labels).
class ProbabilityModel {
public:
    virtual ~ProbabilityModel() = default;
    [[nodiscard]] virtual Eigen::VectorXd predict(const Eigen::VectorXd& x) const = 0;
    /// Row i of the result is predict(features.row(i)).
    [[nodiscard]] virtual Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& features) const;
};

/// Plug-in point for classifiers: trains on (features, labels) and must be
/// deterministic given its arguments.
using Trainer = std::function<std::shared_ptr<const ProbabilityModel>(
    const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t num_classes,
    std::uint64_t seed)>;

struct LogisticOptions {
    int iterations{300};
    double learning_rate{0.5};
    double l2{1e-3};
};

/// Multinomial logistic regression fitted by full-batch gradient descent on
/// internally standardized features.
class LogisticRegression final : public ProbabilityModel {
public:
    static std::shared_ptr<const LogisticRegression> fit(const Eigen::MatrixXd& features,
                                                         std::span<const int> labels,
                                                         std::size_t num_classes,
                                                         const LogisticOptions& options = {});

    [[nodiscard]] Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
    [[nodiscard]] Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& features) const override;

    [[nodiscard]] const Eigen::MatrixXd& weights() const noexcept { return weights_; }

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd scale_;
    Eigen::MatrixXd weights_;  // (d + 1) x C, last row is the intercept
};

[[nodiscard]] Trainer logistic_trainer(LogisticOptions options = {});

/// Returns the same probability vector for every input.
class ConstantModel final : public ProbabilityModel {
public:
    explicit ConstantModel(Eigen::VectorXd probabilities) : p_(std::move(probabilities)) {}
    [[nodiscard]] Eigen::VectorXd predict(const Eigen::VectorXd&) const override { return p_; }

private:
    Eigen::VectorXd p_;
};

/// Trainer whose model predicts the training label frequencies.
[[nodiscard]] Trainer frequency_trainer();

}  // namespace firecast
