#include "firecast/classifier.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

namespace {

void check_training_set(const Eigen::MatrixXd& features, std::span<const int> labels,
                        std::size_t num_classes) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw std::domain_error(fmt::format("{} feature rows for {} labels", features.rows(), labels.size()));
    }
    if (labels.empty()) throw std::domain_error("empty training set");
    if (num_classes < 2) throw std::domain_error("need at least two classes");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw std::domain_error(fmt::format("label {} outside 0..{}", y, num_classes - 1));
        }
    }
}

void softmax_rows(Eigen::MatrixXd& logits) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double top = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - top).exp().matrix();
        logits.row(i) /= logits.row(i).sum();
    }
}

}  // namespace

Eigen::MatrixXd ProbabilityModel::predict_batch(const Eigen::MatrixXd& features) const {
    Eigen::MatrixXd out;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const Eigen::VectorXd p = predict(features.row(i).transpose());
        if (i == 0) out.resize(features.rows(), p.size());
        out.row(i) = p.transpose();
    }
    return out;
}

std::shared_ptr<const LogisticRegression> LogisticRegression::fit(const Eigen::MatrixXd& features,
                                                                  std::span<const int> labels,
                                                                  std::size_t num_classes,
                                                                  const LogisticOptions& options) {
    check_training_set(features, labels, num_classes);
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    const auto c = static_cast<Eigen::Index>(num_classes);

    auto model = std::make_shared<LogisticRegression>();
    model->mean_ = features.colwise().mean().transpose();
    model->scale_ = ((features.rowwise() - model->mean_.transpose()).array().square().colwise().mean())
                        .sqrt()
                        .transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(model->scale_[j] > 0.0)) model->scale_[j] = 1.0;
    }

    Eigen::MatrixXd design(n, d + 1);
    design.leftCols(d) =
        (features.rowwise() - model->mean_.transpose()).array().rowwise() / model->scale_.transpose().array();
    design.col(d).setOnes();
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, c);
    for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

    model->weights_ = Eigen::MatrixXd::Zero(d + 1, c);
    Eigen::MatrixXd penalty_mask = Eigen::MatrixXd::Ones(d + 1, c);
    penalty_mask.row(d).setZero();
    for (int it = 0; it < options.iterations; ++it) {
        Eigen::MatrixXd probs = design * model->weights_;
        softmax_rows(probs);
        const Eigen::MatrixXd grad = design.transpose() * (probs - onehot) / static_cast<double>(n) +
                                     options.l2 * model->weights_.cwiseProduct(penalty_mask);
        model->weights_ -= options.learning_rate * grad;
    }
    return model;
}

Eigen::MatrixXd LogisticRegression::predict_batch(const Eigen::MatrixXd& features) const {
    const Eigen::Index d = mean_.size();
    if (features.cols() != d) {
        throw std::domain_error(fmt::format("model expects {} features, got {}", d, features.cols()));
    }
    Eigen::MatrixXd design(features.rows(), d + 1);
    design.leftCols(d) = (features.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
    design.col(d).setOnes();
    Eigen::MatrixXd probs = design * weights_;
    softmax_rows(probs);
    return probs;
}

Eigen::VectorXd LogisticRegression::predict(const Eigen::VectorXd& x) const {
    return predict_batch(x.transpose()).row(0).transpose();
}

Trainer logistic_trainer(LogisticOptions options) {
    return [options](const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t num_classes,
                     std::uint64_t) -> std::shared_ptr<const ProbabilityModel> {
        return LogisticRegression::fit(features, labels, num_classes, options);
    };
}

Trainer frequency_trainer() {
    return [](const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t num_classes,
              std::uint64_t) -> std::shared_ptr<const ProbabilityModel> {
        check_training_set(features, labels, num_classes);
        Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes));
        for (int y : labels) p[y] += 1.0;
        return std::make_shared<ConstantModel>(p / p.sum());
    };
}

}  // namespace firecast
