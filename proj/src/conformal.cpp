#include "firecast/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

namespace {

constexpr std::uint64_t kUniformStream = 0x55;
constexpr std::uint64_t kSplitStream = 0x5a;
constexpr std::uint64_t kBootstrapStream = 0x1000;
constexpr std::uint64_t kTrainerStream = 0x2000;

void check_probability(std::span<const double> p, std::size_t c) {
    if (c >= p.size()) throw std::domain_error(fmt::format("label {} outside {} classes", c, p.size()));
}

void check_alphas(const std::vector<double>& alphas) {
    if (alphas.empty()) throw std::domain_error("no alpha levels requested");
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw std::domain_error(fmt::format("alpha {} outside (0, 1)", a));
    }
}

void check_labeled(const LabeledData& data, const std::string& what) {
    if (static_cast<std::size_t>(data.features.rows()) != data.labels.size()) {
        throw std::domain_error(fmt::format("{}: {} feature rows for {} labels", what, data.features.rows(),
                                            data.labels.size()));
    }
    for (int y : data.labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= data.num_classes) {
            throw std::domain_error(fmt::format("{}: label {} outside 0..{}", what, y, data.num_classes - 1));
        }
    }
}

void check_not_degenerate(const LabeledData& train) {
    if (train.labels.empty()) throw std::domain_error("empty training set");
    const int first = train.labels.front();
    if (std::all_of(train.labels.begin(), train.labels.end(), [first](int y) { return y == first; })) {
        throw std::domain_error(
            fmt::format("training labels all equal {}; cannot calibrate a classifier", first + 1));
    }
}

Eigen::VectorXd renormalized(Eigen::VectorXd p) {
    const double total = p.sum();
    if (total > 0.0) p /= total;
    return p;
}

LabeledData subset(const LabeledData& data, std::span<const std::size_t> rows) {
    LabeledData out;
    out.num_classes = data.num_classes;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(data.labels[rows[i]]);
    }
    return out;
}

std::span<const double> row_values(const Eigen::MatrixXd& m, Eigen::Index i, std::vector<double>& buffer) {
    buffer.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) buffer[static_cast<std::size_t>(c)] = m(i, c);
    return buffer;
}

/// Sets for every test point and alpha, sliding the store every `batch` points
/// when requested.
void fill_sets(ConformalRun& run, const Eigen::MatrixXd& probs, const LabeledData& test,
               std::span<const double> test_u, CalibrationStore store, const ConformalConfig& config,
               bool slide) {
    const std::size_t m = test.size();
    run.alphas = config.alphas;
    run.truths = test.labels;
    run.test_probabilities = probs;
    run.sets.assign(config.alphas.size(), std::vector<PredictionSet>(m));
    std::vector<double> p;
    std::vector<double> batch;
    for (std::size_t i = 0; i < m; ++i) {
        const auto pi = row_values(probs, static_cast<Eigen::Index>(i), p);
        for (std::size_t a = 0; a < config.alphas.size(); ++a) {
            run.sets[a][i] = build_set(pi, store, config.alphas[a], test_u[i], config.score);
        }
        if (!slide) continue;
        // Label i is revealed once its batch of sets has been issued.
        batch.push_back(nonconformity(pi, static_cast<std::size_t>(test.labels[i]), test_u[i], config.score));
        if (batch.size() == config.batch_size) {
            store.slide(batch);
            batch.clear();
        }
    }
}

}  // namespace

std::vector<double> randomizers(std::uint64_t seed, std::size_t n) {
    Rng rng(derive_seed(seed, kUniformStream));
    std::vector<double> u(n);
    for (auto& v : u) v = rng.uniform();
    return u;
}

double mass_above(std::span<const double> p, std::size_t c) {
    check_probability(p, c);
    double total = 0.0;
    for (double q : p) {
        if (q > p[c]) total += q;
    }
    return total;
}

std::size_t rank_of(std::span<const double> p, std::size_t c) {
    check_probability(p, c);
    return 1 + static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [&](double q) { return q > p[c]; }));
}

double nonconformity(std::span<const double> p, std::size_t c, double u, const ScoreParams& sp) {
    const double excess = static_cast<double>(rank_of(p, c)) - static_cast<double>(sp.k_reg);
    return mass_above(p, c) + p[c] * u + sp.lambda_reg * std::max(excess, 0.0);
}

CalibrationStore::CalibrationStore(std::vector<double> scores) : window_(std::move(scores)) {
    sorted_ = window_;
    std::sort(sorted_.begin(), sorted_.end());
}

void CalibrationStore::slide(std::span<const double> newest) {
    if (newest.empty()) return;
    const std::size_t n = window_.size();
    const std::size_t drop = std::min(n, newest.size());
    window_.erase(window_.begin(), window_.begin() + static_cast<std::ptrdiff_t>(drop));
    window_.insert(window_.end(), newest.end() - static_cast<std::ptrdiff_t>(drop), newest.end());
    sorted_ = window_;
    std::sort(sorted_.begin(), sorted_.end());
}

double CalibrationStore::fraction_at_most(double x) const {
    if (sorted_.empty()) throw std::logic_error("calibration store is empty");
    const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

double CalibrationStore::quantile(double alpha) const {
    if (sorted_.empty()) throw std::logic_error("calibration store is empty");
    const double n = static_cast<double>(sorted_.size());
    const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * (n + 1.0) - 1e-12));
    if (rank > sorted_.size()) return std::numeric_limits<double>::infinity();
    return sorted_[std::max<std::size_t>(rank, 1) - 1];
}

bool PredictionSet::contains(std::size_t c) const {
    return std::binary_search(labels.begin(), labels.end(), c);
}

PredictionSet build_set(std::span<const double> p, const CalibrationStore& store, double alpha, double u,
                        const ScoreParams& sp) {
    if (store.empty()) throw std::logic_error("calibration store is empty");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error(fmt::format("alpha {} outside (0, 1)", alpha));
    PredictionSet set;
    set.quantile = store.quantile(alpha);
    set.scores.reserve(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
        const double s = nonconformity(p, c, u, sp);
        set.scores.push_back(s);
        if (store.fraction_at_most(s) < 1.0 - alpha) set.labels.push_back(c);
    }
    return set;
}

ConformalRun eraps(const LabeledData& train, const LabeledData& test, const ConformalConfig& config,
                   const Trainer& trainer) {
    if (config.bootstrap_models < 2) throw std::domain_error("ERAPS needs at least two bootstrap models");
    std::vector<std::vector<std::size_t>> samples(config.bootstrap_models);
    const std::size_t n = train.size();
    for (std::size_t b = 0; b < samples.size(); ++b) {
        Rng rng(derive_seed(config.seed, kBootstrapStream + b));
        samples[b].resize(n);
        for (auto& idx : samples[b]) idx = static_cast<std::size_t>(rng.below(n));
    }
    return eraps_with_samples(train, test, samples, config, trainer);
}

ConformalRun eraps_with_samples(const LabeledData& train, const LabeledData& test,
                                const std::vector<std::vector<std::size_t>>& samples,
                                const ConformalConfig& config, const Trainer& trainer) {
    check_labeled(train, "training data");
    check_labeled(test, "test data");
    check_alphas(config.alphas);
    const std::size_t n = train.size();
    const std::size_t b_count = samples.size();
    if (b_count < 2) throw std::domain_error("ERAPS needs at least two bootstrap models");
    if (n < 10) throw std::domain_error(fmt::format("ERAPS needs at least 10 training points, got {}", n));
    if (config.batch_size < 1 || (test.size() > 0 && config.batch_size > test.size())) {
        throw std::domain_error(fmt::format("batch size {} outside 1..{}", config.batch_size, test.size()));
    }
    if (test.num_classes != train.num_classes || test.features.cols() != train.features.cols()) {
        throw std::domain_error("training and test data disagree on classes or feature count");
    }
    check_not_degenerate(train);

    // Train bootstrap models; each task only touches its own slot.
    std::vector<std::shared_ptr<const ProbabilityModel>> models(b_count);
    auto train_one = [&](std::size_t b) {
        const LabeledData boot = subset(train, samples[b]);
        models[b] = trainer(boot.features, boot.labels, train.num_classes,
                            derive_seed(config.seed, kTrainerStream + b));
    };
    if (config.parallel) {
        std::vector<std::future<void>> jobs;
        for (std::size_t b = 0; b < b_count; ++b) jobs.push_back(std::async(std::launch::async, train_one, b));
        for (auto& j : jobs) j.get();
    } else {
        for (std::size_t b = 0; b < b_count; ++b) train_one(b);
    }

    std::vector<std::vector<char>> in_sample(b_count, std::vector<char>(n, 0));
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t idx : samples[b]) {
            if (idx >= n) throw std::domain_error(fmt::format("bootstrap index {} out of range", idx));
            in_sample[b][idx] = 1;
        }
    }

    ConformalRun run;
    run.method = "eraps";
    const auto c = static_cast<Eigen::Index>(train.num_classes);
    std::vector<Eigen::MatrixXd> train_probs(b_count), test_probs(b_count);
    for (std::size_t b = 0; b < b_count; ++b) {
        train_probs[b] = models[b]->predict_batch(train.features);
        if (test.size() > 0) test_probs[b] = models[b]->predict_batch(test.features);
    }

    // Leave-one-out aggregates and calibration scores. Each training point's
    // aggregate weights the models that left it out equally; the test
    // aggregate is the mean of those per-point aggregates, i.e. a fixed
    // mixture of the models.
    const std::vector<double> u = randomizers(config.seed, n + test.size());
    Eigen::VectorXd model_weight = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b_count));
    std::vector<double> scores(n);
    std::vector<double> p(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t outside = 0;
        for (std::size_t b = 0; b < b_count; ++b) outside += in_sample[b][i] == 0;
        const bool fallback = outside == 0;
        if (fallback) ++run.loo_fallbacks;
        Eigen::VectorXd agg = Eigen::VectorXd::Zero(c);
        for (std::size_t b = 0; b < b_count; ++b) {
            if (!fallback && in_sample[b][i]) continue;
            const double w = 1.0 / static_cast<double>(fallback ? b_count : outside);
            agg += w * train_probs[b].row(static_cast<Eigen::Index>(i)).transpose();
            model_weight[static_cast<Eigen::Index>(b)] += w / static_cast<double>(n);
        }
        agg = renormalized(agg);
        for (Eigen::Index k = 0; k < c; ++k) p[static_cast<std::size_t>(k)] = agg[k];
        scores[i] = nonconformity(p, static_cast<std::size_t>(train.labels[i]), u[i], config.score);
    }
    if (run.loo_fallbacks > 0) {
        run.warnings.push_back(fmt::format(
            "{} training points appear in every bootstrap sample; their scores use the full ensemble",
            run.loo_fallbacks));
    }

    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(test.size()), c);
    for (std::size_t b = 0; b < b_count && test.size() > 0; ++b) {
        probs += model_weight[static_cast<Eigen::Index>(b)] * test_probs[b];
    }
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double total = probs.row(i).sum();
        if (total > 0.0) probs.row(i) /= total;
    }
    fill_sets(run, probs, test, std::span<const double>(u).subspan(n), CalibrationStore(std::move(scores)),
              config, true);
    return run;
}

ConformalRun sraps(const LabeledData& train, const LabeledData& test, const ConformalConfig& config,
                   const Trainer& trainer) {
    check_labeled(train, "training data");
    if (!(config.split_fraction > 0.0 && config.split_fraction < 1.0)) {
        throw std::domain_error(fmt::format("split fraction {} outside (0, 1)", config.split_fraction));
    }
    const std::size_t n = train.size();
    if (n < 2) throw std::domain_error("SRAPS needs at least two training points");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, kSplitStream));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    auto proper_n = static_cast<std::size_t>(std::floor(config.split_fraction * static_cast<double>(n)));
    proper_n = std::clamp<std::size_t>(proper_n, 1, n - 1);
    std::vector<std::size_t> proper_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(proper_n));
    std::vector<std::size_t> cal_rows(order.begin() + static_cast<std::ptrdiff_t>(proper_n), order.end());
    std::sort(proper_rows.begin(), proper_rows.end());
    std::sort(cal_rows.begin(), cal_rows.end());
    return sraps_with_split(subset(train, proper_rows), subset(train, cal_rows), test, config, trainer);
}

ConformalRun sraps_with_split(const LabeledData& proper, const LabeledData& calibration,
                              const LabeledData& test, const ConformalConfig& config, const Trainer& trainer) {
    check_labeled(proper, "proper training data");
    check_labeled(calibration, "calibration data");
    check_labeled(test, "test data");
    check_alphas(config.alphas);
    check_not_degenerate(proper);
    if (calibration.size() == 0) throw std::domain_error("empty calibration split");

    const auto model = trainer(proper.features, proper.labels, proper.num_classes,
                               derive_seed(config.seed, kTrainerStream));
    const std::size_t n = calibration.size();
    const std::vector<double> u = randomizers(config.seed, n + test.size());
    const Eigen::MatrixXd cal_probs = model->predict_batch(calibration.features);
    std::vector<double> scores(n);
    std::vector<double> p;
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = nonconformity(row_values(cal_probs, static_cast<Eigen::Index>(i), p),
                                  static_cast<std::size_t>(calibration.labels[i]), u[i], config.score);
    }
    ConformalRun run;
    run.method = "sraps";
    Eigen::MatrixXd probs = test.size() > 0 ? model->predict_batch(test.features)
                                            : Eigen::MatrixXd(0, static_cast<Eigen::Index>(proper.num_classes));
    fill_sets(run, probs, test, std::span<const double>(u).subspan(n), CalibrationStore(std::move(scores)),
              config, false);
    return run;
}

CoverageRow coverage_of(const std::vector<PredictionSet>& sets, std::span<const int> truths, double alpha) {
    if (sets.size() != truths.size()) {
        throw std::domain_error(fmt::format("{} sets for {} truths", sets.size(), truths.size()));
    }
    CoverageRow row;
    row.alpha = alpha;
    if (sets.empty()) return row;
    std::size_t hits = 0, total_size = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        hits += sets[i].contains(static_cast<std::size_t>(truths[i]));
        total_size += sets[i].labels.size();
    }
    row.coverage = static_cast<double>(hits) / static_cast<double>(sets.size());
    row.mean_size = static_cast<double>(total_size) / static_cast<double>(sets.size());
    return row;
}

std::vector<CoverageRow> coverage_report(const ConformalRun& run) {
    std::vector<CoverageRow> out;
    for (std::size_t a = 0; a < run.alphas.size(); ++a) out.push_back(coverage_of(run.sets[a], run.truths, run.alphas[a]));
    return out;
}

std::vector<std::size_t> oracle_set(std::span<const double> p, double alpha) {
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    std::vector<std::size_t> out;
    double mass = 0.0;
    for (std::size_t c : order) {
        out.push_back(c);
        mass += p[c];
        if (mass >= 1.0 - alpha - 1e-12) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

SyntheticClassification gaussian_classes(std::size_t n, std::size_t num_classes, double radius, Rng& rng) {
    if (num_classes < 2) throw std::domain_error("need at least two classes");
    SyntheticClassification out;
    out.data.num_classes = num_classes;
    out.data.features.resize(static_cast<Eigen::Index>(n), 2);
    out.data.labels.resize(n);
    out.true_probabilities.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(num_classes));
    Eigen::MatrixXd means(static_cast<Eigen::Index>(num_classes), 2);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
        means(static_cast<Eigen::Index>(c), 0) = radius * std::cos(angle);
        means(static_cast<Eigen::Index>(c), 1) = radius * std::sin(angle);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const auto y = static_cast<std::size_t>(rng.below(num_classes));
        out.data.labels[i] = static_cast<int>(y);
        const double x0 = means(static_cast<Eigen::Index>(y), 0) + rng.normal();
        const double x1 = means(static_cast<Eigen::Index>(y), 1) + rng.normal();
        out.data.features(row, 0) = x0;
        out.data.features(row, 1) = x1;
        // Equal priors and shared identity covariance: the posterior is a
        // softmax of -|x - mean_c|^2 / 2.
        Eigen::VectorXd logit(static_cast<Eigen::Index>(num_classes));
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double d0 = x0 - means(static_cast<Eigen::Index>(c), 0);
            const double d1 = x1 - means(static_cast<Eigen::Index>(c), 1);
            logit[static_cast<Eigen::Index>(c)] = -0.5 * (d0 * d0 + d1 * d1);
        }
        logit = (logit.array() - logit.maxCoeff()).exp();
        out.true_probabilities.row(row) = (logit / logit.sum()).transpose();
    }
    return out;
}

}  // namespace firecast
