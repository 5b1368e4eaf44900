#include "firecast/model.hpp"

#include "firecast/marks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

void require_no_nan(const ModelParams& params) {
    if (params.has_nan()) throw std::domain_error("model parameters contain NaN");
}

}  // namespace

EventSequence::EventSequence(std::vector<EventRecord> events, double horizon,
                             std::size_t num_locations, std::size_t mark_dim)
    : events_(std::move(events)),
      horizon_(horizon),
      num_locations_(num_locations),
      mark_dim_(mark_dim) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::domain_error(fmt::format("horizon must be positive, got {}", horizon));
    }
    if (num_locations == 0) throw std::domain_error("need at least one location");
    std::stable_sort(events_.begin(), events_.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.time < b.time; });
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const auto& e = events_[i];
        if (!(e.time >= 0.0 && e.time <= horizon)) {
            throw std::domain_error(
                fmt::format("event {} has time {} outside [0, {}]", i, e.time, horizon));
        }
        if (e.location >= num_locations) {
            throw std::domain_error(fmt::format("event {} has location {} >= {}", i, e.location,
                                                num_locations));
        }
        if (e.marks.size() != mark_dim) {
            throw std::domain_error(fmt::format("event {} has {} marks, expected {}", i,
                                                e.marks.size(), mark_dim));
        }
        for (double m : e.marks) {
            if (!(m >= 0.0 && m <= 1.0)) {
                throw std::domain_error(fmt::format("event {} has mark {} outside [0, 1]", i, m));
            }
        }
    }
}

EventSequence EventSequence::truncated(double cutoff, double new_horizon) const {
    std::vector<EventRecord> kept;
    for (const auto& e : events_) {
        if (e.time < cutoff) kept.push_back(e);
    }
    return EventSequence(std::move(kept), new_horizon, num_locations_, mark_dim_);
}

ModelParams ModelParams::zeros(std::size_t num_locations, std::size_t mark_dim) {
    ModelParams p;
    p.mu = Eigen::VectorXd::Zero(idx(num_locations));
    p.alpha = Eigen::MatrixXd::Zero(idx(num_locations), idx(num_locations));
    p.beta = 1.0;
    p.gamma = Eigen::VectorXd::Zero(idx(mark_dim));
    p.mask = MaskMatrix::Constant(idx(num_locations), idx(num_locations), true);
    return p;
}

void ModelParams::check_shapes() const {
    const Index k = mu.size();
    if (alpha.rows() != k || alpha.cols() != k) {
        throw std::invalid_argument(
            fmt::format("alpha is {}x{}, expected {}x{}", alpha.rows(), alpha.cols(), k, k));
    }
    if (mask.rows() != k || mask.cols() != k) {
        throw std::invalid_argument(
            fmt::format("mask is {}x{}, expected {}x{}", mask.rows(), mask.cols(), k, k));
    }
}

bool ModelParams::has_nan() const {
    return mu.hasNaN() || alpha.hasNaN() || gamma.hasNaN() || std::isnan(beta);
}

bool is_feasible(const ModelParams& params, double tol) {
    params.check_shapes();
    if (params.has_nan()) return false;
    if ((params.mu.array() < -tol).any()) return false;
    if (params.beta < -tol) return false;
    if (params.mu.norm() > 1.0 + tol) return false;
    if (params.alpha.norm() > 1.0 + tol) return false;
    if (params.gamma.norm() > 1.0 + tol) return false;
    for (Index i = 0; i < params.alpha.rows(); ++i) {
        for (Index j = 0; j < params.alpha.cols(); ++j) {
            if (!params.mask(i, j) && params.alpha(i, j) != 0.0) return false;
        }
    }
    return true;
}

void KernelConfig::validate(std::size_t mark_dim) const {
    if (!(neighbor_radius > 0.0)) throw std::invalid_argument("neighbor_radius must be positive");
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
    std::vector<int> seen(mark_dim, 0);
    for (auto group : {&static_marks, &dynamic_marks}) {
        for (std::size_t d : *group) {
            if (d >= mark_dim) {
                throw std::invalid_argument(fmt::format("mark index {} >= {}", d, mark_dim));
            }
            ++seen[d];
        }
    }
    for (std::size_t d = 0; d < mark_dim; ++d) {
        if (seen[d] != 1) {
            throw std::invalid_argument(
                fmt::format("mark {} appears {} times across static/dynamic groups", d, seen[d]));
        }
    }
}

MaskMatrix mask_from_centroids(std::span<const Centroid> centroids, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("neighbor radius must be positive");
    const Index k = idx(centroids.size());
    MaskMatrix mask(k, k);
    for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < k; ++j) {
            const auto& a = centroids[static_cast<std::size_t>(i)];
            const auto& b = centroids[static_cast<std::size_t>(j)];
            // Slack so that grid neighbours exactly one radius apart survive rounding.
            mask(i, j) = std::hypot(a.lat - b.lat, a.lon - b.lon) <= radius * (1.0 + 1e-9);
        }
    }
    return mask;
}

MaskMatrix mask_from_index_band(std::size_t num_locations, std::size_t band) {
    const Index k = idx(num_locations);
    MaskMatrix mask(k, k);
    for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < k; ++j) {
            mask(i, j) = static_cast<std::size_t>(std::abs(i - j)) < band;
        }
    }
    return mask;
}

MarkContribution split_mark_score(const Eigen::VectorXd& gamma, std::span<const double> marks,
                                  const KernelConfig& kernel) {
    kernel.validate(marks.size());
    if (static_cast<std::size_t>(gamma.size()) != marks.size()) {
        throw std::domain_error("mark length mismatch");
    }
    MarkContribution out;
    for (std::size_t d : kernel.dynamic_marks) out.dynamic_part += gamma[idx(d)] * marks[d];
    for (std::size_t d : kernel.static_marks) out.static_part += gamma[idx(d)] * marks[d];
    return out;
}

double ground_intensity(const ModelParams& params, const EventSequence& seq, double t,
                        std::size_t k) {
    if (!(t >= 0.0 && t <= seq.horizon())) {
        throw std::domain_error(fmt::format("query time {} outside [0, {}]", t, seq.horizon()));
    }
    if (k >= params.num_locations() || k >= seq.num_locations()) {
        throw std::domain_error(fmt::format("query location {} out of range", k));
    }
    require_no_nan(params);
    double rate = params.mu[idx(k)];
    if (params.beta == 0.0) return rate;
    for (const auto& e : seq.events()) {
        if (!(e.time < t)) break;
        rate += params.alpha(idx(e.location), idx(k)) * params.beta *
                std::exp(-params.beta * (t - e.time));
    }
    return rate;
}

double conditional_intensity(const ModelParams& params, const EventSequence& seq,
                             const MarkModel& marks, double t, std::size_t k,
                             std::span<const double> mark) {
    const double ground = ground_intensity(params, seq, t, k);
    const double score = marks.score(params, mark, t, k);
    return std::max(ground * score, kRateFloor);
}

double integrated_ground_intensity(const ModelParams& params, const EventSequence& seq,
                                   double t_end) {
    require_no_nan(params);
    double total = t_end * params.mu.sum();
    const Eigen::VectorXd out_strength = params.alpha.rowwise().sum();
    for (const auto& e : seq.events()) {
        if (!(e.time < t_end)) break;
        total += out_strength[idx(e.location)] * (1.0 - std::exp(-params.beta * (t_end - e.time)));
    }
    return total;
}

ExcitationFeatures ExcitationFeatures::compute(const EventSequence& seq, double beta) {
    const std::size_t n = seq.size();
    const Index k = idx(seq.num_locations());
    ExcitationFeatures f;
    f.beta = beta;
    f.history = Eigen::MatrixXd::Zero(idx(n), k);
    f.compensator_weight = Eigen::VectorXd::Zero(idx(n));
    Eigen::VectorXd decayed = Eigen::VectorXd::Zero(k);
    double last_time = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = seq[i].time;
        std::size_t group_end = i;
        while (group_end < n && seq[group_end].time == t) ++group_end;
        decayed *= std::exp(-beta * (t - last_time));
        last_time = t;
        const double weight = 1.0 - std::exp(-beta * (seq.horizon() - t));
        // Simultaneous events do not excite each other.
        for (std::size_t g = i; g < group_end; ++g) {
            f.history.row(idx(g)) = beta * decayed.transpose();
            f.compensator_weight[idx(g)] = weight;
        }
        for (std::size_t g = i; g < group_end; ++g) decayed[idx(seq[g].location)] += 1.0;
        i = group_end;
    }
    return f;
}

namespace {

void check_compatible(const ModelParams& params, const EventSequence& seq) {
    params.check_shapes();
    if (params.num_locations() != seq.num_locations()) {
        throw std::domain_error(fmt::format("params have {} locations, sequence has {}",
                                            params.num_locations(), seq.num_locations()));
    }
    require_no_nan(params);
}

}  // namespace

double sum_of_logs(const Eigen::VectorXd& values, double floor) {
    // Multiply into a mantissa and renormalize every few factors; one log at
    // the end instead of one per value.
    constexpr int kBlock = 8;
    double mantissa = 1.0;
    long long exponent = 0;
    int pending = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (std::isnan(v)) return std::numeric_limits<double>::quiet_NaN();
        if (std::isinf(v)) return std::numeric_limits<double>::infinity();
        mantissa *= std::max(v, floor);
        if (++pending == kBlock) {
            int e = 0;
            mantissa = std::frexp(mantissa, &e);
            exponent += e;
            pending = 0;
        }
    }
    return std::log(mantissa) + static_cast<double>(exponent) * std::numbers::ln2;
}

LikelihoodTerms likelihood_terms(const ModelParams& params, const EventSequence& seq,
                                 const MarkModel& marks) {
    check_compatible(params, seq);
    const FixedBetaObjective objective(seq, marks, params.beta, 0.0);
    return objective.terms(params);
}

double log_likelihood(const ModelParams& params, const EventSequence& seq, const MarkModel& marks) {
    return likelihood_terms(params, seq, marks).value();
}

double penalized_objective(const ModelParams& params, const EventSequence& seq,
                           const MarkModel& marks, double l1_weight) {
    if (!(l1_weight >= 0.0)) throw std::domain_error("l1 weight must be nonnegative");
    return -log_likelihood(params, seq, marks) + l1_weight * params.gamma.lpNorm<1>();
}

FixedBetaObjective::FixedBetaObjective(const EventSequence& seq, const MarkModel& marks,
                                       double beta, double l1_weight)
    : seq_(&seq),
      marks_(&marks),
      l1_weight_(l1_weight),
      features_(ExcitationFeatures::compute(seq, beta)) {
    if (!(l1_weight >= 0.0)) throw std::domain_error("l1 weight must be nonnegative");
    const Index n = idx(seq.size());
    const Index k = idx(seq.num_locations());
    history_ = features_.history;
    location_.resize(seq.size());
    source_weight_ = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        location_[i] = idx(seq[i].location);
        source_weight_[location_[i]] += features_.compensator_weight[idx(i)];
    }
    if (marks.is_linear()) {
        event_marks_.resize(n, idx(seq.mark_dim()));
        for (Index i = 0; i < n; ++i) {
            const auto& m = seq[static_cast<std::size_t>(i)].marks;
            for (Index d = 0; d < event_marks_.cols(); ++d) {
                event_marks_(i, d) = m[static_cast<std::size_t>(d)];
            }
        }
    } else {
        // Nonlinear scores do not depend on the parameters being fitted.
        fixed_scores_ = marks.event_scores(ModelParams{}, seq);
    }
}

Eigen::VectorXd FixedBetaObjective::scores(const ModelParams& params) const {
    if (fixed_scores_) return *fixed_scores_;
    if (params.gamma.size() != event_marks_.cols()) {
        throw std::domain_error(fmt::format("gamma has length {}, marks have dimension {}",
                                            params.gamma.size(), event_marks_.cols()));
    }
    return event_marks_ * params.gamma;
}

Eigen::VectorXd FixedBetaObjective::ground_rates(const ModelParams& params) const {
    const Index n = history_.rows();
    const Index k = history_.cols();
    // Transposed so that column u of alpha is contiguous.
    const RowMatrix alpha_t = params.alpha.transpose();
    Eigen::VectorXd rates(n);
    for (Index i = 0; i < n; ++i) {
        const Index u = location_[static_cast<std::size_t>(i)];
        const double* h = history_.data() + i * k;
        const double* a = alpha_t.data() + u * k;
        double acc = params.mu[u];
        for (Index s = 0; s < k; ++s) acc += h[s] * a[s];
        rates[i] = acc;
    }
    return rates;
}

LikelihoodTerms FixedBetaObjective::terms(const ModelParams& params, const Eigen::VectorXd& rates,
                                          const Eigen::VectorXd& event_scores) const {
    LikelihoodTerms t;
    t.log_ground = sum_of_logs(rates, kRateFloor);
    t.log_marks = sum_of_logs(event_scores, kRateFloor);
    t.excitation_compensator = params.alpha.rowwise().sum().dot(source_weight_);
    t.baseline_compensator = seq_->horizon() * params.mu.sum();
    return t;
}

LikelihoodTerms FixedBetaObjective::terms(const ModelParams& params) const {
    check_compatible(params, *seq_);
    return terms(params, ground_rates(params), scores(params));
}

double FixedBetaObjective::penalized(const ModelParams& params) const {
    return -terms(params).value() + l1_weight_ * params.gamma.lpNorm<1>();
}

ObjectiveGradient FixedBetaObjective::smooth_gradient(const ModelParams& params) const {
    return gradient_impl(params, true);
}

ObjectiveGradient FixedBetaObjective::gradient_only(const ModelParams& params) const {
    return gradient_impl(params, false);
}

ObjectiveGradient FixedBetaObjective::gradient_impl(const ModelParams& params,
                                                    bool with_value) const {
    check_compatible(params, *seq_);
    const Index k = idx(params.num_locations());
    const Index n = history_.rows();
    const Eigen::VectorXd event_scores = scores(params);
    const Eigen::VectorXd rates = ground_rates(params);

    ObjectiveGradient g;
    if (with_value) g.value = -terms(params, rates, event_scores).value();
    g.d_mu = Eigen::VectorXd::Constant(k, seq_->horizon());
    g.d_gamma = Eigen::VectorXd::Zero(params.gamma.size());

    // Row u of d_alpha_t accumulates d/d alpha(., u).
    RowMatrix d_alpha_t = RowMatrix::Zero(k, k);
    for (Index i = 0; i < n; ++i) {
        const double rate = rates[i];
        if (!(rate > kRateFloor)) continue;
        const Index u = location_[static_cast<std::size_t>(i)];
        const double inv = 1.0 / rate;
        g.d_mu[u] -= inv;
        const double* h = history_.data() + i * k;
        double* row = d_alpha_t.data() + u * k;
        for (Index s = 0; s < k; ++s) row[s] -= h[s] * inv;
    }
    g.d_alpha = d_alpha_t.transpose();
    // Compensator: d/d alpha(s, .) of w_s * sum_k alpha(s, k).
    g.d_alpha.colwise() += source_weight_;
    for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) {
            if (!params.mask(a, b)) g.d_alpha(a, b) = 0.0;
        }
    }

    if (marks_->is_linear()) {
        Eigen::VectorXd inv_scores(n);
        for (Index i = 0; i < n; ++i) {
            inv_scores[i] = event_scores[i] > kRateFloor ? 1.0 / event_scores[i] : 0.0;
        }
        g.d_gamma = -(event_marks_.transpose() * inv_scores);
    }
    return g;
}

ObjectiveGradient penalized_objective_gradient(const ModelParams& params, const EventSequence& seq,
                                               const MarkModel& marks, double l1_weight) {
    if (!(l1_weight >= 0.0)) throw std::domain_error("l1 weight must be nonnegative");
    const FixedBetaObjective objective(seq, marks, params.beta, l1_weight);
    ObjectiveGradient g = objective.smooth_gradient(params);
    g.value += l1_weight * params.gamma.lpNorm<1>();
    for (Index d = 0; d < g.d_gamma.size(); ++d) {
        const double v = params.gamma[d];
        g.d_gamma[d] += l1_weight * static_cast<double>((v > 0.0) - (v < 0.0));
    }
    return g;
}

}  // namespace firecast
