#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace firecast {

class MarkModel;

/// Floor applied to every intensity and mark score before taking logs.
inline constexpr double kRateFloor = 1e-12;

using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// One observation: time in days since the start of the horizon, a discrete
/// cell id, and the mark vector observed with it.
struct EventRecord {
    double time{0.0};
    std::size_t location{0};
    std::vector<double> marks;
    // Class index in {1..C}; only used by the conformal stage.
    std::optional<int> magnitude;
};

/// Events on [0, horizon] over `num_locations` cells, kept sorted by time.
/// Construction stable-sorts the input and validates every record.
class EventSequence {
public:
    EventSequence() = default;
    EventSequence(std::vector<EventRecord> events, double horizon,
                  std::size_t num_locations, std::size_t mark_dim);

    [[nodiscard]] const std::vector<EventRecord>& events() const noexcept { return events_; }
    [[nodiscard]] std::size_t size() const noexcept { return events_.size(); }
    [[nodiscard]] bool empty() const noexcept { return events_.empty(); }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t num_locations() const noexcept { return num_locations_; }
    [[nodiscard]] std::size_t mark_dim() const noexcept { return mark_dim_; }
    [[nodiscard]] const EventRecord& operator[](std::size_t i) const { return events_[i]; }

    /// Events with time < cutoff, re-horizoned at `new_horizon`.
    [[nodiscard]] EventSequence truncated(double cutoff, double new_horizon) const;

private:
    std::vector<EventRecord> events_;
    double horizon_{1.0};
    std::size_t num_locations_{1};
    std::size_t mark_dim_{0};
};

/// Parameters of the marked Hawkes model.
///
/// `alpha(s, k)` is the influence of an event at source cell `s` on target
/// cell `k`. `mask(s, k) == false` forces `alpha(s, k) == 0`.
struct ModelParams {
    Eigen::VectorXd mu;
    Eigen::MatrixXd alpha;
    double beta{1.0};
    Eigen::VectorXd gamma;
    MaskMatrix mask;

    [[nodiscard]] std::size_t num_locations() const noexcept {
        return static_cast<std::size_t>(mu.size());
    }
    [[nodiscard]] std::size_t mark_dim() const noexcept {
        return static_cast<std::size_t>(gamma.size());
    }

    /// Zero rates, zero interactions, beta = 1, full mask.
    static ModelParams zeros(std::size_t num_locations, std::size_t mark_dim);

    /// Throws std::invalid_argument if the block shapes are inconsistent.
    void check_shapes() const;
    [[nodiscard]] bool has_nan() const;
};

/// True when params lie in the constraint set (norm balls of radius 1,
/// nonnegative rates and decay, masked entries zero) up to `tol`.
[[nodiscard]] bool is_feasible(const ModelParams& params, double tol = 1e-12);

/// Spatial structure of the interaction kernel.
struct KernelConfig {
    double neighbor_radius{0.24};
    double cell_size{0.24};
    std::vector<std::size_t> static_marks;
    std::vector<std::size_t> dynamic_marks;

    /// Checks positivity and that the two mark groups partition {0..mark_dim-1}.
    void validate(std::size_t mark_dim) const;
};

struct Centroid {
    double lat{0.0};
    double lon{0.0};
};

/// mask(i, j) = true iff the centroid distance (degrees) is <= radius.
[[nodiscard]] MaskMatrix mask_from_centroids(std::span<const Centroid> centroids, double radius);

/// mask(i, j) = true iff |i - j| < band.
[[nodiscard]] MaskMatrix mask_from_index_band(std::size_t num_locations, std::size_t band);

/// gamma^T m split into its dynamic and static parts.
struct MarkContribution {
    double dynamic_part{0.0};
    double static_part{0.0};
};
[[nodiscard]] MarkContribution split_mark_score(const Eigen::VectorXd& gamma,
                                                std::span<const double> marks,
                                                const KernelConfig& kernel);

/// mu_k + sum_{j: t_j < t} alpha(u_j, k) * beta * exp(-beta (t - t_j)).
[[nodiscard]] double ground_intensity(const ModelParams& params, const EventSequence& seq,
                                      double t, std::size_t k);

/// ground_intensity times the mark score, floored at kRateFloor.
[[nodiscard]] double conditional_intensity(const ModelParams& params, const EventSequence& seq,
                                           const MarkModel& marks, double t, std::size_t k,
                                           std::span<const double> mark);

/// sum_k int_0^t_end lambda_g(tau, k) dtau, closed form.
[[nodiscard]] double integrated_ground_intensity(const ModelParams& params,
                                                 const EventSequence& seq, double t_end);

/// Per-event history statistics at a fixed decay. Row i of `history` holds
/// beta * sum_{j: t_j < t_i, u_j = s} exp(-beta (t_i - t_j)) for every source s,
/// so lambda_g(t_i, u_i) = mu(u_i) + history.row(i) . alpha.col(u_i).
struct ExcitationFeatures {
    double beta{0.0};
    Eigen::MatrixXd history;
    // 1 - exp(-beta (T - t_i)).
    Eigen::VectorXd compensator_weight;

    static ExcitationFeatures compute(const EventSequence& seq, double beta);
};

/// sum_i log(max(values_i, floor)).
[[nodiscard]] double sum_of_logs(const Eigen::VectorXd& values, double floor);

/// Log-likelihood pieces; value() is their signed sum.
struct LikelihoodTerms {
    double log_ground{0.0};
    double log_marks{0.0};
    double baseline_compensator{0.0};
    double excitation_compensator{0.0};

    [[nodiscard]] double value() const noexcept {
        return log_ground + log_marks - baseline_compensator - excitation_compensator;
    }
};

[[nodiscard]] LikelihoodTerms likelihood_terms(const ModelParams& params, const EventSequence& seq,
                                               const MarkModel& marks);

[[nodiscard]] double log_likelihood(const ModelParams& params, const EventSequence& seq,
                                    const MarkModel& marks);

/// -log_likelihood + l1_weight * ||gamma||_1.
[[nodiscard]] double penalized_objective(const ModelParams& params, const EventSequence& seq,
                                         const MarkModel& marks, double l1_weight = 1.0);

struct ObjectiveGradient {
    double value{0.0};
    Eigen::VectorXd d_mu;
    Eigen::MatrixXd d_alpha;
    Eigen::VectorXd d_gamma;
};

/// The objective restricted to a fixed decay. History features, and the mark
/// scores of a nonlinear mark model, are computed once at construction; the
/// referenced sequence and mark model must outlive this object.
class FixedBetaObjective {
public:
    FixedBetaObjective(const EventSequence& seq, const MarkModel& marks, double beta,
                       double l1_weight);

    [[nodiscard]] double beta() const noexcept { return features_.beta; }
    [[nodiscard]] const ExcitationFeatures& features() const noexcept { return features_; }

    /// Likelihood pieces with params.beta replaced by beta().
    [[nodiscard]] LikelihoodTerms terms(const ModelParams& params) const;

    /// penalized_objective with params.beta replaced by beta().
    [[nodiscard]] double penalized(const ModelParams& params) const;

    /// Value and gradient of -log_likelihood with respect to (mu, alpha, gamma).
    /// The l1 term is excluded; masked alpha entries get a zero gradient.
    [[nodiscard]] ObjectiveGradient smooth_gradient(const ModelParams& params) const;

    /// smooth_gradient without evaluating the objective value (left at 0).
    [[nodiscard]] ObjectiveGradient gradient_only(const ModelParams& params) const;

private:
    [[nodiscard]] Eigen::VectorXd scores(const ModelParams& params) const;
    [[nodiscard]] ObjectiveGradient gradient_impl(const ModelParams& params, bool with_value) const;

    [[nodiscard]] Eigen::VectorXd ground_rates(const ModelParams& params) const;
    [[nodiscard]] LikelihoodTerms terms(const ModelParams& params, const Eigen::VectorXd& rates,
                                        const Eigen::VectorXd& event_scores) const;

    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    const EventSequence* seq_;
    const MarkModel* marks_;
    double l1_weight_;
    ExcitationFeatures features_;
    RowMatrix history_;                   // row-major copy for per-event dots
    std::vector<Eigen::Index> location_;  // event location indices
    Eigen::VectorXd source_weight_;       // per source, sum of compensator weights
    Eigen::MatrixXd event_marks_;         // n x p, linear marks only
    std::optional<Eigen::VectorXd> fixed_scores_;
};

/// Gradient of penalized_objective, with sign(gamma) as the l1 derivative.
[[nodiscard]] ObjectiveGradient penalized_objective_gradient(const ModelParams& params,
                                                             const EventSequence& seq,
                                                             const MarkModel& marks,
                                                             double l1_weight = 1.0);

}  // namespace firecast
