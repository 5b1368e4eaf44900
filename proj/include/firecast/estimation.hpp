#pragma once

#include "firecast/marks.hpp"
#include "firecast/model.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace firecast {

/// Convex constraint set for (mu, alpha, gamma, beta). An empty mask means
/// every interaction is allowed.
struct FeasibleSet {
    MaskMatrix mask;
    double mu_radius{1.0};
    double alpha_radius{1.0};
    double gamma_radius{1.0};
    bool nonnegative_mu{true};
    bool nonnegative_beta{true};

    static FeasibleSet unit(const MaskMatrix& mask) { return FeasibleSet{mask}; }
};

/// Euclidean projection onto the feasible set, block by block: mu onto the
/// orthant-ball intersection, alpha onto the masked Frobenius ball, gamma onto
/// its ball, beta onto [0, inf). The mask inside `raw` is replaced by the set's.
[[nodiscard]] ModelParams project(const ModelParams& raw, const FeasibleSet& set);

struct FitConfig {
    double beta_low{0.01};
    double beta_high{2.0};
    int grid_points{16};
    int pgd_steps{2000};
    double kappa{1.0};
    bool backtracking{true};
    double l1_weight{1.0};
    // Alternating minimization.
    double initial_beta{1.0};
    double beta_tolerance{1e-2};
    int max_outer_iterations{10};
    double pgd_tolerance{1e-11};
    int line_search_points{25};
    // Grid points may be fitted concurrently; output does not depend on it.
    bool parallel{true};
    FeasibleSet constraints;
    std::optional<ModelParams> initial;

    void validate() const;
};

struct PgdFit {
    ModelParams params;
    std::vector<double> objective_trace;
    int steps_taken{0};
};

struct FitResult {
    ModelParams params;
    double objective{0.0};
    std::vector<double> objective_trace;
    // Grid path: one entry per grid point. Alternating path: one per outer iteration.
    std::vector<double> betas;
    std::vector<double> objectives;
    std::vector<std::string> failures;
    std::size_t best_index{0};
    std::size_t iterations{0};
    double wall_seconds{0.0};
    std::vector<std::string> warnings;
};

/// Default starting point: mu = n/(K T) scaled into its ball, alpha = 0,
/// gamma = 1/sqrt(p).
[[nodiscard]] ModelParams default_initial_params(const EventSequence& seq, const MarkModel& marks,
                                                 double beta, const FeasibleSet& set);

/// Projected gradient descent on penalized_objective at a fixed beta. The
/// gamma step applies soft-thresholding for the l1 term before projection.
[[nodiscard]] PgdFit pgd_fit(const EventSequence& seq, const MarkModel& marks, double beta,
                             const FitConfig& config);

/// beta_j = beta_low + (j / J)(beta_high - beta_low), j = 0..J; returns the
/// grid point with the smallest objective (ties go to the smaller j).
[[nodiscard]] FitResult grid_fit(const EventSequence& seq, const MarkModel& marks,
                                 const FitConfig& config);

/// Alternates a convex solve at fixed beta with a line search for beta on
/// [beta_low, 2^k] until successive betas differ by at most beta_tolerance.
[[nodiscard]] FitResult alternating_fit(const EventSequence& seq, const MarkModel& marks,
                                        const FitConfig& config);

/// Minimizer of penalized_objective over beta in [lo, hi] with the other
/// parameters held fixed: a coarse scan followed by golden-section search
/// around the best scan point.
struct LineSearchResult {
    double beta{0.0};
    double objective{0.0};
    bool fell_back{false};
};
[[nodiscard]] LineSearchResult line_search_beta(const ModelParams& params, const EventSequence& seq,
                                                const MarkModel& marks, double l1_weight,
                                                double lo, double hi, int scan_points);

}  // namespace firecast
