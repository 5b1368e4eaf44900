#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace firecast {

/// Iteration control for projected (proximal) gradient descent with the
/// decaying step schedule t_k = 1 / (kappa (k + 1)).
struct PgdOptions {
    int steps{1000};
    double kappa{1.0};
    // Halve the step while the objective would increase. The cap grows back
    // by 2x after each accepted step but never exceeds t_k.
    bool backtracking{false};
    int max_halvings{60};
    // Stop once |f_k - f_{k-1}| <= tolerance * max(1, |f_{k-1}|); 0 disables.
    double tolerance{0.0};
};

struct PgdProblem {
    std::function<double(const Eigen::VectorXd&)> objective;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    // Maps (point, step size) to the constrained proximal point.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> prox;
};

struct PgdTrace {
    Eigen::VectorXd x;
    // objective[0] is at the projected start; one entry per accepted step.
    std::vector<double> objective;
    std::vector<double> step_sizes;
    int steps_taken{0};
    bool stalled{false};
};

/// x_k = prox(x_{k-1} - t_k grad f(x_{k-1}), t_k), starting from prox(x0, 0).
/// Throws std::runtime_error naming the step if a gradient is not finite.
[[nodiscard]] PgdTrace projected_gradient_descent(const Eigen::VectorXd& x0,
                                                  const PgdProblem& problem,
                                                  const PgdOptions& options);

}  // namespace firecast
