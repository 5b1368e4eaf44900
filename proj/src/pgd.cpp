#include "firecast/pgd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

PgdTrace projected_gradient_descent(const Eigen::VectorXd& x0, const PgdProblem& problem,
                                    const PgdOptions& options) {
    if (options.steps < 0) throw std::invalid_argument("pgd step count must be >= 0");
    if (!(options.kappa > 0.0)) throw std::invalid_argument("pgd kappa must be positive");

    PgdTrace trace;
    trace.x = problem.prox(x0, 0.0);
    double current = problem.objective(trace.x);
    trace.objective.push_back(current);
    double cap = std::numeric_limits<double>::infinity();

    for (int k = 1; k <= options.steps; ++k) {
        const Eigen::VectorXd grad = problem.gradient(trace.x);
        if (!grad.allFinite()) {
            throw std::runtime_error(fmt::format("non-finite gradient at pgd step {}", k));
        }
        const double scheduled = 1.0 / (options.kappa * static_cast<double>(k + 1));
        double step = std::min(scheduled, cap);
        Eigen::VectorXd next = problem.prox(trace.x - step * grad, step);
        double value = problem.objective(next);
        if (options.backtracking) {
            int halvings = 0;
            while (!(value <= current) && halvings < options.max_halvings) {
                step *= 0.5;
                next = problem.prox(trace.x - step * grad, step);
                value = problem.objective(next);
                ++halvings;
            }
            if (!(value <= current)) {
                trace.stalled = true;
                break;
            }
            cap = 2.0 * step;
        }
        const double previous = current;
        trace.x = std::move(next);
        current = value;
        trace.objective.push_back(current);
        trace.step_sizes.push_back(step);
        trace.steps_taken = k;
        if (options.tolerance > 0.0 &&
            std::abs(current - previous) <= options.tolerance * std::max(1.0, std::abs(previous))) {
            break;
        }
    }
    return trace;
}

}  // namespace firecast
