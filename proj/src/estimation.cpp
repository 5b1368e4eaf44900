#include "firecast/estimation.hpp"

#include "firecast/pgd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

namespace {

using Index = Eigen::Index;

MaskMatrix effective_mask(const FeasibleSet& set, Index k) {
    if (set.mask.size() == 0) return MaskMatrix::Constant(k, k, true);
    if (set.mask.rows() != k || set.mask.cols() != k) {
        throw std::domain_error(fmt::format("feasible-set mask is {}x{}, expected {}x{}",
                                            set.mask.rows(), set.mask.cols(), k, k));
    }
    return set.mask;
}

void scale_into_ball(Eigen::Ref<Eigen::VectorXd> v, double radius) {
    const double norm = v.norm();
    if (norm > radius) v *= radius / norm;
}

/// Free coordinates of a fixed-beta fit: mu, unmasked alpha entries, and
/// gamma when the mark model is linear.
class ParamLayout {
public:
    ParamLayout(const ModelParams& shape, bool fit_gamma)
        : template_(shape), fit_gamma_(fit_gamma) {
        const Index k = shape.mu.size();
        for (Index s = 0; s < k; ++s) {
            for (Index t = 0; t < k; ++t) {
                if (shape.mask(s, t)) slots_.emplace_back(s, t);
            }
        }
    }

    [[nodiscard]] Index size() const {
        return template_.mu.size() + static_cast<Index>(slots_.size()) +
               (fit_gamma_ ? template_.gamma.size() : 0);
    }

    [[nodiscard]] Eigen::VectorXd flatten(const Eigen::VectorXd& mu, const Eigen::MatrixXd& alpha,
                                          const Eigen::VectorXd& gamma) const {
        Eigen::VectorXd x(size());
        Index pos = 0;
        x.segment(pos, mu.size()) = mu;
        pos += mu.size();
        for (const auto& [s, t] : slots_) x[pos++] = alpha(s, t);
        if (fit_gamma_) x.segment(pos, gamma.size()) = gamma;
        return x;
    }

    [[nodiscard]] Eigen::VectorXd flatten(const ModelParams& p) const {
        return flatten(p.mu, p.alpha, p.gamma);
    }

    [[nodiscard]] ModelParams unflatten(const Eigen::VectorXd& x) const {
        ModelParams p = template_;
        Index pos = 0;
        p.mu = x.segment(pos, p.mu.size());
        pos += p.mu.size();
        p.alpha.setZero();
        for (const auto& [s, t] : slots_) p.alpha(s, t) = x[pos++];
        if (fit_gamma_) p.gamma = x.segment(pos, p.gamma.size());
        return p;
    }

    [[nodiscard]] Index gamma_offset() const {
        return template_.mu.size() + static_cast<Index>(slots_.size());
    }
    [[nodiscard]] bool fits_gamma() const { return fit_gamma_; }

private:
    ModelParams template_;
    bool fit_gamma_;
    std::vector<std::pair<Index, Index>> slots_;
};

double soft_threshold(double v, double amount) {
    if (v > amount) return v - amount;
    if (v < -amount) return v + amount;
    return 0.0;
}

}  // namespace

ModelParams project(const ModelParams& raw, const FeasibleSet& set) {
    raw.check_shapes();
    ModelParams out = raw;
    out.mask = effective_mask(set, raw.mu.size());
    if (set.nonnegative_mu) out.mu = out.mu.cwiseMax(0.0);
    scale_into_ball(out.mu, set.mu_radius);
    for (Index s = 0; s < out.alpha.rows(); ++s) {
        for (Index t = 0; t < out.alpha.cols(); ++t) {
            if (!out.mask(s, t)) out.alpha(s, t) = 0.0;
        }
    }
    const double fro = out.alpha.norm();
    if (fro > set.alpha_radius) out.alpha *= set.alpha_radius / fro;
    scale_into_ball(out.gamma, set.gamma_radius);
    if (set.nonnegative_beta && out.beta < 0.0) out.beta = 0.0;
    return out;
}

void FitConfig::validate() const {
    if (!(beta_low > 0.0) || !(beta_high > 0.0)) {
        throw std::invalid_argument("beta range endpoints must be positive");
    }
    if (beta_low > beta_high) throw std::invalid_argument("beta_low must not exceed beta_high");
    if (grid_points < 1) throw std::invalid_argument("grid_points must be >= 1");
    if (pgd_steps < 0) throw std::invalid_argument("pgd_steps must be >= 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    if (!(l1_weight >= 0.0)) throw std::invalid_argument("l1_weight must be nonnegative");
    if (!(beta_tolerance > 0.0)) throw std::invalid_argument("beta_tolerance must be positive");
    if (max_outer_iterations < 1) throw std::invalid_argument("max_outer_iterations must be >= 1");
    if (line_search_points < 3) throw std::invalid_argument("line_search_points must be >= 3");
}

ModelParams default_initial_params(const EventSequence& seq, const MarkModel& marks, double beta,
                                   const FeasibleSet& set) {
    const std::size_t k = seq.num_locations();
    const std::size_t p = seq.mark_dim();
    ModelParams init = ModelParams::zeros(k, p);
    init.mask = effective_mask(set, static_cast<Index>(k));
    init.beta = beta;
    const double rate =
        static_cast<double>(seq.size()) / (static_cast<double>(k) * seq.horizon());
    init.mu.setConstant(rate);
    if (marks.is_linear() && p > 0) {
        init.gamma.setConstant(1.0 / std::sqrt(static_cast<double>(p)));
    }
    return project(init, set);
}

PgdFit pgd_fit(const EventSequence& seq, const MarkModel& marks, double beta,
               const FitConfig& config) {
    if (!(beta > 0.0)) throw std::domain_error(fmt::format("pgd_fit needs beta > 0, got {}", beta));
    if (config.pgd_steps < 0) throw std::invalid_argument("pgd_steps must be >= 0");
    const FeasibleSet& set = config.constraints;

    ModelParams start;
    if (config.initial) {
        start = *config.initial;
        start.check_shapes();
        if (start.num_locations() != seq.num_locations()) {
            throw std::domain_error("initial params do not match the sequence's locations");
        }
        start.mask = effective_mask(set, start.mu.size());
        start.beta = beta;
    } else {
        start = default_initial_params(seq, marks, beta, set);
    }

    const ParamLayout layout(start, marks.is_linear());
    const FixedBetaObjective objective(seq, marks, beta, config.l1_weight);
    const double l1 = config.l1_weight;

    PgdProblem problem;
    problem.objective = [&](const Eigen::VectorXd& x) {
        return objective.penalized(layout.unflatten(x));
    };
    problem.gradient = [&](const Eigen::VectorXd& x) {
        const ObjectiveGradient g = objective.gradient_only(layout.unflatten(x));
        return layout.flatten(g.d_mu, g.d_alpha, g.d_gamma);
    };
    problem.prox = [&](const Eigen::VectorXd& x, double step) {
        ModelParams p = layout.unflatten(x);
        if (layout.fits_gamma() && step > 0.0) {
            for (Index d = 0; d < p.gamma.size(); ++d) {
                p.gamma[d] = soft_threshold(p.gamma[d], step * l1);
            }
        }
        return layout.flatten(project(p, set));
    };

    PgdOptions options;
    options.steps = config.pgd_steps;
    options.kappa = config.kappa;
    options.backtracking = config.backtracking;
    options.tolerance = config.pgd_tolerance;

    PgdTrace trace = projected_gradient_descent(layout.flatten(start), problem, options);
    PgdFit fit;
    fit.params = layout.unflatten(trace.x);
    fit.params.beta = beta;
    fit.objective_trace = std::move(trace.objective);
    fit.steps_taken = trace.steps_taken;
    return fit;
}

FitResult grid_fit(const EventSequence& seq, const MarkModel& marks, const FitConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    const int grid = config.grid_points;
    std::vector<double> betas(static_cast<std::size_t>(grid) + 1);
    for (int j = 0; j <= grid; ++j) {
        betas[static_cast<std::size_t>(j)] =
            config.beta_low + (static_cast<double>(j) / grid) * (config.beta_high - config.beta_low);
    }

    // Each grid point keeps its own copy of the config (the pgd tolerance is
    // only used by the alternating path).
    FitConfig point_config = config;
    point_config.pgd_tolerance = 0.0;

    std::vector<std::optional<PgdFit>> fits(betas.size());
    std::vector<std::string> errors(betas.size());
    auto run_point = [&](std::size_t j) {
        try {
            fits[j] = pgd_fit(seq, marks, betas[j], point_config);
        } catch (const std::exception& e) {
            errors[j] = e.what();
        }
    };
    if (config.parallel && betas.size() > 1) {
        std::vector<std::future<void>> tasks;
        tasks.reserve(betas.size());
        for (std::size_t j = 0; j < betas.size(); ++j) {
            tasks.push_back(std::async(std::launch::async, run_point, j));
        }
        for (auto& t : tasks) t.get();
    } else {
        for (std::size_t j = 0; j < betas.size(); ++j) run_point(j);
    }

    FitResult result;
    result.betas = betas;
    result.objectives.assign(betas.size(), std::numeric_limits<double>::infinity());
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < betas.size(); ++j) {
        if (!fits[j]) {
            result.failures.push_back(fmt::format("beta={}: {}", betas[j], errors[j]));
            continue;
        }
        result.iterations += static_cast<std::size_t>(fits[j]->steps_taken);
        const double value = penalized_objective(fits[j]->params, seq, marks, config.l1_weight);
        result.objectives[j] = value;
        if (!best || value < result.objectives[*best]) best = j;
    }
    if (!best) {
        throw std::runtime_error(
            fmt::format("grid_fit: every grid point failed; first error: {}", errors.front()));
    }
    result.best_index = *best;
    result.params = fits[*best]->params;
    result.objective = result.objectives[*best];
    result.objective_trace = fits[*best]->objective_trace;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

LineSearchResult line_search_beta(const ModelParams& params, const EventSequence& seq,
                                  const MarkModel& marks, double l1_weight, double lo, double hi,
                                  int scan_points) {
    if (!(lo > 0.0) || !(hi > lo)) {
        throw std::invalid_argument(fmt::format("bad beta search interval [{}, {}]", lo, hi));
    }
    if (scan_points < 3) throw std::invalid_argument("line search needs >= 3 scan points");
    auto value_at = [&](double beta) {
        ModelParams p = params;
        p.beta = beta;
        const double v = penalized_objective(p, seq, marks, l1_weight);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    const auto n = static_cast<std::size_t>(scan_points);
    std::vector<double> grid(n);
    std::vector<double> values(n);
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        values[i] = value_at(grid[i]);
        if (values[i] < values[best]) best = i;
    }
    const bool bracketed = best > 0 && best + 1 < n && values[best - 1] >= values[best] &&
                           values[best + 1] >= values[best] && std::isfinite(values[best]);
    if (!bracketed) return {grid[best], values[best], true};

    // Golden-section search on the bracket around the best scan point.
    constexpr double kInvPhi = 0.6180339887498949;
    double a = grid[best - 1];
    double b = grid[best + 1];
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = value_at(c);
    double fd = value_at(d);
    while (b - a > 1e-10 * std::max(1.0, std::abs(a))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = value_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = value_at(d);
        }
    }
    const double mid = 0.5 * (a + b);
    const double f_mid = value_at(mid);
    if (f_mid <= values[best]) return {mid, f_mid, false};
    return {grid[best], values[best], false};
}

FitResult alternating_fit(const EventSequence& seq, const MarkModel& marks,
                          const FitConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    double beta = config.initial_beta;
    if (!(beta > 0.0)) throw std::invalid_argument("initial_beta must be positive");

    FitConfig inner = config;
    inner.backtracking = true;
    ModelParams theta = config.initial ? *config.initial
                                       : default_initial_params(seq, marks, beta, config.constraints);

    FitResult result;
    bool converged = false;
    for (int k = 1; k <= config.max_outer_iterations; ++k) {
        inner.initial = theta;
        const PgdFit fit = pgd_fit(seq, marks, beta, inner);
        theta = fit.params;
        result.iterations += static_cast<std::size_t>(fit.steps_taken);
        result.objective_trace.insert(result.objective_trace.end(), fit.objective_trace.begin(),
                                      fit.objective_trace.end());

        const double hi = std::max(std::ldexp(1.0, k), 2.0 * config.beta_low);
        const LineSearchResult search = line_search_beta(theta, seq, marks, config.l1_weight,
                                                         config.beta_low, hi,
                                                         config.line_search_points);
        if (search.fell_back) {
            result.warnings.push_back(fmt::format(
                "outer iteration {}: no interior bracket on [{}, {}], using scan minimum", k,
                config.beta_low, hi));
        }
        const double current = penalized_objective(theta, seq, marks, config.l1_weight);
        double next_beta = search.beta;
        double next_value = search.objective;
        if (!(next_value <= current)) {
            next_beta = beta;
            next_value = current;
        }
        result.betas.push_back(next_beta);
        result.objectives.push_back(next_value);
        const double change = std::abs(next_beta - beta);
        beta = next_beta;
        theta.beta = beta;
        if (change <= config.beta_tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        result.warnings.push_back(fmt::format(
            "beta did not settle within {} outer iterations", config.max_outer_iterations));
    }
    result.params = theta;
    result.objective = penalized_objective(theta, seq, marks, config.l1_weight);
    result.best_index = result.betas.size() - 1;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace firecast
