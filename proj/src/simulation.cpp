#include "firecast/simulation.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace firecast {

MarkSampler uniform_marks(std::size_t dim) {
    return [dim](std::size_t, double, Rng& rng) {
        std::vector<double> m(dim);
        for (auto& v : m) v = rng.uniform();
        return m;
    };
}

EventSequence simulate(const SimConfig& config) {
    const ModelParams& p = config.params;
    p.check_shapes();
    if (p.has_nan()) throw std::domain_error("simulation params contain NaN");
    if ((p.alpha.array() < 0.0).any()) {
        throw UnsupportedConfiguration("thinning needs nonnegative alpha");
    }
    if ((p.mu.array() < 0.0).any() || p.beta < 0.0) {
        throw UnsupportedConfiguration("thinning needs nonnegative mu and beta");
    }
    if (!(config.horizon > 0.0)) throw std::domain_error("simulation horizon must be positive");

    const auto k = static_cast<Eigen::Index>(p.num_locations());
    const std::size_t dim = p.mark_dim();
    const MarkSampler sampler = config.mark_sampler ? config.mark_sampler : uniform_marks(dim);
    Rng rng(config.seed);

    // decayed(s) = sum over past events at s of exp(-beta (t - t_j)).
    Eigen::VectorXd decayed = Eigen::VectorXd::Zero(k);
    const Eigen::MatrixXd alpha_t = p.alpha.transpose();
    auto rates_now = [&]() -> Eigen::VectorXd { return p.mu + p.beta * (alpha_t * decayed); };

    std::vector<EventRecord> events;
    double t = 0.0;
    for (;;) {
        const double bound = rates_now().sum();
        if (!(bound > 0.0)) break;
        const double wait = rng.exponential(bound);
        if (t + wait > config.horizon) break;
        t += wait;
        decayed *= std::exp(-p.beta * wait);
        const Eigen::VectorXd rates = rates_now();
        const double total = rates.sum();
        if (total > bound * (1.0 + 1e-12)) {
            throw std::logic_error("thinning bound violated");
        }
        if (rng.uniform() * bound >= total) continue;

        double pick = rng.uniform() * total;
        Eigen::Index chosen = k - 1;
        for (Eigen::Index s = 0; s < k; ++s) {
            if (pick < rates[s]) {
                chosen = s;
                break;
            }
            pick -= rates[s];
        }
        EventRecord e;
        e.time = t;
        e.location = static_cast<std::size_t>(chosen);
        e.marks = sampler(e.location, t, rng);
        if (e.marks.size() != dim) {
            throw std::runtime_error(
                fmt::format("mark sampler produced {} marks, expected {}", e.marks.size(), dim));
        }
        events.push_back(std::move(e));
        decayed[chosen] += 1.0;
    }
    return EventSequence(std::move(events), config.horizon, p.num_locations(), dim);
}

ParameterError parameter_error(const ModelParams& estimate, const ModelParams& truth) {
    ParameterError err;
    err.mu = (estimate.mu - truth.mu).norm();
    err.alpha = (estimate.alpha - truth.alpha).norm();
    err.beta = std::abs(estimate.beta - truth.beta);
    err.gamma = (estimate.gamma - truth.gamma).norm();
    err.total = std::sqrt(err.mu * err.mu + err.alpha * err.alpha + err.beta * err.beta);
    const double scale = std::sqrt(truth.mu.squaredNorm() + truth.alpha.squaredNorm() +
                                   truth.beta * truth.beta);
    err.total_relative = scale > 0.0 ? err.total / scale : err.total;
    return err;
}

RecoveryReport recovery_experiment(const SimConfig& sim, const MarkModel& marks,
                                   const FitConfig& fit) {
    const EventSequence seq = simulate(sim);
    RecoveryReport report;
    report.num_events = seq.size();
    report.fit = grid_fit(seq, marks, fit);
    report.error = parameter_error(report.fit.params, sim.params);
    return report;
}

}  // namespace firecast
