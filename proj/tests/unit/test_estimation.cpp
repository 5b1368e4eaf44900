#include "firecast/estimation.hpp"
#include "firecast/pgd.hpp"
#include "firecast/simulation.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace firecast;

namespace {

ModelParams chain_truth() {
    ModelParams p = ModelParams::zeros(4, 2);
    p.mu << 0.2, 0.15, 0.25, 0.18;
    p.mask = mask_from_index_band(4, 2);
    p.alpha << 0.35, 0.1, 0, 0, 0.08, 0.3, 0.12, 0, 0, 0.1, 0.35, 0.08, 0, 0, 0.12, 0.3;
    p.beta = 0.8;
    p.gamma << 0.6, 0.5;
    return p;
}

EventSequence small_sample(std::uint64_t seed, double horizon) {
    SimConfig sc;
    sc.params = chain_truth();
    sc.horizon = horizon;
    sc.seed = seed;
    return simulate(sc);
}

double distance(const ModelParams& a, const ModelParams& b) {
    return std::sqrt((a.mu - b.mu).squaredNorm() + (a.alpha - b.alpha).squaredNorm() +
                     (a.gamma - b.gamma).squaredNorm() + (a.beta - b.beta) * (a.beta - b.beta));
}

}  // namespace

TEST_CASE("projection examples") {
    FeasibleSet set;
    ModelParams raw = ModelParams::zeros(2, 1);
    raw.mu << -1.0, 3.0;
    const auto p = project(raw, set);
    CHECK(p.mu[0] == 0.0);
    CHECK(p.mu[1] == doctest::Approx(1.0));

    raw.alpha << 3.0, 4.0, 0.0, 0.0;
    raw.gamma << -2.0;
    raw.beta = -0.5;
    set.mask = MaskMatrix::Constant(2, 2, true);
    set.mask(0, 1) = false;
    const auto q = project(raw, set);
    CHECK(q.alpha(0, 1) == 0.0);
    CHECK(q.alpha(0, 0) == doctest::Approx(1.0));
    CHECK(q.gamma[0] == doctest::Approx(-1.0));
    CHECK(q.beta == 0.0);
    CHECK_FALSE(q.mask(0, 1));

    FeasibleSet wrong;
    wrong.mask = MaskMatrix::Constant(3, 3, true);
    CHECK_THROWS_AS((void)project(raw, wrong), std::domain_error);
}

TEST_CASE("projection is idempotent and nonexpansive") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        ModelParams raw = ModelParams::zeros(3, 2);
        for (Eigen::Index i = 0; i < 3; ++i) raw.mu[i] = 3.0 * (rng.uniform() - 0.5);
        for (Eigen::Index i = 0; i < 9; ++i) raw.alpha.data()[i] = 2.0 * (rng.uniform() - 0.5);
        raw.gamma << 2.0 * rng.uniform() - 1.0, 3.0 * rng.uniform();
        raw.beta = rng.uniform() - 0.5;
        FeasibleSet set;
        set.mask = mask_from_index_band(3, 2);
        const auto p = project(raw, set);
        CHECK(is_feasible(p));
        const auto pp = project(p, set);
        CHECK(distance(p, pp) <= 1e-15);

        for (int probe = 0; probe < 100; ++probe) {
            ModelParams y = oracle::random_params(rng, 3, 2, -0.3, 0.5);
            y.mask = set.mask;
            for (Eigen::Index i = 0; i < 9; ++i) {
                if (!y.mask.data()[i]) y.alpha.data()[i] = 0.0;
            }
            REQUIRE(is_feasible(y));
            CHECK(distance(p, y) <= distance(raw, y) + 1e-12);
        }
    }
}

TEST_CASE("pgd on a quadratic obeys the decaying-step error bound") {
    // f(x) = 0.5 (x - x*)^T H (x - x*) on the unit ball, H = diag(1, 3, 5):
    // strong monotonicity kappa = 1 and gradient norm at most 5 (1 + |x*|).
    Eigen::VectorXd h(3), target(3);
    h << 1.0, 3.0, 5.0;
    target << 0.3, -0.2, 0.1;
    const double kappa = 1.0;
    const double m = 5.0 * (1.0 + target.norm());
    PgdProblem q;
    q.objective = [&](const Eigen::VectorXd& x) {
        return 0.5 * (x - target).cwiseProduct(h).dot(x - target);
    };
    q.gradient = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return h.cwiseProduct(x - target); };
    // Without backtracking every prox call with a positive step is an iterate.
    std::vector<Eigen::VectorXd> iterates;
    q.prox = [&](const Eigen::VectorXd& x, double step) -> Eigen::VectorXd {
        const double n = x.norm();
        Eigen::VectorXd y = n > 1.0 ? Eigen::VectorXd(x / n) : x;
        if (step > 0.0) iterates.push_back(y);
        return y;
    };
    Eigen::VectorXd x0(3);
    x0 << -0.6, 0.6, -0.5;
    PgdOptions opt;
    opt.kappa = kappa;
    opt.steps = 10000;
    (void)projected_gradient_descent(x0, q, opt);
    REQUIRE(iterates.size() == 10000);
    std::size_t violations = 0;
    for (std::size_t k = 1; k <= iterates.size(); ++k) {
        if ((iterates[k - 1] - target).squaredNorm() > m * m / (kappa * kappa * (k + 1))) ++violations;
    }
    CHECK(violations == 0);
    iterates.clear();

    // at the optimum the iterate does not move
    opt.steps = 500;
    const auto still = projected_gradient_descent(target, q, opt);
    CHECK((still.x - target).norm() <= 1e-8);

    opt.steps = 0;
    const auto none = projected_gradient_descent(Eigen::VectorXd::Constant(3, 2.0), q, opt);
    CHECK(none.x.norm() == doctest::Approx(1.0));
    CHECK(none.objective.size() == 1);
}

TEST_CASE("pgd aborts on a non-finite gradient") {
    PgdProblem q;
    q.objective = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    q.gradient = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(x.size(), std::nan(""));
    };
    q.prox = [](const Eigen::VectorXd& x, double) { return x; };
    PgdOptions opt;
    opt.steps = 5;
    try {
        (void)projected_gradient_descent(Eigen::VectorXd::Ones(2), q, opt);
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("pgd_fit basics") {
    const auto seq = small_sample(3, 200.0);
    FitConfig fc;
    fc.constraints.mask = mask_from_index_band(4, 2);
    fc.pgd_steps = 0;
    const auto start = pgd_fit(seq, MarkModel::linear(), 0.8, fc);
    const auto expected = default_initial_params(seq, MarkModel::linear(), 0.8, fc.constraints);
    CHECK(distance(start.params, expected) == 0.0);
    CHECK(start.objective_trace.size() == 1);
    CHECK(start.params.mu[0] == doctest::Approx(static_cast<double>(seq.size()) / (4 * 200.0)));
    CHECK(start.params.gamma[0] == doctest::Approx(1.0 / std::sqrt(2.0)));

    fc.pgd_steps = 300;
    const auto fit = pgd_fit(seq, MarkModel::linear(), 0.8, fc);
    CHECK(is_feasible(fit.params, 1e-12));
    // with backtracking the objective never goes up
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
        CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1]);
    }
    CHECK_THROWS_AS((void)pgd_fit(seq, MarkModel::linear(), 0.0, fc), std::domain_error);
}

TEST_CASE("recovering from the generating parameters with no steps costs only the projection") {
    const auto truth = chain_truth();
    SimConfig sc;
    sc.params = truth;
    sc.horizon = 300.0;
    FitConfig fc;
    fc.pgd_steps = 0;
    fc.grid_points = 1;
    fc.beta_low = fc.beta_high = truth.beta;
    fc.initial = truth;
    fc.constraints.mask = truth.mask;
    const auto report = recovery_experiment(sc, MarkModel::linear(), fc);
    CHECK(report.error.total <= 1e-15);
}

TEST_CASE("config validation") {
    FitConfig fc;
    CHECK_NOTHROW(fc.validate());
    auto bad = fc;
    bad.beta_low = 3.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = fc;
    bad.grid_points = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = fc;
    bad.beta_tolerance = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = fc;
    bad.kappa = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("grid_fit contracts") {
    const auto seq = small_sample(5, 400.0);
    FitConfig fc;
    fc.constraints.mask = mask_from_index_band(4, 2);
    fc.pgd_steps = 200;
    fc.grid_points = 1;
    fc.beta_low = fc.beta_high = 0.7;
    fc.pgd_tolerance = 0.0;  // grid points always run the full step budget
    const auto degenerate = grid_fit(seq, MarkModel::linear(), fc);
    const auto direct = pgd_fit(seq, MarkModel::linear(), 0.7, fc);
    CHECK(distance(degenerate.params, direct.params) == 0.0);

    fc.grid_points = 6;
    fc.beta_low = 0.2;
    fc.beta_high = 1.6;
    const auto r = grid_fit(seq, MarkModel::linear(), fc);
    REQUIRE(r.betas.size() == 7);
    CHECK(r.betas[3] == doctest::Approx(0.2 + 0.5 * 1.4));
    for (double v : r.objectives) CHECK(r.objective <= v);
    CHECK(r.objective == doctest::Approx(penalized_objective(r.params, seq, MarkModel::linear())).epsilon(1e-9));
    CHECK(r.params.beta == r.betas[r.best_index]);

    // concurrency does not change the answer
    auto serial = fc;
    serial.parallel = false;
    const auto s = grid_fit(seq, MarkModel::linear(), serial);
    CHECK(s.objectives == r.objectives);
    CHECK(distance(s.params, r.params) == 0.0);
    CHECK(s.objective_trace == r.objective_trace);
}

TEST_CASE("more grid points and steps fit better") {
    const auto truth = chain_truth();
    const auto seq = small_sample(9, 2500.0);
    FitConfig coarse;
    coarse.constraints.mask = truth.mask;
    coarse.grid_points = 4;
    coarse.pgd_steps = 100;
    FitConfig fine = coarse;
    fine.grid_points = 16;
    fine.pgd_steps = 2000;
    const auto a = parameter_error(grid_fit(seq, MarkModel::linear(), coarse).params, truth);
    const auto b = parameter_error(grid_fit(seq, MarkModel::linear(), fine).params, truth);
    CHECK(b.total_relative < a.total_relative);
    CHECK(b.total_relative < 0.15);
}

TEST_CASE("line search finds the minimum of the decay profile") {
    const auto truth = chain_truth();
    const auto seq = small_sample(4, 1500.0);
    const auto r = line_search_beta(truth, seq, MarkModel::linear(), 1.0, 0.05, 2.0, 25);
    CHECK_FALSE(r.fell_back);
    auto at = [&](double b) {
        auto p = truth;
        p.beta = b;
        return penalized_objective(p, seq, MarkModel::linear());
    };
    CHECK(r.objective <= at(r.beta - 1e-4));
    CHECK(r.objective <= at(r.beta + 1e-4));
    CHECK(r.objective == doctest::Approx(at(r.beta)));

    // A minimum at the interval edge cannot be bracketed.
    const auto edge = line_search_beta(truth, seq, MarkModel::linear(), 1.0, 0.05, 0.2, 25);
    CHECK(edge.fell_back);
    CHECK(edge.beta == doctest::Approx(0.2));
    CHECK_THROWS_AS((void)line_search_beta(truth, seq, MarkModel::linear(), 1.0, 1.0, 0.5, 25), std::invalid_argument);
}

TEST_CASE("alternating fit is monotone and settles") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        SimConfig sc;
        sc.params = oracle::random_params(rng, 2, 1, 0.0, 0.5);
        sc.params.beta = 0.5 + rng.uniform();
        sc.horizon = 150.0;
        sc.seed = seed;
        const auto seq = simulate(sc);
        FitConfig fc;
        fc.pgd_steps = 400;
        const auto r = alternating_fit(seq, MarkModel::linear(), fc);
        for (std::size_t i = 1; i < r.objectives.size(); ++i) {
            CHECK(r.objectives[i] <= r.objectives[i - 1] + 1e-9);
        }
        CHECK(r.objective == doctest::Approx(penalized_objective(r.params, seq, MarkModel::linear())).epsilon(1e-9));
        CHECK(r.betas.size() <= static_cast<std::size_t>(fc.max_outer_iterations));
    }
}

TEST_CASE("alternating fit started at its own answer stops after one round") {
    const auto seq = small_sample(2, 1000.0);
    FitConfig fc;
    fc.constraints.mask = mask_from_index_band(4, 2);
    const auto first = alternating_fit(seq, MarkModel::linear(), fc);
    auto again = fc;
    again.initial = first.params;
    again.initial_beta = first.params.beta;
    const auto second = alternating_fit(seq, MarkModel::linear(), again);
    CHECK(second.betas.size() == 1);
    CHECK(second.objective <= first.objective + 1e-9);
}

TEST_CASE("fits are deterministic") {
    const auto seq = small_sample(6, 300.0);
    FitConfig fc;
    fc.pgd_steps = 150;
    const auto a = alternating_fit(seq, MarkModel::linear(), fc);
    const auto b = alternating_fit(seq, MarkModel::linear(), fc);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(a.betas == b.betas);
    CHECK(distance(a.params, b.params) == 0.0);
}
