#include "firecast/marks.hpp"
#include "firecast/model.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace firecast;

namespace {

EventSequence one_event(double t1 = 1.0, std::vector<double> marks = {1.0}) {
    EventRecord e;
    e.time = t1;
    e.location = 0;
    e.marks = std::move(marks);
    return EventSequence({e}, 10.0, 1, e.marks.size());
}

ModelParams one_location(double mu, double alpha, double beta, double gamma) {
    ModelParams p = ModelParams::zeros(1, 1);
    p.mu << mu;
    p.alpha << alpha;
    p.beta = beta;
    p.gamma << gamma;
    return p;
}

}  // namespace

TEST_CASE("event sequences are sorted stably and validated") {
    std::vector<EventRecord> ev(3);
    ev[0] = {2.0, 1, {0.1}, std::nullopt};
    ev[1] = {1.0, 0, {0.2}, std::nullopt};
    ev[2] = {2.0, 0, {0.3}, std::nullopt};
    const EventSequence seq(ev, 5.0, 2, 1);
    CHECK(seq[0].time == 1.0);
    CHECK(seq[1].marks[0] == 0.1);  // ties keep input order
    CHECK(seq[2].marks[0] == 0.3);

    CHECK_THROWS_AS(EventSequence({{6.0, 0, {0.1}, {}}}, 5.0, 1, 1), std::domain_error);
    CHECK_THROWS_AS(EventSequence({{1.0, 2, {0.1}, {}}}, 5.0, 2, 1), std::domain_error);
    CHECK_THROWS_AS(EventSequence({{1.0, 0, {1.5}, {}}}, 5.0, 1, 1), std::domain_error);
    CHECK_THROWS_AS(EventSequence({{1.0, 0, {0.1, 0.2}, {}}}, 5.0, 1, 1), std::domain_error);
    CHECK_THROWS_AS(EventSequence({}, 0.0, 1, 1), std::domain_error);

    const auto cut = seq.truncated(2.0, 2.0);
    CHECK(cut.size() == 1);
    CHECK(cut.horizon() == 2.0);
}

TEST_CASE("ground intensity examples") {
    const EventSequence empty({}, 10.0, 1, 1);
    CHECK(ground_intensity(one_location(0.3, 0.5, 1.0, 0.5), empty, 4.0, 0) == doctest::Approx(0.3));

    const auto p = one_location(0.1, 0.5, 1.0, 0.5);
    const auto seq = one_event();
    CHECK(ground_intensity(p, seq, 2.0, 0) == doctest::Approx(0.1 + 0.5 * std::exp(-1.0)).epsilon(1e-14));
    CHECK(ground_intensity(p, seq, 2.0, 0) == doctest::Approx(0.28394).epsilon(1e-5));
    // history is exclusive at the event time itself
    CHECK(ground_intensity(p, seq, 1.0, 0) == doctest::Approx(0.1));

    CHECK(ground_intensity(one_location(0.1, 0.5, 0.0, 0.5), seq, 2.0, 0) == doctest::Approx(0.1));

    CHECK_THROWS_AS((void)ground_intensity(p, seq, 11.0, 0), std::domain_error);
    CHECK_THROWS_AS((void)ground_intensity(p, seq, -0.1, 0), std::domain_error);
    CHECK_THROWS_AS((void)ground_intensity(p, seq, 2.0, 1), std::domain_error);
}

TEST_CASE("conditional intensity examples") {
    const auto seq = one_event();
    auto p = one_location(0.1, 0.5, 1.0, 0.5);
    const std::vector<double> m{1.0};
    CHECK(conditional_intensity(p, seq, MarkModel::linear(), 2.0, 0, m) ==
          doctest::Approx(0.28394 * 0.5).epsilon(1e-4));
    CHECK(conditional_intensity(p, seq, MarkModel::linear(), 2.0, 0, m) == doctest::Approx(0.14197).epsilon(1e-4));

    auto zero_gamma = p;
    zero_gamma.gamma << 0.0;
    CHECK(conditional_intensity(zero_gamma, seq, MarkModel::linear(), 2.0, 0, m) == kRateFloor);

    const auto unit = MarkModel::nonlinear(std::make_shared<ConstantScorer>(1.0));
    CHECK(conditional_intensity(p, seq, unit, 2.0, 0, m) == ground_intensity(p, seq, 2.0, 0));

    const std::vector<double> wrong{0.5, 0.5};
    CHECK_THROWS_AS((void)conditional_intensity(p, seq, MarkModel::linear(), 2.0, 0, wrong), std::domain_error);
}

TEST_CASE("linear mark score equals gamma^T m exactly") {
    ModelParams p = ModelParams::zeros(1, 3);
    p.gamma << 0.25, -0.5, 0.125;
    const std::vector<double> m{0.5, 0.25, 1.0};
    CHECK(MarkModel::linear().score(p, m, 0.0, 0) == 0.25 * 0.5 - 0.5 * 0.25 + 0.125);
}

TEST_CASE("log-likelihood examples") {
    ModelParams p = ModelParams::zeros(2, 1);
    p.mu << 0.2, 0.2;
    const EventSequence empty({}, 10.0, 2, 1);
    CHECK(log_likelihood(p, empty, MarkModel::linear()) == doctest::Approx(-4.0).epsilon(1e-15));

    // One event, score 0.5: log 0.1 + log 0.5 minus the compensator, which is
    // checked against quadrature.
    const auto q = one_location(0.1, 0.5, 1.0, 0.5);
    const auto seq = one_event();
    const double comp = oracle::compensator_by_quadrature(q, seq, 2000);
    CHECK(comp == doctest::Approx(0.1 * 10.0 + 0.5 * (1.0 - std::exp(-9.0))).epsilon(1e-9));
    CHECK(log_likelihood(q, seq, MarkModel::linear()) ==
          doctest::Approx(std::log(0.1) + std::log(0.5) - comp).epsilon(1e-9));
}

TEST_CASE("likelihood is additive over disjoint location groups") {
    Rng rng(11);
    const auto a = oracle::random_params(rng, 2, 2);
    const auto seq_a = oracle::random_sequence(rng, 2, 2, 20, 15.0);
    const auto b = oracle::random_params(rng, 2, 2);

    // Same gamma on both halves so one linear mark model covers both.
    ModelParams b_same = b;
    b_same.gamma = a.gamma;
    b_same.beta = a.beta;
    ModelParams joint = ModelParams::zeros(4, 2);
    joint.mu << a.mu, b_same.mu;
    joint.alpha.setZero();
    joint.alpha.topLeftCorner(2, 2) = a.alpha;
    joint.alpha.bottomRightCorner(2, 2) = b_same.alpha;
    joint.mask.setConstant(false);
    joint.mask.topLeftCorner(2, 2) = a.mask;
    joint.mask.bottomRightCorner(2, 2) = b_same.mask;
    joint.beta = a.beta;
    joint.gamma = a.gamma;

    std::vector<EventRecord> merged = seq_a.events();
    for (auto e : seq_a.events()) {
        e.location += 2;
        merged.push_back(e);
    }
    const EventSequence both(merged, 15.0, 4, 2);
    const double separate = log_likelihood(a, seq_a, MarkModel::linear()) +
                            log_likelihood(b_same, seq_a, MarkModel::linear());
    CHECK(std::abs(log_likelihood(joint, both, MarkModel::linear()) - separate) <= 1e-12 * std::abs(separate) + 1e-12);
}

TEST_CASE("closed-form likelihood matches a term-by-term oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + rng.below(5), p = 1 + rng.below(3);
        const auto params = oracle::random_params(rng, k, p, -0.2, 0.5);
        const auto seq = oracle::random_sequence(rng, k, p, rng.below(50), 5.0 + 20.0 * rng.uniform());
        const double expected = oracle::log_likelihood(params, seq);
        CHECK(log_likelihood(params, seq, MarkModel::linear()) ==
              doctest::Approx(expected).epsilon(1e-11));
    }
}

TEST_CASE("compensator matches quadrature on random instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t k = 1 + rng.below(5);
        const auto params = oracle::random_params(rng, k, 1);
        const auto seq = oracle::random_sequence(rng, k, 1, 1 + rng.below(50), 5.0 + 30.0 * rng.uniform());
        const double quad = oracle::compensator_by_quadrature(params, seq);
        const auto terms = likelihood_terms(params, seq, MarkModel::linear());
        CHECK(terms.baseline_compensator + terms.excitation_compensator == doctest::Approx(quad).epsilon(1e-5));
        CHECK(integrated_ground_intensity(params, seq, seq.horizon()) == doctest::Approx(quad).epsilon(1e-5));
    }
}

TEST_CASE("penalized objective examples") {
    Rng rng(3);
    auto p = oracle::random_params(rng, 2, 2);
    const auto seq = oracle::random_sequence(rng, 2, 2, 15, 10.0);
    const double ll = log_likelihood(p, seq, MarkModel::linear());

    auto zero = p;
    zero.gamma.setZero();
    CHECK(penalized_objective(zero, seq, MarkModel::linear(), 1.0) ==
          -log_likelihood(zero, seq, MarkModel::linear()));

    p.gamma << 0.3, -0.4;
    const double l = log_likelihood(p, seq, MarkModel::linear());
    CHECK(penalized_objective(p, seq, MarkModel::linear(), 1.0) == doctest::Approx(-l + 0.7).epsilon(1e-14));
    CHECK(penalized_objective(p, seq, MarkModel::linear(), 2.0) -
              penalized_objective(p, seq, MarkModel::linear(), 1.0) ==
          doctest::Approx(0.7).epsilon(1e-12));
    CHECK_THROWS_AS((void)penalized_objective(p, seq, MarkModel::linear(), -1.0), std::domain_error);
    (void)ll;
}

TEST_CASE("NaN parameters are rejected") {
    auto p = one_location(0.1, 0.5, 1.0, 0.5);
    p.mu << std::nan("");
    CHECK_THROWS_AS((void)log_likelihood(p, one_event(), MarkModel::linear()), std::domain_error);
}

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(17);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 1 + rng.below(4), p = 1 + rng.below(3);
        const auto params = oracle::random_params(rng, k, p);
        const auto seq = oracle::random_sequence(rng, k, p, 10 + rng.below(40), 10.0 + 20.0 * rng.uniform());
        const auto g = penalized_objective_gradient(params, seq, MarkModel::linear(), 1.0);
        auto f = [&](const ModelParams& x) { return penalized_objective(x, seq, MarkModel::linear(), 1.0); };
        auto check = [&](double analytic, double numeric) {
            CHECK(std::abs(analytic - numeric) <= 1e-4 * std::max(1.0, std::abs(numeric)));
        };
        for (Eigen::Index i = 0; i < params.mu.size(); ++i) {
            auto a = params, b = params;
            a.mu[i] += h;
            b.mu[i] -= h;
            check(g.d_mu[i], (f(a) - f(b)) / (2 * h));
        }
        for (Eigen::Index r = 0; r < params.alpha.rows(); ++r) {
            for (Eigen::Index c = 0; c < params.alpha.cols(); ++c) {
                if (!params.mask(r, c)) {
                    CHECK(g.d_alpha(r, c) == 0.0);
                    continue;
                }
                auto a = params, b = params;
                a.alpha(r, c) += h;
                b.alpha(r, c) -= h;
                check(g.d_alpha(r, c), (f(a) - f(b)) / (2 * h));
            }
        }
        for (Eigen::Index d = 0; d < params.gamma.size(); ++d) {
            auto a = params, b = params;
            a.gamma[d] += h;
            b.gamma[d] -= h;
            check(g.d_gamma[d], (f(a) - f(b)) / (2 * h));
        }
        CHECK(g.value == doctest::Approx(f(params)).epsilon(1e-12));
    }
}

TEST_CASE("fixed-beta objective agrees with the free functions") {
    Rng rng(8);
    const auto params = oracle::random_params(rng, 3, 2);
    const auto seq = oracle::random_sequence(rng, 3, 2, 30, 12.0);
    const FixedBetaObjective obj(seq, MarkModel::linear(), params.beta, 1.0);
    CHECK(obj.penalized(params) == doctest::Approx(penalized_objective(params, seq, MarkModel::linear())).epsilon(1e-13));
    const auto full = obj.smooth_gradient(params);
    const auto fast = obj.gradient_only(params);
    CHECK((full.d_alpha - fast.d_alpha).norm() <= 1e-14 * (1.0 + full.d_alpha.norm()));
    CHECK(fast.value == 0.0);

    // with a nonlinear scorer the score term is fixed and gamma gets no gradient
    const auto scorer = MarkModel::nonlinear(std::make_shared<ConstantScorer>(0.7));
    const FixedBetaObjective nl(seq, scorer, params.beta, 0.0);
    CHECK(nl.terms(params).log_marks == doctest::Approx(30 * std::log(0.7)));
}

TEST_CASE("monotone history effect with nonnegative alpha") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto params = oracle::random_params(rng, 3, 1);
        auto seq = oracle::random_sequence(rng, 3, 1, 10, 20.0);
        std::vector<EventRecord> more = seq.events();
        more.push_back({20.0 * rng.uniform(), static_cast<std::size_t>(rng.below(3)), {0.5}, {}});
        const EventSequence extended(more, 20.0, 3, 1);
        for (int q = 0; q < 10; ++q) {
            const double t = 20.0 * rng.uniform();
            const std::size_t k = static_cast<std::size_t>(rng.below(3));
            CHECK(ground_intensity(params, extended, t, k) >= ground_intensity(params, seq, t, k));
        }
    }
}

TEST_CASE("mask construction") {
    const auto band = mask_from_index_band(4, 2);
    CHECK(band(0, 1));
    CHECK_FALSE(band(0, 2));
    CHECK(band(3, 3));

    const std::vector<Centroid> c{{0.0, 0.0}, {0.0, 0.24}, {0.24, 0.24}, {0.0, 0.72}};
    const auto m = mask_from_centroids(c, 0.24);
    CHECK(m(0, 1));
    CHECK_FALSE(m(0, 2));  // diagonal neighbour is farther than one cell
    CHECK_FALSE(m(1, 3));
    CHECK(m(3, 3));
    CHECK_THROWS_AS((void)mask_from_centroids(c, 0.0), std::invalid_argument);
}

TEST_CASE("kernel configuration splits mark scores") {
    KernelConfig kc;
    kc.static_marks = {0};
    kc.dynamic_marks = {1, 2};
    kc.validate(3);
    Eigen::VectorXd g(3);
    g << 1.0, 2.0, 3.0;
    const std::vector<double> m{0.5, 0.25, 0.5};
    const auto split = split_mark_score(g, m, kc);
    CHECK(split.static_part == doctest::Approx(0.5));
    CHECK(split.dynamic_part == doctest::Approx(2.0));

    KernelConfig overlap = kc;
    overlap.dynamic_marks = {0, 1, 2};
    CHECK_THROWS_AS(overlap.validate(3), std::invalid_argument);
    KernelConfig bad = kc;
    bad.neighbor_radius = 0.0;
    CHECK_THROWS_AS(bad.validate(3), std::invalid_argument);
}

TEST_CASE("nonlinear scorers") {
    PrecomputedScorer pre;
    pre.add(1.0, 0, 0.25);
    const std::vector<double> m{0.3};
    CHECK(pre.score(m, 1.0, 0) == 0.25);
    CHECK_THROWS_AS((void)pre.score(m, 2.0, 0), std::out_of_range);
    CHECK_THROWS_AS(pre.add(1.0, 0, -1.0), std::invalid_argument);

    // Scott's rule and the Gaussian product kernel, written out.
    const std::vector<std::vector<double>> train{{0.1}, {0.4}, {0.5}, {0.9}};
    const KernelDensityScorer kde(train);
    const double mean = 0.475;
    double var = 0.0;
    for (const auto& s : train) var += (s[0] - mean) * (s[0] - mean);
    const double sd = std::sqrt(var / 3.0);
    const double bw = sd * std::pow(4.0, -1.0 / 5.0);
    CHECK(kde.bandwidth()[0] == doctest::Approx(bw).epsilon(1e-12));
    double dens = 0.0;
    for (const auto& s : train) dens += std::exp(-0.5 * std::pow((0.3 - s[0]) / bw, 2));
    dens /= 4.0 * bw * std::sqrt(2.0 * M_PI);
    CHECK(kde.score(m, 0.0, 0) == doctest::Approx(dens).epsilon(1e-12));
    CHECK(kde.score(m, 0.0, 0) == kde.score(m, 5.0, 3));
    CHECK_THROWS_AS(KernelDensityScorer({}), std::invalid_argument);
}
