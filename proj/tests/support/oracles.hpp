#pragma once
// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the library's numerical code.

#include "firecast/model.hpp"
#include "firecast/stats.hpp"
#include "firecast/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace oracle {

using firecast::EventRecord;
using firecast::EventSequence;
using firecast::ModelParams;
using firecast::Rng;

// Random point of the feasible set. Entries of alpha are drawn in [lo, hi]
// before the Frobenius rescale; mu stays at least 0.05 per entry after scaling.
inline ModelParams random_params(Rng& rng, std::size_t k, std::size_t p, double alpha_lo = 0.0,
                                 double alpha_hi = 0.4) {
    ModelParams m = ModelParams::zeros(k, p);
    for (std::size_t i = 0; i < k; ++i) m.mu[static_cast<Eigen::Index>(i)] = 0.05 + 0.4 * rng.uniform();
    if (m.mu.norm() > 1.0) m.mu /= m.mu.norm() * 1.01;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            m.mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = i == j || rng.uniform() < 0.6;
            if (m.mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) {
                m.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    alpha_lo + (alpha_hi - alpha_lo) * rng.uniform();
            }
        }
    }
    if (m.alpha.norm() > 1.0) m.alpha /= m.alpha.norm() * 1.01;
    m.beta = 0.2 + 2.0 * rng.uniform();
    for (std::size_t d = 0; d < p; ++d) m.gamma[static_cast<Eigen::Index>(d)] = 0.2 + 0.5 * rng.uniform();
    if (m.gamma.norm() > 1.0) m.gamma /= m.gamma.norm() * 1.01;
    return m;
}

inline EventSequence random_sequence(Rng& rng, std::size_t k, std::size_t p, std::size_t n, double horizon) {
    std::vector<EventRecord> events;
    for (std::size_t i = 0; i < n; ++i) {
        EventRecord e;
        e.time = horizon * rng.uniform();
        e.location = static_cast<std::size_t>(rng.below(k));
        for (std::size_t d = 0; d < p; ++d) e.marks.push_back(rng.uniform());
        events.push_back(e);
    }
    return EventSequence(std::move(events), horizon, k, p);
}

// Direct summation of the ground intensity, strictly past events only.
inline double ground(const ModelParams& m, const EventSequence& seq, double t, std::size_t k) {
    double v = m.mu[static_cast<Eigen::Index>(k)];
    for (const auto& e : seq.events()) {
        if (!(e.time < t)) continue;
        v += m.alpha(static_cast<Eigen::Index>(e.location), static_cast<Eigen::Index>(k)) * m.beta *
             std::exp(-m.beta * (t - e.time));
    }
    return v;
}

inline double linear_score(const ModelParams& m, const std::vector<double>& marks) {
    double s = 0.0;
    for (std::size_t d = 0; d < marks.size(); ++d) s += m.gamma[static_cast<Eigen::Index>(d)] * marks[d];
    return s;
}

// Log-likelihood written out term by term with the 1e-12 clamp.
inline double log_likelihood(const ModelParams& m, const EventSequence& seq) {
    double ll = 0.0;
    for (const auto& e : seq.events()) {
        ll += std::log(std::max(ground(m, seq, e.time, e.location), 1e-12));
        ll += std::log(std::max(linear_score(m, e.marks), 1e-12));
    }
    ll -= seq.horizon() * m.mu.sum();
    for (const auto& e : seq.events()) {
        ll -= m.alpha.row(static_cast<Eigen::Index>(e.location)).sum() *
              (1.0 - std::exp(-m.beta * (seq.horizon() - e.time)));
    }
    return ll;
}

// Sum over k of the integral of the ground intensity on [0, T], by composite
// Simpson on each inter-event segment where the integrand is smooth.
inline double compensator_by_quadrature(const ModelParams& m, const EventSequence& seq, int per_segment = 64) {
    std::vector<double> cuts{0.0};
    for (const auto& e : seq.events()) cuts.push_back(e.time);
    cuts.push_back(seq.horizon());
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        if (!(b > a)) continue;
        const double h = (b - a) / per_segment;
        // Evaluate just inside the segment so the events at its left end count.
        auto f = [&](double t) {
            const double tt = std::clamp(t, a + 1e-15 * (1.0 + a), b);
            double sum = 0.0;
            for (std::size_t k = 0; k < seq.num_locations(); ++k) {
                double v = m.mu[static_cast<Eigen::Index>(k)];
                for (const auto& e : seq.events()) {
                    if (e.time <= a) {
                        v += m.alpha(static_cast<Eigen::Index>(e.location), static_cast<Eigen::Index>(k)) * m.beta *
                             std::exp(-m.beta * (tt - e.time));
                    }
                }
                sum += v;
            }
            return sum;
        };
        double acc = f(a) + f(b);
        for (int i = 1; i < per_segment; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
        total += acc * h / 3.0;
    }
    return total;
}

struct ReferenceTrace {
    std::vector<double> decision_tau;
    std::vector<int> yhat;
};

// Line-by-line transcription of the location-wise dynamic threshold
// algorithm, 1-based like the pseudocode. The update on a wrong prediction is
// applied for both error kinds, a wrong first-step prediction seeds tau_2, and
// screening vetoes a positive before it is revealed.
inline ReferenceTrace reference_thresholds(const std::vector<double>& lambda_in, const std::vector<int>& y_in,
                                           const firecast::ThresholdParams& cfg,
                                           const std::optional<firecast::ScreeningStats>& screen) {
    const std::size_t T = lambda_in.size();
    std::vector<double> lambda(T + 1), tau(T + 2, 0.0);
    std::vector<int> Y(T + 1), Yhat(T + 1, -1);
    for (std::size_t t = 1; t <= T; ++t) {
        lambda[t] = lambda_in[t - 1];
        Y[t] = y_in[t - 1];
    }
    auto Pi = [&](double x) { return std::min(std::max(x, cfg.tau_min), cfg.tau_max); };
    std::size_t detections = 0;
    long last_positive = -1;
    auto screened = [&](std::size_t t, int proposal) {
        if (proposal != 1 || !screen) return proposal;
        const bool q1 = screen->fire_count >= 1;
        const bool q2 = detections < screen->fire_count;
        const bool q3 = last_positive < 0 || static_cast<double>(static_cast<long>(t) - last_positive) >= screen->average_gap;
        return q1 && q2 && q3 ? 1 : -1;
    };
    auto record = [&](std::size_t t) {
        if (Yhat[t] == 1) {
            ++detections;
            last_positive = static_cast<long>(t);
        }
    };

    ReferenceTrace out;
    if (T == 0) return out;
    // Line 2.
    tau[1] = cfg.tau_min;
    Yhat[1] = screened(1, lambda[1] > tau[1] ? 1 : -1);
    record(1);
    out.decision_tau.push_back(tau[1]);
    out.yhat.push_back(Yhat[1]);
    // Lines 3-5.
    double tau_next = tau[1];
    if (Yhat[1] != Y[1]) tau_next = std::max(Pi(tau[1] + cfg.eta * Yhat[1]), lambda[1] / cfg.a1);
    // Lines 6-15.
    for (std::size_t t = 2; t <= T; ++t) {
        tau[t] = tau_next;
        out.decision_tau.push_back(tau[t]);
        const double delta_t = std::fabs((lambda[t] - lambda[t - 1]) / lambda[t - 1]);
        Yhat[t] = screened(t, delta_t >= cfg.delta && lambda[t] > tau[t] ? 1 : -1);
        record(t);
        out.yhat.push_back(Yhat[t]);
        if (Yhat[t] != Y[t]) tau[t] = std::max(Pi(tau[t - 1] + cfg.eta * Yhat[t]), lambda[t - 1] / cfg.a1);
        if (lambda[t] <= lambda[t - 1] / cfg.a2) tau[t] = lambda[t];
        tau_next = tau[t];
    }
    return out;
}

}  // namespace oracle
