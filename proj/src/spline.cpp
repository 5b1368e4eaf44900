#include "firecast/spline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

namespace firecast {

InterpolatingSpline::InterpolatingSpline(std::vector<double> x, std::vector<double> y, int degree)
    : degree_(degree), x_(std::move(x)) {
    const std::size_t n = x_.size();
    const auto p = static_cast<std::size_t>(degree);
    if (degree < 1) throw std::domain_error("spline degree must be at least 1");
    if (y.size() != n) throw std::domain_error("spline x and y lengths differ");
    if (n < p + 1) {
        throw std::domain_error(fmt::format("degree {} spline needs {} points, got {}", degree, p + 1, n));
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x_[i] > x_[i - 1])) throw std::domain_error("spline abscissae must increase strictly");
    }

    knots_.assign(n + p + 1, 0.0);
    for (std::size_t i = 0; i <= p; ++i) {
        knots_[i] = x_.front();
        knots_[n + i] = x_.back();
    }
    for (std::size_t j = 1; j + p < n; ++j) {
        double sum = 0.0;
        for (std::size_t i = j; i < j + p; ++i) sum += x_[i];
        knots_[j + p] = sum / static_cast<double>(p);
    }

    // Collocation system: row i holds the p + 1 nonzero basis values at x_i.
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(n * (p + 1));
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t span = find_span(x_[i]);
        basis(span, x_[i], values);
        for (std::size_t r = 0; r <= p; ++r) {
            if (values[r] != 0.0) {
                entries.emplace_back(static_cast<int>(i), static_cast<int>(span - p + r), values[r]);
            }
        }
    }
    Eigen::SparseMatrix<double> system(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    system.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(system);
    if (solver.info() != Eigen::Success) throw std::runtime_error("spline collocation system is singular");
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd c = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw std::runtime_error("spline solve failed");
    coeffs_.assign(c.data(), c.data() + c.size());
}

std::size_t InterpolatingSpline::find_span(double t) const {
    const std::size_t n = x_.size();
    const auto p = static_cast<std::size_t>(degree_);
    if (t >= knots_[n]) return n - 1;
    // Last index l in [p, n-1] with knots[l] <= t.
    const auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                                     knots_.begin() + static_cast<std::ptrdiff_t>(n), t);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

void InterpolatingSpline::basis(std::size_t span, double t, std::vector<double>& out) const {
    const auto p = static_cast<std::size_t>(degree_);
    out.assign(p + 1, 0.0);
    std::vector<double> left(p + 1), right(p + 1);
    out[0] = 1.0;
    for (std::size_t j = 1; j <= p; ++j) {
        left[j] = t - knots_[span + 1 - j];
        right[j] = knots_[span + j] - t;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

double InterpolatingSpline::operator()(double t) const {
    t = std::clamp(t, x_.front(), x_.back());
    const auto p = static_cast<std::size_t>(degree_);
    const std::size_t span = find_span(t);
    std::vector<double> values;
    basis(span, t, values);
    double acc = 0.0;
    for (std::size_t r = 0; r <= p; ++r) acc += values[r] * coeffs_[span - p + r];
    return acc;
}

std::vector<double> impute_missing(std::span<const double> times, std::span<const double> values,
                                   int degree) {
    if (times.size() != values.size()) throw std::domain_error("times and values lengths differ");
    std::vector<double> xs, ys;
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && times[i] < times[i - 1]) throw std::domain_error("times must be nondecreasing");
        if (std::isnan(values[i])) continue;
        if (!xs.empty() && xs.back() == times[i]) {
            ys.back() += values[i];
            ++counts.back();
        } else {
            xs.push_back(times[i]);
            ys.push_back(values[i]);
            counts.push_back(1);
        }
    }
    for (std::size_t j = 0; j < ys.size(); ++j) ys[j] /= static_cast<double>(counts[j]);

    std::vector<double> out(values.begin(), values.end());
    if (xs.empty() || xs.size() == times.size()) return out;

    auto linear = [&](double t) {
        if (t <= xs.front()) return ys.front();
        if (t >= xs.back()) return ys.back();
        const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin());
        const std::size_t lo = hi - 1;
        const double w = (t - xs[lo]) / (xs[hi] - xs[lo]);
        return ys[lo] + w * (ys[hi] - ys[lo]);
    };
    std::optional<InterpolatingSpline> spline;
    if (xs.size() >= static_cast<std::size_t>(degree) + 1) spline.emplace(xs, ys, degree);
    // High-degree interpolants of noisy data can swing far outside the data;
    // imputed values stay within the observed range.
    const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isnan(out[i])) continue;
        out[i] = std::clamp(spline ? (*spline)(times[i]) : linear(times[i]), *lo, *hi);
    }
    return out;
}

}  // namespace firecast
