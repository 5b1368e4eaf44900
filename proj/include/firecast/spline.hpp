#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace firecast {

/// Interpolating B-spline of the given degree through (x_i, y_i), with interior
/// knots placed by averaging consecutive abscissae. Needs at least degree + 1
/// strictly increasing abscissae. Outside [x_0, x_{n-1}] the end values are held.
class InterpolatingSpline {
public:
    InterpolatingSpline(std::vector<double> x, std::vector<double> y, int degree = 5);

    [[nodiscard]] double operator()(double t) const;
    [[nodiscard]] int degree() const noexcept { return degree_; }

private:
    [[nodiscard]] std::size_t find_span(double t) const;
    void basis(std::size_t span, double t, std::vector<double>& out) const;

    int degree_;
    std::vector<double> x_;
    std::vector<double> knots_;
    std::vector<double> coeffs_;
};

/// Fills NaN entries of `values` (aligned with nondecreasing `times`) and keeps
/// observed entries untouched. Uses the spline when at least degree + 1
/// distinct observed times exist, linear interpolation with two or more, and
/// the single observed value with one. With none, the input is returned as is.
/// Repeated observed times are averaged before fitting. Imputed values are
/// clamped to the observed range.
[[nodiscard]] std::vector<double> impute_missing(std::span<const double> times,
                                                 std::span<const double> values, int degree = 5);

}  // namespace firecast
