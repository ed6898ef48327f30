#include "overlapkit/types.hpp"

#include <cmath>
#include <string>

#include "overlapkit/errors.hpp"

namespace overlapkit {

void MPSpec::validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !(t > 0.0) || !std::isfinite(a) || !std::isfinite(b) ||
        !std::isfinite(t))
        throw ParameterError("MP spec needs a, b, t > 0 (got a=" + std::to_string(a) +
                             ", b=" + std::to_string(b) + ", t=" + std::to_string(t) + ")");
}

double MPSpec::width() const { return 4.0 * std::sqrt(a * b) * t; }

void ShapeRatios::validate() const {
    if (!(q > 0.0 && q <= 1.0)) throw ParameterError("q must lie in (0, 1]");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in (0, 1]");
    if (alpha * q > beta * (1.0 + 1e-12))
        throw ParameterError("need alpha*q <= beta (n <= m)");
    if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("t must be >= 0");
}

void Dims::validate() const {
    if (M == 0 || N == 0 || m == 0 || n == 0) throw ParameterError("dims must be positive");
    if (N > M) throw ParameterError("need N <= M");
    if (n > N) throw ParameterError("need n <= N");
    if (n > m || m > M) throw ParameterError("need n <= m <= M");
}

Dims Dims::from_ratios(std::size_t M, double q, double alpha, double beta) {
    ShapeRatios{q, alpha, beta, 0.0}.validate();
    Dims d;
    d.M = M;
    d.N = static_cast<std::size_t>(std::llround(q * static_cast<double>(M)));
    d.n = static_cast<std::size_t>(std::llround(alpha * static_cast<double>(d.N)));
    d.m = static_cast<std::size_t>(std::llround(beta * static_cast<double>(M)));
    d.validate();
    return d;
}

ShapeRatios Dims::ratios(double t) const {
    return {static_cast<double>(N) / static_cast<double>(M),
            static_cast<double>(n) / static_cast<double>(N),
            static_cast<double>(m) / static_cast<double>(M), t};
}

}  // namespace overlapkit
