#pragma once

#include <complex>
#include <cstddef>

namespace overlapkit {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Generic Marchenko-Pastur family with edges (sqrt(a) -/+ sqrt(b))^2 t.
struct MPSpec {
    double a = 1.0;
    double b = 1.0;
    double t = 1.0;

    void validate() const;
    double width() const;
};

// Macroscopic shape: q = N/M, alpha = n/N, beta = m/M, and the noise time t.
struct ShapeRatios {
    double q = 1.0;
    double alpha = 1.0;
    double beta = 1.0;
    double t = 1.0;

    void validate() const;
    double c() const { return 1.0 / q - 1.0; }
    double ctilde() const { return beta / q - alpha; }
    // density of the full matrix spectrum
    MPSpec rho() const { return {1.0, 1.0 / q, t}; }
    // density of the truncated block spectrum
    MPSpec rhot() const { return {alpha, beta / q, t}; }
};

struct Dims {
    std::size_t M = 1, N = 1, m = 1, n = 1;

    void validate() const;
    // Rounds q*M, alpha*N, beta*M and checks they reproduce the ratios to within one unit.
    static Dims from_ratios(std::size_t M, double q, double alpha, double beta);
    ShapeRatios ratios(double t) const;
};

struct BoundaryValue {
    double hilbert = 0.0;
    double density = 0.0;
};

struct OverlapTriple {
    double vbar = 0.0;
    double ubar = 0.0;
    double wbar = 0.0;
};

struct KernelOverlaps {
    double u1_of_lambda = 0.0;
    double u2_of_mu = 0.0;
    double u3 = 0.0;
};

// Mapped arguments (z_t, z_t', z~_t, z~_t') of the characteristic curves.
struct CharacteristicPoint {
    cplx zt, ztp, zttilde, zttildep;
};

}  // namespace overlapkit
