#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "overlapkit/types.hpp"

namespace overlapkit {

std::pair<double, double> mp_edges(const MPSpec& spec);
double mp_density(const MPSpec& spec, double lam);
// Principal value part of the boundary Stieltjes value. Throws at lam = 0.
double mp_hilbert(const MPSpec& spec, double lam);
// Branch picked so that G ~ 1/z at infinity and Im G has the sign opposite to Im z.
cplx mp_stieltjes(const MPSpec& spec, cplx z);

// Mass of the density above lam.
double mp_tail_mass(const MPSpec& spec, double lam);
// lam(x) with x = mass above lam(x); x=0 -> hi, x=1 -> lo.
double quantile(const MPSpec& spec, double x);

cplx empirical_stieltjes(const std::vector<double>& eigs, cplx z, double scale);

// A Stieltjes transform together with its derivative, as needed by Newton.
struct StieltjesFn {
    std::function<cplx(cplx)> value;
    std::function<cplx(cplx)> deriv;
};

// (1/scale) * sum 1/(z - eig); eigenvalues equal up to 1e-14 relative are merged into atoms.
StieltjesFn atom_stieltjes(const std::vector<double>& eigs, double scale);
// 1/z, the initial transform when A = 0.
StieltjesFn zero_stieltjes();

struct SolverOptions {
    double tol = 1e-12;
    int max_newton = 60;
    int continuation_steps = 32;
    int max_halvings = 14;
};

// Solves G = G0(w)/(1 + a t G0(w)), w = (1 - a t G)(z (1 - a t G) - c t).
// a=1, c=1/q-1 is the full-matrix equation; a=alpha, c=beta/q-alpha the truncated one.
struct ImplicitEquation {
    StieltjesFn G0;
    double a = 1.0;
    double c = 0.0;

    cplx mapped(cplx G, cplx z, double t) const;
    cplx residual(cplx G, cplx z, double t) const;
};

// Continuation in time from G0(z), at fixed z with Im z != 0.
cplx solve_implicit(const ImplicitEquation& eq, cplx z, double t, const SolverOptions& opts = {});
// Tracks a known solution G_from at z_from along the segment to z_to (which may be real).
cplx track_implicit(const ImplicitEquation& eq, cplx z_from, cplx G_from, cplx z_to, double t,
                    const SolverOptions& opts = {});

cplx solve_implicit_G(const StieltjesFn& G0, cplx z, double t, double q,
                      const SolverOptions& opts = {});
cplx solve_implicit_Gtilde(const StieltjesFn& G0tilde, cplx zt, double t, const ShapeRatios& r,
                           const SolverOptions& opts = {});

// Geometric schedule scale * {1, 1/2, 1/4, 1/8} times the given relative size.
std::vector<double> default_eps_schedule(double scale, double rel = 1e-3);

struct Extrapolated {
    cplx value;
    double error;  // size of the last Neville correction
};
// Polynomial (Neville) extrapolation of samples f(eps_k) to eps = 0.
Extrapolated extrapolate_to_zero(const std::vector<double>& eps, const std::vector<cplx>& values);

// Boundary value at lam - i0 from a Stieltjes evaluator, extrapolated along the schedule.
BoundaryValue plemelj_boundary(const std::function<cplx(cplx)>& stieltjes, double lam,
                               const std::vector<double>& eps_schedule,
                               double max_rel_error = 1e-4);

// Boundary value G(lam - i0, t) of an implicit equation, tracked down onto the real axis.
// Returns the complex value v + i pi rho.
cplx implicit_boundary(const ImplicitEquation& eq, double lam, double t, double height,
                       const SolverOptions& opts = {});

}  // namespace overlapkit
