#include "overlapkit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "overlapkit/errors.hpp"

namespace overlapkit {

std::pair<double, double> mp_edges(const MPSpec& spec) {
    spec.validate();
    const double sa = std::sqrt(spec.a), sb = std::sqrt(spec.b);
    return {(sa - sb) * (sa - sb) * spec.t, (sa + sb) * (sa + sb) * spec.t};
}

double mp_density(const MPSpec& spec, double lam) {
    auto [lo, hi] = mp_edges(spec);
    if (!(lam > lo && lam < hi)) return 0.0;
    return std::sqrt((hi - lam) * (lam - lo)) / (2.0 * kPi * spec.a * lam * spec.t);
}

double mp_hilbert(const MPSpec& spec, double lam) {
    spec.validate();
    if (lam == 0.0) throw NumericalError("Hilbert transform is singular at lambda = 0");
    return (lam - (spec.b - spec.a) * spec.t) / (2.0 * spec.a * lam * spec.t);
}

cplx mp_stieltjes(const MPSpec& spec, cplx z) {
    auto [lo, hi] = mp_edges(spec);
    if (z == cplx(0.0)) throw NumericalError("Stieltjes transform evaluated at z = 0");
    if (z.imag() == 0.0 && z.real() >= lo && z.real() <= hi)
        throw NumericalError("Stieltjes transform evaluated on its support: branch is ambiguous");
    const double t = spec.t;
    const cplx root = std::sqrt(z - hi) * std::sqrt(z - lo);
    cplx G = (z - (spec.b - spec.a) * t - root) / (2.0 * spec.a * z * t);
    if (z.imag() != 0.0 && G.imag() * z.imag() > 0.0)
        G = (z - (spec.b - spec.a) * t + root) / (2.0 * spec.a * z * t);
    return G;
}

namespace {

// Density mass per unit angle, with lam = lo + w (1 - cos th)/2. The square-root edges cancel
// against the Jacobian, so the integrand is smooth on [0, pi].
double mass_per_angle(const MPSpec& spec, double lo, double w, double th) {
    const double s = std::sin(th);
    const double denom = 2.0 * kPi * spec.a * spec.t;
    if (lo <= 0.0) return 0.5 * w * (1.0 + std::cos(th)) / denom;
    const double lam = lo + 0.5 * w * (1.0 - std::cos(th));
    return 0.25 * w * w * s * s / (denom * lam);
}

double tail_mass_from_angle(const MPSpec& spec, double lo, double w, double th) {
    if (th >= kPi) return 0.0;
    auto f = [&](double x) { return mass_per_angle(spec, lo, w, x); };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, th, kPi, 15, 1e-13,
                                                                          &err);
}

double angle_of(double lam, double lo, double w) {
    const double c = 1.0 - 2.0 * (lam - lo) / w;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

double mp_tail_mass(const MPSpec& spec, double lam) {
    auto [lo, hi] = mp_edges(spec);
    if (lam >= hi) return 0.0;
    const double w = hi - lo;
    if (lam <= lo) return tail_mass_from_angle(spec, lo, w, 0.0);
    return tail_mass_from_angle(spec, lo, w, angle_of(lam, lo, w));
}

double quantile(const MPSpec& spec, double x) {
    auto [lo, hi] = mp_edges(spec);
    if (!(x >= 0.0 && x <= 1.0)) throw ParameterError("quantile fraction must lie in [0, 1]");
    if (x == 0.0) return hi;
    if (x == 1.0) return lo;
    const double w = hi - lo;
    auto f = [&](double th) { return tail_mass_from_angle(spec, lo, w, th) - x; };
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * (1.0 + std::abs(a)); };
    auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, kPi, f(0.0), -x, tol, iters);
    const double th = 0.5 * (a + b);
    return lo + 0.5 * w * (1.0 - std::cos(th));
}

cplx empirical_stieltjes(const std::vector<double>& eigs, cplx z, double scale) {
    if (eigs.empty()) return 0.0;
    cplx s = 0.0;
    for (double e : eigs) s += 1.0 / (z - e);
    return s / scale;
}

StieltjesFn atom_stieltjes(const std::vector<double>& eigs, double scale) {
    if (!(scale > 0.0)) throw ParameterError("Stieltjes scale must be positive");
    std::vector<double> sorted = eigs;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> loc, wt;
    for (double e : sorted) {
        if (!loc.empty() && std::abs(e - loc.back()) <= 1e-14 * std::max(1.0, std::abs(e))) {
            wt.back() += 1.0;
        } else {
            loc.push_back(e);
            wt.push_back(1.0);
        }
    }
    for (double& w : wt) w /= scale;
    StieltjesFn f;
    f.value = [loc, wt](cplx z) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < loc.size(); ++k) s += wt[k] / (z - loc[k]);
        return s;
    };
    f.deriv = [loc, wt](cplx z) {
        cplx s = 0.0;
        for (std::size_t k = 0; k < loc.size(); ++k) {
            const cplx d = 1.0 / (z - loc[k]);
            s -= wt[k] * d * d;
        }
        return s;
    };
    return f;
}

StieltjesFn zero_stieltjes() {
    return {[](cplx z) { return 1.0 / z; }, [](cplx z) { return -1.0 / (z * z); }};
}

cplx ImplicitEquation::mapped(cplx G, cplx z, double t) const {
    const cplx zt = 1.0 - a * t * G;
    return zt * (z * zt - c * t);
}

cplx ImplicitEquation::residual(cplx G, cplx z, double t) const {
    const cplx g0 = G0.value(mapped(G, z, t));
    return G - g0 / (1.0 + a * t * g0);
}

namespace {

// Herglotz side: Im G opposite to Im z. On the real axis the side we came from decides, and the
// boundary value itself may be real (outside the support).
bool sign_ok(cplx G, cplx z, double side) {
    if (z.imag() != 0.0) return G.imag() * z.imag() < 0.0;
    return side == 0.0 || G.imag() * side <= 0.0;
}

struct NewtonResult {
    bool ok = false;
    cplx G;
    double residual = 0.0;
};

// Newton on H(G)/(1 - a t G). When A has zero singular values, G = 1/(a t) solves the implicit
// equation for every z (the mapped point sits on the zero atom); dividing by 1 - a t G keeps the
// iteration away from that spurious root. Convergence is still judged on |H|.
NewtonResult newton(const ImplicitEquation& eq, cplx z, double t, cplx G, double side,
                    const SolverOptions& o) {
    const double at = eq.a * t;
    auto H = [&](cplx g) { return eq.residual(g, z, t); };
    auto merit = [&](cplx g, cplx h) { return std::abs(h) / std::abs(1.0 - at * g); };
    cplx h = H(G);
    double r = std::abs(h), mr = merit(G, h);
    for (int it = 0; it < o.max_newton; ++it) {
        if (!std::isfinite(r) || !std::isfinite(mr)) return {false, G, r};
        if (r <= o.tol * (1.0 + std::abs(G))) return {sign_ok(G, z, side), G, r};
        const cplx zt = 1.0 - at * G;
        const cplx w = zt * (z * zt - eq.c * t);
        const cplx g0 = eq.G0.value(w);
        const cplx den = 1.0 + at * g0;
        const cplx dphi = eq.G0.deriv(w) / (den * den);
        const cplx dw = -at * (2.0 * z * zt - eq.c * t);
        const cplx dH = 1.0 - dphi * dw;
        const cplx step = -h * zt / (dH * zt + h * at);
        double lam = 1.0;
        bool moved = false;
        for (int k = 0; k < 30; ++k, lam *= 0.5) {
            const cplx Gn = G + lam * step;
            if (!sign_ok(Gn, z, side)) continue;
            const cplx hn = H(Gn);
            const double rn = std::abs(hn), mn = merit(Gn, hn);
            if (std::isfinite(mn) && (mn < mr || rn <= o.tol * (1.0 + std::abs(Gn)))) {
                G = Gn;
                h = hn;
                r = rn;
                mr = mn;
                moved = true;
                break;
            }
        }
        if (!moved) return {r <= 1e3 * o.tol * (1.0 + std::abs(G)) && sign_ok(G, z, side), G, r};
    }
    return {r <= o.tol * (1.0 + std::abs(G)) && sign_ok(G, z, side), G, r};
}

// Generic predictor-corrector along s in [0, 1].
template <class ZofS, class TofS>
cplx continue_path(const ImplicitEquation& eq, ZofS zof, TofS tof, cplx G, double side,
                   const SolverOptions& o, const char* what) {
    const double h0 = 1.0 / o.continuation_steps;
    const double hmin = h0 / std::ldexp(1.0, o.max_halvings);
    double s = 0.0, h = h0, last_res = 0.0;
    cplx Gprev = G;
    double sprev = -1.0;
    while (s < 1.0) {
        const double sn = std::min(1.0, s + h);
        cplx guess = G;
        if (sprev >= 0.0) guess = G + (G - Gprev) * ((sn - s) / (s - sprev));
        NewtonResult nr = newton(eq, zof(sn), tof(sn), guess, side, o);
        if (!nr.ok && sprev >= 0.0) nr = newton(eq, zof(sn), tof(sn), G, side, o);
        last_res = nr.residual;
        if (nr.ok) {
            Gprev = G;
            sprev = s;
            G = nr.G;
            s = sn;
            h = std::min(h0, 2.0 * h);
        } else {
            h *= 0.5;
            if (h < hmin)
                throw SolverFailure(std::string(what) + ": continuation failed to converge",
                                    last_res);
        }
    }
    return G;
}

}  // namespace

cplx solve_implicit(const ImplicitEquation& eq, cplx z, double t, const SolverOptions& opts) {
    if (z.imag() == 0.0) throw ParameterError("implicit solver needs Im z != 0");
    if (t < 0.0) throw ParameterError("t must be >= 0");
    const cplx G0 = eq.G0.value(z);
    if (t == 0.0) return G0;
    return continue_path(
        eq, [z](double) { return z; }, [t](double s) { return s * t; }, G0, z.imag(), opts,
        "implicit equation");
}

cplx track_implicit(const ImplicitEquation& eq, cplx z_from, cplx G_from, cplx z_to, double t,
                    const SolverOptions& opts) {
    return continue_path(
        eq, [=](double s) { return z_from + s * (z_to - z_from); }, [t](double) { return t; },
        G_from, z_from.imag(), opts, "implicit equation (path tracking)");
}

cplx solve_implicit_G(const StieltjesFn& G0, cplx z, double t, double q, const SolverOptions& opts) {
    if (!(q > 0.0 && q <= 1.0)) throw ParameterError("q must lie in (0, 1]");
    return solve_implicit({G0, 1.0, 1.0 / q - 1.0}, z, t, opts);
}

cplx solve_implicit_Gtilde(const StieltjesFn& G0tilde, cplx zt, double t, const ShapeRatios& r,
                           const SolverOptions& opts) {
    r.validate();
    return solve_implicit({G0tilde, r.alpha, r.ctilde()}, zt, t, opts);
}

std::vector<double> default_eps_schedule(double scale, double rel) {
    const double e = scale * rel;
    return {e, e / 2.0, e / 4.0, e / 8.0};
}

Extrapolated extrapolate_to_zero(const std::vector<double>& eps, const std::vector<cplx>& values) {
    const std::size_t n = eps.size();
    if (n == 0 || values.size() != n) throw ParameterError("extrapolation needs matching samples");
    if (n == 1) return {values[0], 0.0};
    std::vector<cplx> p = values;
    cplx tail_estimate = 0.0;
    for (std::size_t m = 1; m < n; ++m) {
        for (std::size_t i = 0; i + m < n; ++i)
            p[i] = (eps[i + m] * p[i] - eps[i] * p[i + 1]) / (eps[i + m] - eps[i]);
        // p[1] at the final level is the estimate using only the smaller eps values
        if (m == n - 2) tail_estimate = p[1];
    }
    return {p[0], std::abs(p[0] - tail_estimate)};
}

BoundaryValue plemelj_boundary(const std::function<cplx(cplx)>& stieltjes, double lam,
                               const std::vector<double>& eps_schedule, double max_rel_error) {
    if (eps_schedule.size() < 3) throw ParameterError("eps schedule needs at least 3 entries");
    for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
        if (!(eps_schedule[k] > 0.0) || (k > 0 && !(eps_schedule[k] < eps_schedule[k - 1])))
            throw ParameterError("eps schedule must be positive and decreasing");
    }
    std::vector<cplx> vals;
    vals.reserve(eps_schedule.size());
    for (double e : eps_schedule) vals.push_back(stieltjes(cplx(lam, -e)));
    const Extrapolated ex = extrapolate_to_zero(eps_schedule, vals);
    if (!(ex.error <= max_rel_error * (1.0 + std::abs(ex.value))))
        throw NumericalError("unstable boundary extrapolation at lambda=" + std::to_string(lam) +
                             " (correction " + std::to_string(ex.error) + ")");
    return {ex.value.real(), std::max(0.0, ex.value.imag() / kPi)};
}

cplx implicit_boundary(const ImplicitEquation& eq, double lam, double t, double height,
                       const SolverOptions& opts) {
    if (!(height > 0.0)) throw ParameterError("tracking height must be positive");
    const cplx z0(lam, -height);
    const cplx G0 = solve_implicit(eq, z0, t, opts);
    if (t == 0.0) {
        if (lam == 0.0) throw NumericalError("boundary value at an atom");
        return eq.G0.value(cplx(lam, 0.0));
    }
    cplx G = track_implicit(eq, z0, G0, cplx(lam, 0.0), t, opts);
    if (G.imag() < 0.0) G.imag(0.0);
    return G;
}

}  // namespace overlapkit
