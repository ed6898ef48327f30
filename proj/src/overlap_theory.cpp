#include "overlapkit/overlap_theory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "overlapkit/errors.hpp"

namespace overlapkit {

namespace {

// Coarse scan of (0, upper) followed by a Brent refinement around the best cell.
template <class F>
double density_max(F rho, double upper) {
    const int scan = 256;
    int best = 0;
    double best_val = -1.0;
    for (int k = 0; k < scan; ++k) {
        const double v = rho((k + 0.5) / scan * upper);
        if (v > best_val) {
            best_val = v;
            best = k;
        }
    }
    const double lo = std::max(0.0, best - 0.5) / scan * upper;
    const double hi = std::min(double(scan), best + 1.5) / scan * upper;
    auto res = boost::math::tools::brent_find_minima([&](double x) { return -rho(x); }, lo, hi, 30);
    return std::max(best_val, -res.second);
}

}  // namespace

double mp_density_max(const MPSpec& spec) {
    auto [lo, hi] = mp_edges(spec);
    if (lo <= 0.0) {
        // The density blows up at the origin; measure the maximum a little inside.
        return mp_density(spec, 1e-3 * (hi - lo));
    }
    return density_max([&](double x) { return mp_density(spec, x); }, hi);
}

OverlapTriple mp_overlap_triple(const ShapeRatios& r, double mu, double lam) {
    r.validate();
    const double t = r.t, q = r.q, a = r.alpha, b = r.beta;
    if (!(t > 0.0)) throw ParameterError("closed forms need t > 0");
    if (lam < 0.0 || mu < 0.0) throw ParameterError("eigenvalues must be nonnegative");
    const double lb = lam - (1.0 + 1.0 / q) * t;
    const double mb = mu - (a + b / q) * t;
    const double den = (1.0 - a * b) * (1.0 - a * b) * t * t + q * (lb - mb) * (a * b * lb - mb);
    if (!(den > 0.0))
        throw NumericalError("closed-form denominator is not positive; (mu, lambda) is outside "
                             "the bulk");
    OverlapTriple o;
    o.vbar = q * ((1.0 - a) * t * mb + a * (1.0 - b) * t * lb + (1.0 - a * b) * (a + 1.0 / q) * t * t) /
             den;
    o.ubar = q * ((1.0 - b) * t * mb + b * (1.0 - a) * t * lb + (1.0 - a * b) * (1.0 + b / q) * t * t) /
             den;
    o.wbar = q * (1.0 - a * b) * t * std::sqrt(lam * mu) / den;
    return o;
}

KernelOverlaps mp_kernel_overlaps(const ShapeRatios& r, double mu, double lam) {
    r.validate();
    if (!(r.q < 1.0) || !(r.beta > r.alpha * r.q))
        throw ParameterError("kernel overlaps need q < 1 and beta > alpha*q (nonempty null spaces)");
    if (!(r.t > 0.0)) throw ParameterError("kernel overlaps need t > 0");
    const double t = r.t, q = r.q, a = r.alpha, b = r.beta;
    KernelOverlaps k;
    k.u1_of_lambda = (1.0 - a) * t / (a * lam + (1.0 - a) * (1.0 / q - a) * t);
    k.u2_of_mu = (1.0 - b) * t / (mu + (1.0 - b) * (1.0 / q - a) * t);
    k.u3 = q / (1.0 - a * q);
    return k;
}

CharacteristicPoint characteristic_map(cplx G, cplx Gt, cplx z, cplx zt, const ShapeRatios& r) {
    const double t = r.t;
    CharacteristicPoint cp;
    cp.zt = 1.0 - t * G;
    cp.ztp = z * cp.zt - r.c() * t;
    cp.zttilde = 1.0 - r.alpha * t * Gt;
    cp.zttildep = zt * cp.zttilde - r.ctilde() * t;
    return cp;
}

InitialOverlapTables initial_tables_from_A(const Eigen::MatrixXd& A, const Dims& dims) {
    dims.validate();
    const auto M = static_cast<Eigen::Index>(dims.M), N = static_cast<Eigen::Index>(dims.N);
    const auto m = static_cast<Eigen::Index>(dims.m), n = static_cast<Eigen::Index>(dims.n);
    if (A.rows() != M || A.cols() != N)
        throw ParameterError("matrix shape does not match dims");

    Eigen::BDCSVD<Eigen::MatrixXd> full(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::BDCSVD<Eigen::MatrixXd> blk(A.topLeftCorner(m, n),
                                       Eigen::ComputeFullU | Eigen::ComputeFullV);
    InitialOverlapTables tb;
    tb.lam0.resize(N);
    for (Eigen::Index j = 0; j < N; ++j) tb.lam0[j] = full.singularValues()(j) * full.singularValues()(j);
    tb.mu0.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) tb.mu0[i] = blk.singularValues()(i) * blk.singularValues()(i);

    const Eigen::MatrixXd pv = blk.matrixV().transpose() * full.matrixV().topRows(n);  // n x N
    const Eigen::MatrixXd pu = blk.matrixU().transpose() * full.matrixU().topRows(m);  // m x M
    tb.v0 = pv.array().square();
    tb.u0 = pu.array().square();
    tb.w0 = pv.array() * pu.topLeftCorner(n, N).array();
    return tb;
}

InitialResolvent initial_resolvents_zero(const ShapeRatios& r) {
    r.validate();
    const double a = r.alpha, bq = r.beta / r.q;
    return [a, bq](cplx z, cplx zt) {
        const cplx p = z * zt;
        return ResolventValues{a / p, bq / p, 0.0, bq};
    };
}

InitialResolvent initial_resolvents_from_A(const InitialOverlapTables& tb, const Dims& dims) {
    dims.validate();
    const auto M = static_cast<Eigen::Index>(dims.M), N = static_cast<Eigen::Index>(dims.N);
    const auto m = static_cast<Eigen::Index>(dims.m), n = static_cast<Eigen::Index>(dims.n);
    if (tb.v0.rows() != n || tb.v0.cols() != N || tb.u0.rows() != m || tb.u0.cols() != M ||
        tb.w0.rows() != n || tb.w0.cols() != N || static_cast<Eigen::Index>(tb.lam0.size()) != N ||
        static_cast<Eigen::Index>(tb.mu0.size()) != n)
        throw ParameterError("initial overlap tables do not match dims");

    Eigen::VectorXd lam = Eigen::VectorXd::Zero(M), mu = Eigen::VectorXd::Zero(m);
    for (Eigen::Index j = 0; j < N; ++j) lam(j) = tb.lam0[j];
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = tb.mu0[i];
    Eigen::MatrixXd ws = tb.w0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < N; ++j) ws(i, j) *= std::sqrt(std::max(0.0, mu(i) * lam(j)));
    const double scale = static_cast<double>(N);

    struct Tabs {
        Eigen::MatrixXd v0, u0, ws;
        Eigen::VectorXd lam, mu;
    };
    auto tabs = std::make_shared<Tabs>(Tabs{tb.v0, tb.u0, ws, lam, mu});

    return [tabs, scale, N, n](cplx z, cplx zt) {
        const auto& T = *tabs;
        const Eigen::Index M = T.lam.size(), m = T.mu.size();
        Eigen::VectorXd br(M), bi(M), ar(m), ai(m);
        for (Eigen::Index j = 0; j < M; ++j) {
            const cplx d = z - T.lam(j);
            if (std::abs(d) < 1e-9) throw NumericalError("resolvent evaluated on an atom");
            const cplx b = 1.0 / d;
            br(j) = b.real();
            bi(j) = b.imag();
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            const cplx d = zt - T.mu(i);
            if (std::abs(d) < 1e-9) throw NumericalError("resolvent evaluated on an atom");
            const cplx a = 1.0 / d;
            ar(i) = a.real();
            ai(i) = a.imag();
        }
        auto bilinear = [&](const Eigen::MatrixXd& tab, Eigen::Index rows, Eigen::Index cols) {
            const Eigen::VectorXd xr = tab * br.head(cols), xi = tab * bi.head(cols);
            const double re = ar.head(rows).dot(xr) - ai.head(rows).dot(xi);
            const double im = ar.head(rows).dot(xi) + ai.head(rows).dot(xr);
            return cplx(re, im) / scale;
        };
        ResolventValues s;
        s.sv = bilinear(T.v0, n, N);
        s.su = bilinear(T.u0, m, M);
        s.sw = bilinear(T.ws, n, N);
        s.su_scaled = z * zt * s.su;
        return s;
    };
}

ResolventValues propagate_resolvents(const ResolventValues& s0, const CharacteristicPoint& cp,
                                     cplx z, cplx zt, double t) {
    const cplx prod = cp.zt * cp.ztp * cp.zttilde * cp.zttildep;
    const cplx onem = 1.0 - t * s0.sw;
    const cplx cross = prod * s0.sv * s0.su;
    const cplx D = onem * onem - cross * t * t;
    if (std::abs(D) < 1e-12 * (1.0 + std::abs(onem * onem) + std::abs(cross * t * t)))
        throw NumericalError("propagated resolvent denominator is numerically zero");
    ResolventValues s;
    s.sv = cp.zt * cp.zttilde * s0.sv / D;
    s.su_scaled = cp.ztp * cp.zttildep * s0.su / D;
    const cplx zz = z * zt;
    s.su = zz == cplx(0.0) ? cplx(std::nan(""), std::nan("")) : s.su_scaled / zz;
    s.sw = (s0.sw * onem + cross * t) / D;
    return s;
}

Resolvent resolvent_at_time(InitialResolvent s0, std::function<cplx(cplx)> G,
                            std::function<cplx(cplx)> Gt, const ShapeRatios& r) {
    return [s0 = std::move(s0), G = std::move(G), Gt = std::move(Gt), r](cplx z, cplx zt) {
        const CharacteristicPoint cp = characteristic_map(G(z), Gt(zt), z, zt, r);
        const ResolventValues v = s0(cp.zt * cp.ztp, cp.zttilde * cp.zttildep);
        return propagate_resolvents(v, cp, z, zt, r.t);
    };
}

Resolvent mp_resolvent(const ShapeRatios& r) {
    const MPSpec a = r.rho(), b = r.rhot();
    return resolvent_at_time(
        initial_resolvents_zero(r), [a](cplx z) { return mp_stieltjes(a, z); },
        [b](cplx z) { return mp_stieltjes(b, z); }, r);
}

namespace {

cplx channel_value(const ResolventValues& s, Channel ch) {
    switch (ch) {
        case Channel::V: return s.sv;
        case Channel::U: return s.su;
        case Channel::W: return s.sw;
    }
    return 0.0;
}

double extrapolated_real(const std::vector<double>& eps, const std::vector<cplx>& vals) {
    const Extrapolated ex = extrapolate_to_zero(eps, vals);
    if (!(ex.error <= 1e-3 * (1.0 + std::abs(ex.value))))
        throw NumericalError("eps extrapolation is unstable (correction " +
                             std::to_string(ex.error) + ")");
    return ex.value.real();
}

}  // namespace

double invert_bulk(const Resolvent& res, Channel ch, double mu, double lam, double rho,
                   double rhot, const ShapeRatios& r, const std::vector<double>& eps_schedule,
                   double rho_min, double rhot_min) {
    if (!(rho > rho_min) || !(rhot > rhot_min) || !(rho > 0.0) || !(rhot > 0.0))
        throw EdgeProximityError("point too close to a spectral edge for bulk inversion (rho=" +
                                 std::to_string(rho) + ", rho~=" + std::to_string(rhot) + ")");
    std::vector<cplx> vals;
    for (double e : eps_schedule) {
        const cplx z(lam, -e);
        vals.push_back(channel_value(res(z, cplx(mu, e)), ch) -
                       channel_value(res(z, cplx(mu, -e)), ch));
    }
    double v = extrapolated_real(eps_schedule, vals) / (2.0 * kPi * kPi * r.alpha * rho * rhot);
    if (ch == Channel::W) v /= std::sqrt(mu * lam);
    return v;
}

double invert_kernel_U(const Resolvent& res, KernelCase which, double point, double density,
                       const ShapeRatios& r, const std::vector<double>& eps_schedule) {
    if (!(r.q < 1.0) || !(r.beta > r.alpha * r.q))
        throw ParameterError("kernel inversion needs q < 1 and beta > alpha*q");
    std::vector<cplx> vals;
    for (double e : eps_schedule) {
        const cplx ie(0.0, e);
        switch (which) {
            case KernelCase::U1: {
                const cplx z(point, -e);
                vals.push_back(res(z, ie).su_scaled / z);
                break;
            }
            case KernelCase::U2: {
                const cplx zt(point, -e);
                vals.push_back(res(ie, zt).su_scaled / zt);
                break;
            }
            case KernelCase::U3: vals.push_back(res(ie, ie).su_scaled); break;
        }
    }
    // Im[x] is returned as the real part of -i x so a single extrapolation helper covers all.
    if (which == KernelCase::U3) return extrapolated_real(eps_schedule, vals) / (r.c() * r.ctilde());
    if (!(density > 0.0)) throw EdgeProximityError("kernel inversion needs a positive density");
    for (auto& v : vals) v *= cplx(0.0, -1.0);
    const double im = extrapolated_real(eps_schedule, vals);
    if (which == KernelCase::U1) return im / (kPi * r.ctilde() * density);
    return im / (kPi * r.alpha * r.c() * density);
}

GeneralTheory::GeneralTheory(InitialResolvent s0, StieltjesFn G0, StieltjesFn G0tilde,
                             ShapeRatios r, double lam0_max, double mu0_max, SolverOptions opts)
    : s0_(std::move(s0)), r_(r), opts_(opts) {
    r_.validate();
    if (!(r_.t > 0.0)) throw ParameterError("general theory needs t > 0");
    eq_ = {std::move(G0), 1.0, r_.c()};
    eqt_ = {std::move(G0tilde), r_.alpha, r_.ctilde()};
    const double st = std::sqrt(r_.t);
    const double a = std::sqrt(std::max(0.0, lam0_max)) + st * (1.0 + 1.0 / std::sqrt(r_.q));
    const double b =
        std::sqrt(std::max(0.0, mu0_max)) + st * (std::sqrt(r_.alpha) + std::sqrt(r_.beta / r_.q));
    lam_hi_ = a * a;
    mu_hi_ = b * b;
    rho_max_ = density_max([this](double x) { return boundary_G(x).imag() / kPi; }, lam_hi_);
    rhot_max_ = density_max([this](double x) { return boundary_Gt(x).imag() / kPi; }, mu_hi_);
}

GeneralTheory GeneralTheory::from_tables(const InitialOverlapTables& tables, const Dims& dims,
                                         double t, SolverOptions opts) {
    const double lmax = tables.lam0.empty() ? 0.0
                                            : *std::max_element(tables.lam0.begin(), tables.lam0.end());
    const double mmax = tables.mu0.empty() ? 0.0
                                           : *std::max_element(tables.mu0.begin(), tables.mu0.end());
    return GeneralTheory(initial_resolvents_from_A(tables, dims),
                         atom_stieltjes(tables.lam0, static_cast<double>(dims.N)),
                         atom_stieltjes(tables.mu0, static_cast<double>(dims.n)), dims.ratios(t),
                         lmax, mmax, opts);
}

GeneralTheory GeneralTheory::zero(const ShapeRatios& r, SolverOptions opts) {
    return GeneralTheory(initial_resolvents_zero(r), zero_stieltjes(), zero_stieltjes(), r, 0.0,
                         0.0, opts);
}

cplx GeneralTheory::boundary(const ImplicitEquation& eq, double x, double height) const {
    const cplx G = implicit_boundary(eq, x, r_.t, height, opts_);
    const double res = std::abs(eq.residual(G, cplx(x, 0.0), r_.t));
    if (!(res <= 1e-10)) throw SolverFailure("boundary value misses the implicit equation", res);
    return G;
}

cplx GeneralTheory::boundary_G(double lam) const { return boundary(eq_, lam, 0.5 * lam_hi_); }
cplx GeneralTheory::boundary_Gt(double mu) const { return boundary(eqt_, mu, 0.5 * mu_hi_); }

cplx GeneralTheory::at_zero(const ImplicitEquation& eq, double height) const {
    const cplx z0(0.0, height);
    const cplx G = solve_implicit(eq, z0, r_.t, opts_);
    return track_implicit(eq, z0, G, cplx(0.0), r_.t, opts_);
}

double GeneralTheory::G_at_zero() const { return at_zero(eq_, 0.5 * lam_hi_).real(); }
double GeneralTheory::Gt_at_zero() const { return at_zero(eqt_, 0.5 * mu_hi_).real(); }

OverlapTriple GeneralTheory::triple(double mu, double lam) const {
    if (!(mu > 0.0) || !(lam > 0.0)) throw ParameterError("bulk overlaps need mu, lambda > 0");
    const cplx G = boundary_G(lam), Gt = boundary_Gt(mu);
    const double rho = G.imag() / kPi, rhot = Gt.imag() / kPi;
    if (!(rho >= 0.02 * rho_max_) || !(rhot >= 0.02 * rhot_max_) || !(rho > 0.0) || !(rhot > 0.0))
        throw EdgeProximityError("(mu, lambda) = (" + std::to_string(mu) + ", " +
                                 std::to_string(lam) + ") is outside the bulk");
    const double t = r_.t;
    auto eval = [&](cplx gt) {
        const CharacteristicPoint cp = characteristic_map(G, gt, lam, mu, r_);
        return propagate_resolvents(s0_(cp.zt * cp.ztp, cp.zttilde * cp.zttildep), cp, lam, mu, t);
    };
    // mu + i0 carries the conjugate boundary value.
    const ResolventValues plus = eval(std::conj(Gt)), minus = eval(Gt);
    const double Z = 2.0 * r_.alpha * kPi * kPi * rho * rhot;
    OverlapTriple o;
    o.vbar = (plus.sv - minus.sv).real() / Z;
    o.ubar = (plus.su - minus.su).real() / Z;
    o.wbar = (plus.sw - minus.sw).real() / (Z * std::sqrt(mu * lam));
    return o;
}

void GeneralTheory::require_kernel() const {
    if (!(r_.q < 1.0) || !(r_.beta > r_.alpha * r_.q))
        throw ParameterError("kernel overlaps need q < 1 and beta > alpha*q");
}

double GeneralTheory::kernel_u1(double lam) const {
    require_kernel();
    const cplx G = boundary_G(lam);
    const double rho = G.imag() / kPi;
    if (!(rho >= 0.02 * rho_max_) || !(rho > 0.0))
        throw EdgeProximityError("lambda outside the bulk for the kernel overlap");
    const cplx gt0 = Gt_at_zero();
    const CharacteristicPoint cp = characteristic_map(G, gt0, lam, 0.0, r_);
    const ResolventValues s =
        propagate_resolvents(s0_(cp.zt * cp.ztp, cp.zttilde * cp.zttildep), cp, lam, 0.0, r_.t);
    return (s.su_scaled / lam).imag() / (kPi * r_.ctilde() * rho);
}

double GeneralTheory::kernel_u2(double mu) const {
    require_kernel();
    const cplx Gt = boundary_Gt(mu);
    const double rhot = Gt.imag() / kPi;
    if (!(rhot >= 0.02 * rhot_max_) || !(rhot > 0.0))
        throw EdgeProximityError("mu outside the bulk for the kernel overlap");
    const cplx g0 = G_at_zero();
    const CharacteristicPoint cp = characteristic_map(g0, Gt, 0.0, mu, r_);
    const ResolventValues s =
        propagate_resolvents(s0_(cp.zt * cp.ztp, cp.zttilde * cp.zttildep), cp, 0.0, mu, r_.t);
    return (s.su_scaled / mu).imag() / (kPi * r_.alpha * r_.c() * rhot);
}

double GeneralTheory::kernel_u3() const {
    require_kernel();
    const CharacteristicPoint cp = characteristic_map(G_at_zero(), Gt_at_zero(), 0.0, 0.0, r_);
    const ResolventValues s =
        propagate_resolvents(s0_(cp.zt * cp.ztp, cp.zttilde * cp.zttildep), cp, 0.0, 0.0, r_.t);
    return s.su_scaled.real() / (r_.c() * r_.ctilde());
}

KernelOverlaps GeneralTheory::kernel(double mu, double lam) const {
    return {kernel_u1(lam), kernel_u2(mu), kernel_u3()};
}

std::vector<double> GeneralTheory::quantiles(bool truncated, const std::vector<double>& fractions,
                                             int cells) const {
    if (cells < 16) throw ParameterError("need at least 16 cells");
    const double upper = truncated ? mu_hi_ : lam_hi_;
    const double h = upper / cells;
    // tail[k] = mass above k*h
    std::vector<double> tail(static_cast<std::size_t>(cells) + 1, 0.0);
    for (int k = cells - 1; k >= 0; --k) {
        const double x = (k + 0.5) * h;
        const cplx g = truncated ? boundary_Gt(x) : boundary_G(x);
        tail[k] = tail[k + 1] + std::max(0.0, g.imag() / kPi) * h;
    }
    const double total = tail[0];
    if (!(total > 0.0)) throw NumericalError("density has no mass on the search interval");
    std::vector<double> out;
    for (double f : fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw ParameterError("quantile fraction must lie in [0,1]");
        const double want = f * total;
        int k = cells;
        while (k > 0 && tail[k - 1] < want) --k;  // want lies in cell [k-1, k]
        if (k == 0) {
            out.push_back(0.0);
            continue;
        }
        const double m = tail[k - 1] - tail[k];
        const double frac = m > 0.0 ? (want - tail[k]) / m : 0.0;
        out.push_back((k - frac) * h);
    }
    return out;
}

OverlapTriple general_overlap_triple(const InitialOverlapTables& tables, const ShapeRatios& r,
                                     const Dims& dims, double mu, double lam, double t) {
    const ShapeRatios dr = dims.ratios(t);
    if (std::abs(dr.q - r.q) > 1e-12 || std::abs(dr.alpha - r.alpha) > 1e-12 ||
        std::abs(dr.beta - r.beta) > 1e-12)
        throw ParameterError("shape ratios disagree with dims");
    return GeneralTheory::from_tables(tables, dims, t).triple(mu, lam);
}

namespace {

// Integral of f(lam) rho(lam) over the support, using lam = lo + w (1 - cos th)/2.
template <class F>
double integrate_against_rho(const MPSpec& spec, F f) {
    auto [lo, hi] = mp_edges(spec);
    const double w = hi - lo;
    auto g = [&](double th) {
        const double lam = lo + 0.5 * w * (1.0 - std::cos(th));
        if (!(lam > lo && lam < hi)) return 0.0;
        return f(lam) * mp_density(spec, lam) * 0.5 * w * std::sin(th);
    };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, kPi, 15, 1e-12,
                                                                          &err);
}

}  // namespace

NormalizationSums normalization_check(const ShapeRatios& r, double mu, double t) {
    ShapeRatios rr = r;
    rr.t = t;
    rr.validate();
    NormalizationSums s;
    s.vsum = integrate_against_rho(rr.rho(), [&](double lam) { return mp_overlap_triple(rr, mu, lam).vbar; });
    s.usum = integrate_against_rho(rr.rho(), [&](double lam) { return mp_overlap_triple(rr, mu, lam).ubar; });
    if (rr.q < 1.0) {
        const double u2 = (1.0 - rr.beta) * t / (mu + (1.0 - rr.beta) * (1.0 / rr.q - rr.alpha) * t);
        s.usum += rr.c() * u2;
    }
    return s;
}

double kernel_row_sum(const ShapeRatios& r, double t) {
    ShapeRatios rr = r;
    rr.t = t;
    const double u3 = mp_kernel_overlaps(rr, 1.0, 1.0).u3;
    return integrate_against_rho(
               rr.rho(), [&](double lam) { return mp_kernel_overlaps(rr, 1.0, lam).u1_of_lambda; }) +
           rr.c() * u3;
}

}  // namespace overlapkit
