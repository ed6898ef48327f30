#include "overlapkit/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "overlapkit/errors.hpp"
#include "overlapkit/rng.hpp"
#include "overlapkit/spectral.hpp"

namespace overlapkit {

void EigenState::validate() const {
    dims.validate();
    if (eigs.size() != dims.N) throw ParameterError("state needs exactly N eigenvalues");
    for (std::size_t j = 0; j + 1 < eigs.size(); ++j)
        if (!(eigs[j] > eigs[j + 1])) throw ParameterError("eigenvalues must be strictly decreasing");
    if (!eigs.empty() && !(eigs.back() > 0.0)) throw ParameterError("eigenvalues must be positive");
}

namespace {

using Vec = Eigen::VectorXd;

// The step is taken in s = sqrt(lam), where the noise is additive. One implicit Euler step
// minimises 0.5|s - y|^2 - h Phi(s) with y = s_old + noise and
//   Phi = (1/2N) sum_{j<k} [log(s_j - s_k) + log(s_j + s_k)] + (C/2N) sum_j log s_j,
// C = M - N + 1 - nu^2 (the Ito correction of lam = s^2 is folded into C).
// The barrier terms keep every accepted iterate ordered and positive.
class ImplicitStep {
public:
    ImplicitStep(std::size_t N, double C, const SdeOptions& o) : N_(static_cast<Eigen::Index>(N)), C_(C), o_(o) {}

    bool feasible(const Vec& s) const {
        for (Eigen::Index j = 0; j + 1 < N_; ++j)
            if (!(s[j] > s[j + 1])) return false;
        if (C_ > 0.0) return s[N_ - 1] > 0.0;
        return N_ < 2 || s[N_ - 2] > std::abs(s[N_ - 1]);
    }

    // Minimiser of the step objective, starting from s (feasible). False on failure.
    bool solve(Vec& s, const Vec& y, double h, std::size_t& iters) const {
        Vec g, d, off;
        for (int it = 0; it < o_.max_newton; ++it) {
            grad(s, g, d, off);
            const Vec r = s - y - h * g;
            const double rn = r.lpNorm<Eigen::Infinity>();
            if (rn <= o_.tol * (1.0 + s.lpNorm<Eigen::Infinity>())) {
                iters += static_cast<std::size_t>(it);
                return true;
            }
            // the tridiagonal part dominates early; the dense Hessian finishes quadratically
            const Vec x = it < 6 ? tridiag_solve(s, h, d, off, r) : dense_solve(s, h, d, r);
            if (!x.allFinite()) return false;
            Vec sn = s + x;
            if (feasible(sn)) {
                Vec g2, d2, o2;
                grad(sn, g2, d2, o2);
                if ((sn - y - h * g2).lpNorm<Eigen::Infinity>() < 0.5 * rn) {
                    s = sn;
                    continue;
                }
            }
            // Armijo on the objective (convex, so x is a descent direction)
            const double f0 = objective(s, y, h), slope = r.dot(x);
            double st = 1.0;
            for (;;) {
                sn = s + st * x;
                if (feasible(sn) && objective(sn, y, h) <= f0 + 1e-4 * st * slope) break;
                st *= 0.5;
                if (st < 1e-20) return false;
            }
            s = sn;
        }
        return false;
    }

private:
    void grad(const Vec& s, Vec& g, Vec& d, Vec& off) const {
        g.resize(N_);
        d.resize(N_);
        off.setZero(N_);
        const double k = 1.0 / (2.0 * static_cast<double>(N_));
        for (Eigen::Index j = 0; j < N_; ++j) {
            double a = 0.0, b = 0.0;
            for (Eigen::Index l = 0; l < N_; ++l) {
                if (l == j) continue;
                const double u = 1.0 / (s[j] - s[l]), w = 1.0 / (s[j] + s[l]);
                a += u + w;
                b += u * u + w * w;
            }
            g[j] = k * a + (C_ > 0.0 ? k * C_ / s[j] : 0.0);
            d[j] = -k * b - (C_ > 0.0 ? k * C_ / (s[j] * s[j]) : 0.0);
            if (j + 1 < N_) {
                const double u = 1.0 / (s[j] - s[j + 1]), w = 1.0 / (s[j] + s[j + 1]);
                off[j] = k * (u * u - w * w);
            }
        }
    }

    double objective(const Vec& s, const Vec& y, double h) const {
        double p = 0.0;
        for (Eigen::Index j = 0; j < N_; ++j)
            for (Eigen::Index l = j + 1; l < N_; ++l) p += std::log(s[j] - s[l]) + std::log(s[j] + s[l]);
        p /= 2.0 * static_cast<double>(N_);
        if (C_ > 0.0)
            for (Eigen::Index j = 0; j < N_; ++j) p += C_ / (2.0 * static_cast<double>(N_)) * std::log(s[j]);
        return 0.5 * (s - y).squaredNorm() - h * p;
    }

    // Hessian of the objective is 1 - h * Hess(Phi); Thomas algorithm on its tridiagonal band.
    Vec tridiag_solve(const Vec&, double h, const Vec& d, const Vec& off, const Vec& r) const {
        Vec b(N_), c(N_), rr = -r, x(N_);
        for (Eigen::Index j = 0; j < N_; ++j) {
            b[j] = 1.0 - h * d[j];
            c[j] = j + 1 < N_ ? -h * off[j] : 0.0;
        }
        for (Eigen::Index j = 1; j < N_; ++j) {
            const double m = c[j - 1] / b[j - 1];  // sub-diagonal equals super-diagonal
            b[j] -= m * c[j - 1];
            rr[j] -= m * rr[j - 1];
        }
        x[N_ - 1] = rr[N_ - 1] / b[N_ - 1];
        for (Eigen::Index j = N_ - 2; j >= 0; --j) x[j] = (rr[j] - c[j] * x[j + 1]) / b[j];
        return x;
    }

    Vec dense_solve(const Vec& s, double h, const Vec& d, const Vec& r) const {
        Eigen::MatrixXd H(N_, N_);
        const double k = 1.0 / (2.0 * static_cast<double>(N_));
        for (Eigen::Index j = 0; j < N_; ++j) {
            for (Eigen::Index l = 0; l < N_; ++l) {
                if (l == j) continue;
                const double u = 1.0 / (s[j] - s[l]), w = 1.0 / (s[j] + s[l]);
                H(j, l) = -h * k * (u * u - w * w);
            }
            H(j, j) = 1.0 - h * d[j];
        }
        return H.llt().solve(-r);
    }

    Eigen::Index N_;
    double C_;
    const SdeOptions& o_;
};

double closest_gap_of(const Vec& s) {
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j + 1 < s.size(); ++j) g = std::min(g, s[j] * s[j] - s[j + 1] * s[j + 1]);
    return s.size() > 1 ? g : s[0] * s[0];
}

struct Driver {
    const ImplicitStep& step;
    const SdeOptions& opts;
    std::uint64_t seed;
    double nu_over_sqrtN;
    SdeStats& stats;

    // Advances s over [t, t + h] with Brownian increment inc. `forced` levels of bridging are
    // always applied (fine grids); failures may add up to `spare` more.
    void advance(Vec& s, double& t, double h, const Vec& inc, std::uint64_t interval,
                 std::uint64_t node, int forced, int spare) {
        if (forced == 0) {
            Vec trial = s;
            const Vec y = s + nu_over_sqrtN * inc;
            if (step.solve(trial, y, h, stats.newton_iterations)) {
                s = trial;
                t += h;
                ++stats.steps;
                const double gap = closest_gap_of(s);
                stats.closest_gap = std::min(stats.closest_gap, gap);
                if (!(gap > 0.0) || !step.feasible(s))
                    throw StiffnessError("ordering lost after an accepted step", gap, t);
                return;
            }
            if (spare == 0)
                throw StiffnessError("implicit step failed at dt_min", closest_gap_of(s), t);
            ++stats.refinements;
            --spare;
        } else {
            --forced;
        }
        // W(h/2) given W(h) = inc is N(inc/2, h/4)
        const NormalStream xi(seed, make_stream(StreamDomain::Bridge, interval));
        const auto N = static_cast<std::uint64_t>(inc.size());
        Vec left(inc.size());
        for (Eigen::Index j = 0; j < inc.size(); ++j)
            left[j] = 0.5 * inc[j] + std::sqrt(0.25 * h) * xi(node * N + static_cast<std::uint64_t>(j));
        const Vec right = inc - left;
        advance(s, t, 0.5 * h, left, interval, 2 * node, forced, spare);
        advance(s, t, 0.5 * h, right, interval, 2 * node + 1, forced, spare);
    }
};

double drift_constant(const Dims& d, double nu) {
    const double C = static_cast<double>(d.M) - static_cast<double>(d.N) + 1.0 - nu * nu;
    if (C < -1e-12) throw ParameterError("noise_scale^2 must not exceed M - N + 1");
    return std::max(C, 0.0);
}

Vec base_increment(std::uint64_t seed, std::uint64_t interval, std::size_t N, double h) {
    const NormalStream z(seed, make_stream(StreamDomain::Sde, interval));
    Vec inc(static_cast<Eigen::Index>(N));
    for (std::size_t j = 0; j < N; ++j) inc[static_cast<Eigen::Index>(j)] = std::sqrt(h) * z(j);
    return inc;
}

EigenState to_state(const Vec& s, double t, const Dims& d) {
    EigenState out{t, std::vector<double>(s.size()), d};
    for (Eigen::Index j = 0; j < s.size(); ++j) out.eigs[static_cast<std::size_t>(j)] = s[j] * s[j];
    return out;
}

Vec to_sqrt(const EigenState& st) {
    Vec s(static_cast<Eigen::Index>(st.eigs.size()));
    for (std::size_t j = 0; j < st.eigs.size(); ++j) s[static_cast<Eigen::Index>(j)] = std::sqrt(st.eigs[j]);
    return s;
}

void check_opts(const SdeOptions& o) {
    if (!(o.noise_scale >= 0.0)) throw ParameterError("noise_scale must be >= 0");
    if (o.max_refine < 0) throw ParameterError("max_refine must be >= 0");
    if (o.warm_divisor < 2) throw ParameterError("warm_divisor must be >= 2");
}

bool degenerate(const std::vector<double>& eigs) {
    const double scale = std::max(1.0, eigs.empty() ? 0.0 : eigs.front());
    for (std::size_t j = 0; j + 1 < eigs.size(); ++j)
        if (!(eigs[j] - eigs[j + 1] > 1e-9 * scale)) return true;
    return eigs.empty() || !(eigs.back() > 0.0);
}

}  // namespace

std::vector<double> gram_eigenvalues(const Eigen::MatrixXd& A) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
    std::vector<double> out(static_cast<std::size_t>(A.cols()), 0.0);
    const Eigen::VectorXd sv = svd.singularValues();
    for (Eigen::Index k = 0; k < sv.size(); ++k) out[static_cast<std::size_t>(k)] = sv[k] * sv[k];
    return out;
}

EigenState bru_step(const EigenState& st, double dt, std::uint64_t seed, std::uint64_t interval,
                    const SdeOptions& opts, SdeStats* stats) {
    st.validate();
    check_opts(opts);
    if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
    SdeStats local;
    local.closest_gap = std::numeric_limits<double>::infinity();
    local.warm_until = st.t;
    const ImplicitStep step(st.dims.N, drift_constant(st.dims, opts.noise_scale), opts);
    Driver drv{step, opts, seed, opts.noise_scale / std::sqrt(static_cast<double>(st.dims.N)), local};
    Vec s = to_sqrt(st);
    double t = st.t;
    drv.advance(s, t, dt, base_increment(seed, interval, st.dims.N, dt), interval, 1, 0, opts.max_refine);
    if (stats) *stats = local;
    return to_state(s, st.t + dt, st.dims);
}

EigenState integrate(const EigenState& init, double t_final, std::size_t n_steps,
                     std::uint64_t seed, const SdeOptions& opts, SdeStats* stats) {
    check_opts(opts);
    init.dims.validate();
    if (init.eigs.size() != init.dims.N) throw ParameterError("state needs exactly N eigenvalues");
    if (!(t_final >= init.t)) throw ParameterError("t_final must be >= the initial time");
    if (n_steps == 0) throw ParameterError("n_steps must be >= 1");
    const Dims& d = init.dims;
    SdeStats local;
    local.closest_gap = std::numeric_limits<double>::infinity();
    local.warm_until = init.t;
    if (t_final == init.t) {
        if (stats) *stats = local;
        return init;
    }

    std::vector<double> start = init.eigs;
    std::sort(start.begin(), start.end(), std::greater<>());
    double t0 = init.t;
    if (degenerate(start)) {
        if (opts.warm_start) {
            // Exact law of the spectrum at t_w given the spectrum at t0: sample
            // diag(sqrt(lam)) + sqrt((t_w - t0)/N) Z.
            const double tw = t0 + (t_final - t0) / opts.warm_divisor;
            Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(d.M, d.N);
            for (std::size_t j = 0; j < d.N; ++j) A0(j, j) = std::sqrt(std::max(0.0, start[j]));
            const auto smp = sample_ensemble(A0, d, tw - t0, seed, make_stream(StreamDomain::Warm, 0));
            start = gram_eigenvalues(smp.X);
            t0 = tw;
            local.warm_until = tw;
            if (degenerate(start)) throw StiffnessError("warm start produced a degenerate spectrum", 0.0, tw);
        } else {
            for (std::size_t j = 0; j < d.N; ++j) start[j] += static_cast<double>(d.N - j) * 1e-8;
            std::sort(start.begin(), start.end(), std::greater<>());
        }
    }
    EigenState st{t0, start, d};
    st.validate();

    std::size_t base = opts.base_steps == 0 ? n_steps : opts.base_steps;
    int level = 0;
    while ((base << level) < n_steps) ++level;
    if ((base << level) != n_steps) throw ParameterError("n_steps must be base_steps * 2^L");

    const ImplicitStep step(d.N, drift_constant(d, opts.noise_scale), opts);
    Driver drv{step, opts, seed, opts.noise_scale / std::sqrt(static_cast<double>(d.N)), local};
    const double H = (t_final - t0) / static_cast<double>(base);
    Vec s = to_sqrt(st);
    double t = t0;
    for (std::size_t b = 0; b < base; ++b) {
        const Vec inc = base_increment(seed, b, d.N, H);
        drv.advance(s, t, H, inc, b, 1, level, opts.max_refine);
    }
    if (stats) *stats = local;
    return to_state(s, t_final, d);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ParameterError("KS needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

double ks_distance(std::vector<double> a, const std::function<double(double)>& cdf) {
    if (a.empty()) throw ParameterError("KS needs a nonempty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double best = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double F = cdf(a[k]);
        best = std::max({best, static_cast<double>(k + 1) / n - F, F - static_cast<double>(k) / n});
    }
    return best;
}

std::vector<cplx> default_z_grid(double upper) {
    std::vector<cplx> z;
    for (int k = 0; k < 10; ++k) {
        const double re = upper * (0.05 + 0.1 * k);
        z.emplace_back(re, k % 2 ? -0.5 : 0.5);
    }
    return z;
}

BurgersReport burgers_validate(const MatrixSpec& spec, double t_final, std::size_t n_steps,
                               const std::vector<cplx>& z_grid, std::uint64_t seed,
                               const SdeOptions& opts) {
    spec.validate();
    if (!(t_final >= 0.0)) throw ParameterError("t_final must be >= 0");
    for (const cplx& z : z_grid)
        if (!(std::abs(z.imag()) >= 0.1)) throw ParameterError("z grid points need |Im z| >= 0.1");
    const Dims& d = spec.dims;
    const Eigen::MatrixXd A = spec.materialize();
    const std::vector<double> lam0 = gram_eigenvalues(A);
    const double Nd = static_cast<double>(d.N);
    const double q = Nd / static_cast<double>(d.M);

    BurgersReport rep;
    rep.z = z_grid;
    rep.stats.warm_until = 0.0;
    if (t_final == 0.0) {
        rep.eig_sde = rep.eig_direct = lam0;
    } else {
        rep.eig_sde = integrate(EigenState{0.0, lam0, d}, t_final, n_steps, seed, opts, &rep.stats).eigs;
        const auto smp = sample_ensemble(A, d, t_final, seed, make_stream(StreamDomain::Direct, 0));
        rep.eig_direct = gram_eigenvalues(smp.X);
    }
    rep.ks = ks_distance(rep.eig_sde, rep.eig_direct);

    const StieltjesFn G0 = atom_stieltjes(lam0, Nd);
    const ImplicitEquation eq{G0, 1.0, 1.0 / q - 1.0};
    for (const cplx& z : z_grid) {
        const cplx g = solve_implicit_G(G0, z, t_final, q);
        const cplx gs = empirical_stieltjes(rep.eig_sde, z, Nd);
        const cplx gd = empirical_stieltjes(rep.eig_direct, z, Nd);
        const double res = std::abs(eq.residual(g, z, t_final));
        rep.g_theory.push_back(g);
        rep.g_sde.push_back(gs);
        rep.g_direct.push_back(gd);
        rep.residual.push_back(res);
        rep.max_dev_sde = std::max(rep.max_dev_sde, std::abs(gs - g));
        rep.max_dev_direct = std::max(rep.max_dev_direct, std::abs(gd - g));
        rep.max_residual = std::max(rep.max_residual, res);
    }
    return rep;
}

}  // namespace overlapkit
