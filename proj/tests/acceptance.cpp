// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "overlapkit/cli.hpp"
#include "overlapkit/ensemble.hpp"
#include "overlapkit/errors.hpp"
#include "overlapkit/overlap_theory.hpp"
#include "overlapkit/sde.hpp"
#include "overlapkit/spectral.hpp"

using namespace overlapkit;

namespace {

const ShapeRatios kRef{0.9, 0.4, 0.8, 3.0};

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

Outcome reference_shape() {
    RunConfig cfg;  // defaults: A = 0, M = 300, q = 0.9, alpha = 0.4, beta = 0.8, t = 3, 200 trials
    cfg.command = "compare";
    cfg.validate();
    const CommandResult res = cmd_compare(cfg);
    const std::size_t col = res.table.column("within_3se");
    int pass = 0;
    for (const auto& row : res.table.rows) {
        const long long* p = std::get_if<long long>(&row[col]);  // null when a point hit an edge
        pass += p && *p == 1;
    }
    const double frac = static_cast<double>(pass) / static_cast<double>(res.table.rows.size());

    // anchor: lam bar = mu bar = 0
    const double lam = (1.0 + 1.0 / kRef.q) * kRef.t, mu = (kRef.alpha + kRef.beta / kRef.q) * kRef.t;
    const Dims d = Dims::from_ratios(300, kRef.q, kRef.alpha, kRef.beta);
    McOptions o;
    o.trials = 400;
    o.seed = 2;
    o.window = 3;
    const auto est = mc_rescaled_overlaps(MatrixSpec::zero(d), kRef.t,
                                          {{mp_tail_mass(kRef.rhot(), mu), mp_tail_mass(kRef.rho(), lam)}}, o);
    const double ev = rel(est[0].v.value, 2.0), eu = rel(est[0].u.value, 2.5);
    const bool ok = frac >= 0.9 && ev <= 0.05 && eu <= 0.05;
    return {ok, fmt("%.0f/45 points within 3 SE; anchor V=%.4f U=%.4f", pass, est[0].v.value, est[0].u.value) +
                    fmt(" (rel err %.3f, %.3f)", ev, eu)};
}

Outcome general_equivalence() {
    const GeneralTheory gt = GeneralTheory::zero(kRef);
    const MPSpec rho = kRef.rho(), rhot = kRef.rhot();
    const double rmax = mp_density_max(rho), rtmax = mp_density_max(rhot);
    double worst = 0.0;
    int n = 0;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            const double mu = quantile(rhot, (i + 0.5) / 10), lam = quantile(rho, (j + 0.5) / 10);
            if (mp_density(rho, lam) < 0.02 * rmax || mp_density(rhot, mu) < 0.02 * rtmax) continue;
            const OverlapTriple a = mp_overlap_triple(kRef, mu, lam), b = gt.triple(mu, lam);
            worst = std::max({worst, std::abs(a.vbar - b.vbar), std::abs(a.ubar - b.ubar), std::abs(a.wbar - b.wbar)});
            ++n;
        }
    return {worst <= 1e-4 && n > 0, fmt("%.0f bulk points, max abs diff %.2e", n, worst)};
}

Outcome sum_rules() {
    auto [lo, hi] = mp_edges(kRef.rhot());
    double worst = 0.0;
    for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const NormalizationSums s = normalization_check(kRef, lo + f * (hi - lo), kRef.t);
        worst = std::max({worst, std::abs(s.vsum - 1.0), std::abs(s.usum - 1.0)});
    }
    const double krow = kernel_row_sum(kRef, kRef.t);
    worst = std::max(worst, std::abs(krow - 1.0));
    return {worst <= 1e-3, fmt("max |sum - 1| = %.2e over 5 mu values and the kernel row", worst)};
}

Outcome burgers() {
    const Dims d{444, 400, 400, 400};
    std::vector<double> two(400);
    for (int k = 0; k < 400; ++k) two[k] = k < 200 ? 1.0 : 2.0;
    double dev = 0.0, res = 0.0;
    std::string detail;
    for (const MatrixSpec& spec : {MatrixSpec::zero(d), MatrixSpec::diagonal(d, two)}) {
        // right edge of the noise bulk shifted by the largest singular value of A
        const double top = spec.kind == MatrixSpec::Kind::Zero ? 0.0 : 2.0;
        const double a = top + (1.0 + 1.0 / std::sqrt(0.9009009009009009));
        const double upper = a * a;
        const BurgersReport rep = burgers_validate(spec, 1.0, 2048, default_z_grid(upper), 1);
        dev = std::max(dev, rep.max_deviation());
        res = std::max(res, rep.max_residual);
        detail += fmt("[sde %.4f direct %.4f] ", rep.max_dev_sde, rep.max_dev_direct);
    }
    return {dev <= 0.05 && res <= 1e-10, detail + fmt("max residual %.1e", res)};
}

Outcome correlation() {
    const double worst = correlation_identity_test(Dims{40, 30, 20, 15}, 1.0, 1e-3, 10000, 1);
    return {worst <= 0.05, fmt("max deviation %.4f over 625 index tuples", worst)};
}

Outcome kernels() {
    const Dims d = Dims::from_ratios(300, kRef.q, kRef.alpha, kRef.beta);
    const MatrixSpec spec = MatrixSpec::zero(d);
    McOptions o;
    o.trials = 200;
    o.seed = 3;
    const double x = 0.5, y = 0.5;
    const double lam = quantile(kRef.rho(), (fraction_to_index(y, d.N) - 0.5) / d.N);
    const double mu = quantile(kRef.rhot(), (fraction_to_index(x, d.n) - 0.5) / d.n);
    const KernelOverlaps th = mp_kernel_overlaps(kRef, mu, lam);
    const double k1 = mc_kernel_overlaps(spec, kRef.t, KernelCase::U1, y, o).value;
    const double k2 = mc_kernel_overlaps(spec, kRef.t, KernelCase::U2, x, o).value;
    const double k3 = mc_kernel_overlaps(spec, kRef.t, KernelCase::U3, 0.0, o).value;
    const double worst = std::max({rel(k1, th.u1_of_lambda), rel(k2, th.u2_of_mu), rel(k3, th.u3)});
    return {worst <= 0.15 && std::abs(th.u3 - 1.40625) < 1e-12,
            fmt("u1 %.4f/%.4f u2 %.4f/%.4f", k1, th.u1_of_lambda, k2, th.u2_of_mu) +
                fmt(" u3 %.4f/%.5f, worst rel %.3f", k3, th.u3, worst)};
}

Outcome invariants() {
    std::vector<std::string> bad;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) bad.push_back(what);
    };
    const Dims d{50, 40, 30, 20};
    std::vector<double> diag(40);
    for (int k = 0; k < 40; ++k) diag[k] = 0.2 + 0.05 * k;
    const Eigen::MatrixXd A = MatrixSpec::diagonal(d, diag).materialize();
    const auto [full, trunc] = sample_frames(A, d, 1.0, 5, 0, 10);
    const OverlapTables tab = overlap_matrices(full, trunc, d);
    double rs = 0.0;
    for (Eigen::Index i = 0; i < tab.V.rows(); ++i) rs = std::max(rs, std::abs(tab.V.row(i).sum() - 1.0));
    for (Eigen::Index i = 0; i < tab.U.rows(); ++i) rs = std::max(rs, std::abs(tab.U.row(i).sum() - 1.0));
    need(rs <= 1e-10, "row sums");

    double orth = 0.0;
    for (const SvdTriplet* s : {&full, &trunc}) {
        orth = std::max(orth, (s->left.transpose() * s->left - Eigen::MatrixXd::Identity(50, 50)).cwiseAbs().maxCoeff());
        orth = std::max(orth, (s->right.transpose() * s->right - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff());
    }
    need(orth <= 1e-10, "orthonormality");

    McOptions o;
    o.trials = 12;
    o.seed = 9;
    o.threads = 1;
    const std::vector<Target> tg{{0.3, 0.6}, {0.7, 0.2}};
    const auto a = mc_rescaled_overlaps(MatrixSpec::diagonal(d, diag), 1.0, tg, o);
    o.threads = 4;
    const auto b = mc_rescaled_overlaps(MatrixSpec::diagonal(d, diag), 1.0, tg, o);
    bool same = true;
    for (std::size_t k = 0; k < a.size(); ++k)
        same = same && a[k].v.value == b[k].v.value && a[k].u.value == b[k].u.value &&
               a[k].w.value == b[k].w.value && a[k].v.se == b[k].v.se;
    need(same, "thread determinism");

    const ShapeRatios one{0.9, 1.0, 1.0, 3.0};
    double z = 0.0;
    for (double mu : {2.0, 5.0})
        for (double lam : {1.0, 4.0, 8.0}) {
            const OverlapTriple t = mp_overlap_triple(one, mu, lam);
            z = std::max({z, std::abs(t.vbar), std::abs(t.ubar), std::abs(t.wbar)});
        }
    need(z <= 1e-12, "alpha = beta = 1 zeros");

    // Herglotz: Im G(z) has the opposite sign of Im z everywhere off the axis
    bool herg = true;
    const StieltjesFn G0 = atom_stieltjes(diag, 40.0);
    for (double re = -2.0; re <= 15.0; re += 0.5)
        for (double im : {-2.0, -0.3, -0.01, 0.01, 0.3, 2.0}) {
            const cplx zz(re, im);
            herg = herg && mp_stieltjes(kRef.rho(), zz).imag() * im < 0.0;
            herg = herg && mp_stieltjes(kRef.rhot(), zz).imag() * im < 0.0;
            herg = herg && solve_implicit_G(G0, zz, 1.0, 0.8).imag() * im < 0.0;
            herg = herg && solve_implicit_Gtilde(zero_stieltjes(), zz, kRef.t, kRef).imag() * im < 0.0;
        }
    const GeneralTheory gt = GeneralTheory::zero(kRef);
    for (double lam = 0.1; lam < gt.lam_upper(); lam += 0.25) herg = herg && gt.boundary_G(lam).imag() >= 0.0;
    need(herg, "Herglotz");

    std::string detail = bad.empty() ? "row sums, frames, threads, degenerate zeros, Herglotz" : "failed:";
    for (const auto& b2 : bad) detail += " " + b2;
    return {bad.empty(), detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 Monte Carlo vs closed form at the reference shape", reference_shape},
        {"2 general pipeline vs closed form", general_equivalence},
        {"3 normalization sum rules", sum_rules},
        {"4 Burgers / implicit solver", burgers},
        {"5 correlation identity", correlation},
        {"6 kernel overlaps", kernels},
        {"7 invariants", invariants},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
