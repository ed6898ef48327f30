#include "overlapkit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "overlapkit/errors.hpp"
#include "overlapkit/overlap_theory.hpp"
#include "overlapkit/sde.hpp"
#include "overlapkit/spectral.hpp"

namespace overlapkit {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

double to_double(const std::string& s, const char* what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) throw ParameterError(std::string("bad number in ") + what + ": '" + s + "'");
    return v;
}

std::vector<std::pair<double, double>> parse_pairs(const std::string& s, const char* what) {
    std::vector<std::pair<double, double>> out;
    for (const auto& item : split(s, ',')) {
        const auto ab = split(item, ':');
        if (ab.size() != 2) throw ParameterError(std::string(what) + " entries must look like a:b, got '" + item + "'");
        out.emplace_back(to_double(ab[0], what), to_double(ab[1], what));
    }
    if (out.empty()) throw ParameterError(std::string(what) + " is empty");
    return out;
}

std::string num(double v) { return format_double(v); }

Cell opt(double v) { return std::isfinite(v) ? Cell(v) : Cell(std::monostate{}); }

}  // namespace

std::vector<double> parse_diag(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split(s, ',')) {
        const auto star = item.find('*');
        if (star == std::string::npos) {
            out.push_back(to_double(item, "--a-diag"));
            continue;
        }
        const double v = to_double(item.substr(0, star), "--a-diag");
        const double c = to_double(item.substr(star + 1), "--a-diag");
        if (!(c >= 1.0) || c != std::floor(c)) throw ParameterError("--a-diag repeat count must be a positive integer");
        out.insert(out.end(), static_cast<std::size_t>(c), v);
    }
    if (out.empty()) throw ParameterError("--a-diag is empty");
    return out;
}

void RunConfig::validate() const {
    ratios().validate();
    if (!(t >= 0.0)) throw ParameterError("--t must be >= 0");
    if (format != "csv" && format != "json") throw ParameterError("--format must be csv or json");
    if (grid < 0) throw ParameterError("--grid must be >= 0");
    if (threads < 0) throw ParameterError("--threads must be >= 0");
    if (window < 0) throw ParameterError("--window must be >= 0");
    if (select != "fixed" && select != "nearest") throw ParameterError("--select must be fixed or nearest");
    if (which != "rho" && which != "rhot" && which != "both") throw ParameterError("--which must be rho, rhot or both");
    if (!a_file.empty() && !a_diag.empty()) throw ParameterError("give at most one of --a-file and --a-diag");
    if (!(min_pass >= 0.0 && min_pass <= 1.0)) throw ParameterError("--min-pass must lie in [0,1]");
    if (!(noise_scale >= 0.0)) throw ParameterError("--noise-scale must be >= 0");
    dims();
}

Dims RunConfig::dims() const {
    if (command == "burgers-check") return Dims::from_ratios(M, q, 1.0, 1.0);
    return Dims::from_ratios(M, q, alpha, beta);
}

MatrixSpec RunConfig::matrix_spec() const {
    if (!a_file.empty()) return MatrixSpec::file(dims(), a_file);
    if (!a_diag.empty()) return MatrixSpec::diagonal(dims(), parse_diag(a_diag));
    return MatrixSpec::zero(dims());
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
    const Dims d = dims();
    // --threads is left out on purpose: it never changes the numbers.
    return {{"command", command},
            {"version", kVersion},
            {"q", num(q)},
            {"alpha", num(alpha)},
            {"beta", num(beta)},
            {"t", num(t)},
            {"M", std::to_string(d.M)},
            {"N", std::to_string(d.N)},
            {"m", std::to_string(d.m)},
            {"n", std::to_string(d.n)},
            {"trials", std::to_string(trials)},
            {"seed", std::to_string(seed)},
            {"grid", std::to_string(grid)},
            {"mode", mode},
            {"targets", targets},
            {"points", points},
            {"eps_schedule", eps_schedule},
            {"a_file", a_file},
            {"a_diag", a_diag},
            {"which", which},
            {"with_edges", with_edges ? "1" : "0"},
            {"lo", num(lo)},
            {"hi", num(hi)},
            {"kernel", kernel ? "1" : "0"},
            {"select", select},
            {"window", std::to_string(window)},
            {"min_pass", num(min_pass)},
            {"steps", std::to_string(steps)},
            {"tol", num(tol)},
            {"noise_scale", num(noise_scale)},
            {"z", z}};
}

namespace {

// Theory values behind one interface so the commands do not care which pipeline runs.
struct TheorySource {
    std::function<OverlapTriple(double mu, double lam)> triple;
    std::function<KernelOverlaps(double mu, double lam)> kernel;
    std::function<std::vector<double>(const std::vector<double>&)> mu_of;   // truncated quantiles
    std::function<std::vector<double>(const std::vector<double>&)> lam_of;  // full quantiles
};

std::shared_ptr<GeneralTheory> make_general(const RunConfig& cfg) {
    const MatrixSpec spec = cfg.matrix_spec();
    if (spec.kind == MatrixSpec::Kind::Zero) return std::make_shared<GeneralTheory>(GeneralTheory::zero(cfg.ratios()));
    const Dims d = cfg.dims();
    return std::make_shared<GeneralTheory>(
        GeneralTheory::from_tables(initial_tables_from_A(spec.materialize(), d), d, cfg.t));
}

std::vector<double> eps_list(const RunConfig& cfg, double scale) {
    if (cfg.eps_schedule.empty()) return default_eps_schedule(scale);
    std::vector<double> out;
    for (const auto& s : split(cfg.eps_schedule, ',')) out.push_back(to_double(s, "--eps-schedule"));
    if (out.size() < 2) throw ParameterError("--eps-schedule needs at least two values");
    for (std::size_t k = 0; k < out.size(); ++k)
        if (!(out[k] > 0.0) || (k && !(out[k] < out[k - 1])))
            throw ParameterError("--eps-schedule must be positive and strictly decreasing");
    return out;
}

void require_zero(const RunConfig& cfg) {
    if (!cfg.a_file.empty() || !cfg.a_diag.empty())
        throw ParameterError("mode mp assumes A = 0; use --mode general with --a-file/--a-diag");
}

TheorySource make_theory(const RunConfig& cfg) {
    const ShapeRatios r = cfg.ratios();
    if (!(r.t > 0.0)) throw ParameterError("theory needs --t > 0");
    TheorySource src;
    if (cfg.mode == "mp") {
        require_zero(cfg);
        const MPSpec a = r.rho(), b = r.rhot();
        const double amax = mp_density_max(a), bmax = mp_density_max(b);
        src.triple = [r, a, b, amax, bmax](double mu, double lam) {
            if (!(mp_density(a, lam) >= 0.02 * amax) || !(mp_density(b, mu) >= 0.02 * bmax))
                throw EdgeProximityError("outside the bulk");
            return mp_overlap_triple(r, mu, lam);
        };
        src.kernel = [r](double mu, double lam) { return mp_kernel_overlaps(r, mu, lam); };
        src.mu_of = [b](const std::vector<double>& x) {
            std::vector<double> o;
            for (double v : x) o.push_back(quantile(b, v));
            return o;
        };
        src.lam_of = [a](const std::vector<double>& y) {
            std::vector<double> o;
            for (double v : y) o.push_back(quantile(a, v));
            return o;
        };
        return src;
    }
    if (cfg.mode != "general" && cfg.mode != "inversion")
        throw ParameterError("--mode must be mp, general or inversion");
    auto gt = make_general(cfg);
    src.kernel = [gt](double mu, double lam) { return gt->kernel(mu, lam); };
    src.mu_of = [gt](const std::vector<double>& x) { return gt->quantiles(true, x); };
    src.lam_of = [gt](const std::vector<double>& y) { return gt->quantiles(false, y); };
    if (cfg.mode == "general") {
        src.triple = [gt](double mu, double lam) { return gt->triple(mu, lam); };
        return src;
    }
    // Inversion: the same resolvent, but the boundary limit is taken numerically along eps.
    const ShapeRatios rr = gt->ratios();
    const Resolvent res = resolvent_at_time(
        cfg.matrix_spec().kind == MatrixSpec::Kind::Zero
            ? initial_resolvents_zero(rr)
            : initial_resolvents_from_A(initial_tables_from_A(cfg.matrix_spec().materialize(), cfg.dims()), cfg.dims()),
        [gt](cplx z) { return solve_implicit(gt->equation(), z, gt->ratios().t); },
        [gt](cplx z) { return solve_implicit(gt->equation_tilde(), z, gt->ratios().t); }, rr);
    const auto eps = eps_list(cfg, gt->lam_upper());
    src.triple = [gt, res, eps, rr](double mu, double lam) {
        const double rho = gt->boundary_G(lam).imag() / kPi, rhot = gt->boundary_Gt(mu).imag() / kPi;
        const double a = 0.02 * gt->rho_max(), b = 0.02 * gt->rhot_max();
        OverlapTriple o;
        o.vbar = invert_bulk(res, Channel::V, mu, lam, rho, rhot, rr, eps, a, b);
        o.ubar = invert_bulk(res, Channel::U, mu, lam, rho, rhot, rr, eps, a, b);
        o.wbar = invert_bulk(res, Channel::W, mu, lam, rho, rhot, rr, eps, a, b);
        return o;
    };
    return src;
}

struct XY {
    double x, y;
};

std::vector<XY> fraction_grid(const RunConfig& cfg, int default_grid) {
    std::vector<XY> out;
    if (!cfg.targets.empty()) {
        for (auto [x, y] : parse_pairs(cfg.targets, "--targets")) {
            if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)) throw ParameterError("--targets fractions must lie in (0,1)");
            out.push_back({x, y});
        }
        return out;
    }
    const int g = cfg.grid > 0 ? cfg.grid : default_grid;
    if (g > 0) {
        for (int i = 1; i <= g; ++i)
            for (int j = 1; j <= g; ++j) out.push_back({(i - 0.5) / g, (j - 0.5) / g});
        return out;
    }
    // three truncated quantiles against 15 points of the full spectrum
    for (double x : {0.1, 0.5, 0.9})
        for (int j = 1; j <= 15; ++j) out.push_back({x, (j - 0.5) / 15.0});
    return out;
}

// Edge proximity and numerical trouble become null cells instead of aborting the table.
template <class F>
bool try_eval(F&& f) {
    try {
        f();
        return true;
    } catch (const NumericalError&) {
        return false;
    }
}

}  // namespace

CommandResult cmd_density(const RunConfig& cfg) {
    const ShapeRatios r = cfg.ratios();
    if (cfg.mode != "mp" && !(r.t > 0.0)) throw ParameterError("general density needs --t > 0");
    const int grid = cfg.grid > 0 ? cfg.grid : 50;
    CommandResult res;
    res.table.columns = {"which", "lambda", "rho", "hilbert"};
    res.table.meta = cfg.echo();

    std::shared_ptr<GeneralTheory> gt;
    if (cfg.mode == "mp") {
        require_zero(cfg);
    } else if (cfg.mode == "general" || cfg.mode == "plemelj") {
        gt = make_general(cfg);
    } else {
        throw ParameterError("--mode must be mp, general or plemelj");
    }
    std::vector<std::string> which;
    if (cfg.which != "rhot") which.push_back("rho");
    if (cfg.which != "rho") which.push_back("rhot");

    for (const auto& w : which) {
        const bool tilde = w == "rhot";
        const MPSpec spec = tilde ? r.rhot() : r.rho();
        double lo = 0.0, hi = 0.0;
        if (cfg.mode == "mp") {
            std::tie(lo, hi) = mp_edges(spec);
        } else {
            hi = tilde ? gt->mu_upper() : gt->lam_upper();
        }
        if (std::isfinite(cfg.lo)) lo = cfg.lo;
        if (std::isfinite(cfg.hi)) hi = cfg.hi;
        if (!(hi > lo)) throw ParameterError("density range is empty");
        std::vector<double> eps;
        if (cfg.mode == "plemelj") eps = eps_list(cfg, hi - lo);
        const int k0 = cfg.with_edges ? 0 : 1, k1 = cfg.with_edges ? grid + 1 : grid;
        for (int k = k0; k <= k1; ++k) {
            const double lam = lo + (hi - lo) * k / (grid + 1.0);
            double rho = NAN, hil = NAN;
            if (cfg.mode == "mp") {
                rho = mp_density(spec, lam);
                const auto [elo, ehi] = mp_edges(spec);
                try_eval([&] {
                    // mp_hilbert is the in-support value and refuses lam = 0
                    hil = (lam >= elo && lam <= ehi) ? mp_hilbert(spec, lam) : mp_stieltjes(spec, lam).real();
                });
            } else if (cfg.mode == "general") {
                try_eval([&] {
                    const cplx g = tilde ? gt->boundary_Gt(lam) : gt->boundary_G(lam);
                    rho = g.imag() / kPi;
                    hil = g.real();
                });
            } else {
                const ImplicitEquation& eq = tilde ? gt->equation_tilde() : gt->equation();
                const double t = cfg.t;
                try_eval([&] {
                    const BoundaryValue bv = plemelj_boundary([&](cplx z) { return solve_implicit(eq, z, t); }, lam, eps);
                    rho = bv.density;
                    hil = bv.hilbert;
                });
            }
            res.table.add_row({w, lam, opt(rho), opt(hil)});
        }
    }
    return res;
}

CommandResult cmd_theory(const RunConfig& cfg) {
    const TheorySource th = make_theory(cfg);
    CommandResult res;
    res.table.columns = {"x", "y", "mu", "lambda", "vbar", "ubar", "wbar"};
    if (cfg.kernel) {
        res.table.columns.insert(res.table.columns.end(), {"u1", "u2", "u3"});
    }
    res.table.meta = cfg.echo();

    struct Row {
        double x, y, mu, lam;
    };
    std::vector<Row> rows;
    if (!cfg.points.empty()) {
        for (auto [mu, lam] : parse_pairs(cfg.points, "--points")) rows.push_back({NAN, NAN, mu, lam});
    } else {
        const auto xy = fraction_grid(cfg, 10);
        std::vector<double> xs, ys;
        for (auto p : xy) xs.push_back(p.x), ys.push_back(p.y);
        const auto mus = th.mu_of(xs), lams = th.lam_of(ys);
        for (std::size_t k = 0; k < xy.size(); ++k) rows.push_back({xy[k].x, xy[k].y, mus[k], lams[k]});
    }
    std::size_t nulls = 0;
    for (const auto& rw : rows) {
        OverlapTriple o{NAN, NAN, NAN};
        if (!try_eval([&] { o = th.triple(rw.mu, rw.lam); })) ++nulls;
        std::vector<Cell> row = {opt(rw.x), opt(rw.y), rw.mu, rw.lam, opt(o.vbar), opt(o.ubar), opt(o.wbar)};
        if (cfg.kernel) {
            KernelOverlaps k{NAN, NAN, NAN};
            try_eval([&] { k = th.kernel(rw.mu, rw.lam); });
            row.insert(row.end(), {opt(k.u1_of_lambda), opt(k.u2_of_mu), opt(k.u3)});
        }
        res.table.add_row(std::move(row));
    }
    res.table.meta.emplace_back("null_rows", std::to_string(nulls));
    return res;
}

namespace {

McOptions mc_options(const RunConfig& cfg) {
    if (cfg.trials < 2) throw ParameterError("--trials must be >= 2");
    McOptions o;
    o.trials = cfg.trials;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    o.window = cfg.window;
    o.select = cfg.select == "nearest" ? IndexSelection::NearestEigenvalue : IndexSelection::Fixed;
    return o;
}

std::vector<Target> make_targets(const RunConfig& cfg, const std::vector<XY>& xy, const TheorySource* th) {
    std::vector<Target> out;
    for (auto p : xy) out.push_back({p.x, p.y});
    if (cfg.select == "nearest") {
        if (!th) throw ParameterError("--select nearest needs a theory mode");
        std::vector<double> xs, ys;
        for (auto p : xy) xs.push_back(p.x), ys.push_back(p.y);
        const auto mus = th->mu_of(xs), lams = th->lam_of(ys);
        for (std::size_t k = 0; k < out.size(); ++k) out[k].mu = mus[k], out[k].lam = lams[k];
    }
    return out;
}

}  // namespace

CommandResult cmd_simulate(const RunConfig& cfg) {
    const MatrixSpec spec = cfg.matrix_spec();
    const McOptions o = mc_options(cfg);
    const auto xy = fraction_grid(cfg, 0);
    std::unique_ptr<TheorySource> th;
    if (cfg.select == "nearest") th = std::make_unique<TheorySource>(make_theory(cfg));
    const auto est = mc_rescaled_overlaps(spec, cfg.t, make_targets(cfg, xy, th.get()), o);

    CommandResult res;
    res.table.columns = {"x", "y", "i", "j", "v_mc", "v_se", "u_mc", "u_se", "w_mc", "w_se", "trials"};
    res.table.meta = cfg.echo();
    for (const auto& e : est)
        res.table.add_row({e.target.x, e.target.y, static_cast<long long>(e.i), static_cast<long long>(e.j),
                           e.v.value, e.v.se, e.u.value, e.u.se, e.w.value, e.w.se,
                           static_cast<long long>(e.v.trials)});
    if (cfg.kernel) {
        const Dims d = spec.dims;
        auto put = [&](const char* name, KernelCase kc, double frac, bool ok) {
            if (!ok) return;
            const OverlapEstimate k = mc_kernel_overlaps(spec, cfg.t, kc, frac, o);
            res.table.meta.emplace_back(std::string(name) + "_mc", num(k.value));
            res.table.meta.emplace_back(std::string(name) + "_se", num(k.se));
        };
        put("u1", KernelCase::U1, 0.5, d.m > d.n);
        put("u2", KernelCase::U2, 0.5, d.M > d.N);
        put("u3", KernelCase::U3, 0.5, d.m > d.n && d.M > d.N);
    }
    return res;
}

CommandResult cmd_compare(const RunConfig& cfg) {
    const MatrixSpec spec = cfg.matrix_spec();
    const Dims d = spec.dims;
    const McOptions o = mc_options(cfg);
    const TheorySource th = make_theory(cfg);
    const auto xy = fraction_grid(cfg, 0);
    const auto targets = make_targets(cfg, xy, &th);
    const auto est = mc_rescaled_overlaps(spec, cfg.t, targets, o);

    // Theory at mid-rank quantiles (i - 1/2)/n and (j - 1/2)/N of every index the estimator touched.
    std::vector<double> xs, ys;
    std::vector<std::pair<std::size_t, std::size_t>> ranges_i, ranges_j;
    for (const auto& e : est) {
        const std::size_t ilo = e.i > static_cast<std::size_t>(cfg.window) ? e.i - cfg.window : 1;
        const std::size_t ihi = std::min(d.n, e.i + cfg.window);
        const std::size_t jlo = e.j > static_cast<std::size_t>(cfg.window) ? e.j - cfg.window : 1;
        const std::size_t jhi = std::min(d.N, e.j + cfg.window);
        ranges_i.emplace_back(xs.size(), ihi - ilo + 1);
        for (std::size_t i = ilo; i <= ihi; ++i) xs.push_back((i - 0.5) / static_cast<double>(d.n));
        ranges_j.emplace_back(ys.size(), jhi - jlo + 1);
        for (std::size_t j = jlo; j <= jhi; ++j) ys.push_back((j - 0.5) / static_cast<double>(d.N));
    }
    const bool nearest = cfg.select == "nearest";
    const auto mus = nearest ? std::vector<double>{} : th.mu_of(xs);
    const auto lams = nearest ? std::vector<double>{} : th.lam_of(ys);

    CommandResult res;
    res.table.columns = {"lambda", "mu", "v_theory", "v_mc", "v_se", "u_theory", "u_mc", "u_se",
                         "w_theory", "w_mc", "w_se", "x", "y", "i", "j", "within_3se"};
    res.table.meta = cfg.echo();
    std::size_t evaluated = 0, passed = 0;
    for (std::size_t k = 0; k < est.size(); ++k) {
        const auto& e = est[k];
        double mu = NAN, lam = NAN;
        OverlapTriple avg{0.0, 0.0, 0.0};
        bool ok = true;
        if (nearest) {
            mu = targets[k].mu;
            lam = targets[k].lam;
            ok = try_eval([&] { avg = th.triple(mu, lam); });
        } else {
            const auto [i0, ni] = ranges_i[k];
            const auto [j0, nj] = ranges_j[k];
            mu = mus[i0 + ni / 2];
            lam = lams[j0 + nj / 2];
            for (std::size_t a = 0; a < ni && ok; ++a)
                for (std::size_t b = 0; b < nj && ok; ++b) {
                    OverlapTriple o3;
                    ok = try_eval([&] { o3 = th.triple(mus[i0 + a], lams[j0 + b]); });
                    avg.vbar += o3.vbar / (ni * nj);
                    avg.ubar += o3.ubar / (ni * nj);
                    avg.wbar += o3.wbar / (ni * nj);
                }
        }
        Cell pass = std::monostate{};
        if (ok) {
            auto within = [](double th_v, const OverlapEstimate& m) {
                return std::abs(m.value - th_v) <= 3.0 * m.se + 1e-12 * (1.0 + std::abs(th_v));
            };
            const bool p = within(avg.vbar, e.v) && within(avg.ubar, e.u) && within(avg.wbar, e.w);
            ++evaluated;
            passed += p;
            pass = static_cast<long long>(p);
        } else {
            avg = {NAN, NAN, NAN};
        }
        res.table.add_row({lam, mu, opt(avg.vbar), e.v.value, e.v.se, opt(avg.ubar), e.u.value, e.u.se,
                           opt(avg.wbar), e.w.value, e.w.se, e.target.x, e.target.y,
                           static_cast<long long>(e.i), static_cast<long long>(e.j), pass});
    }
    const double frac = evaluated ? static_cast<double>(passed) / static_cast<double>(evaluated) : 0.0;
    res.table.meta.emplace_back("points_evaluated", std::to_string(evaluated));
    res.table.meta.emplace_back("points_within_3se", std::to_string(passed));
    res.table.meta.emplace_back("pass_fraction", num(frac));
    std::ostringstream s;
    s << "compare: " << passed << "/" << evaluated << " bulk points within 3 stderr (need "
      << cfg.min_pass * 100.0 << "%)";
    res.summary = s.str();
    res.code = (evaluated > 0 && frac >= cfg.min_pass) ? kExitOk : kExitAcceptance;
    return res;
}

CommandResult cmd_burgers_check(const RunConfig& cfg) {
    const MatrixSpec spec = cfg.matrix_spec();
    if (cfg.steps == 0) throw ParameterError("--steps must be >= 1");
    std::vector<cplx> zs;
    if (!cfg.z.empty()) {
        for (auto [re, im] : parse_pairs(cfg.z, "--z")) zs.emplace_back(re, im);
    } else {
        const auto lam0 = gram_eigenvalues(spec.materialize());
        const double q = static_cast<double>(spec.dims.N) / static_cast<double>(spec.dims.M);
        const double a = std::sqrt(lam0.empty() ? 0.0 : lam0.front()) + std::sqrt(cfg.t) * (1.0 + 1.0 / std::sqrt(q));
        zs = default_z_grid(std::max(1.0, a * a));
    }
    SdeOptions so;
    so.noise_scale = cfg.noise_scale;
    const BurgersReport rep = burgers_validate(spec, cfg.t, cfg.steps, zs, cfg.seed, so);

    CommandResult res;
    res.table.columns = {"z_re", "z_im", "g_theory_re", "g_theory_im", "g_sde_re", "g_sde_im",
                         "g_direct_re", "g_direct_im", "dev_sde", "dev_direct", "residual"};
    res.table.meta = cfg.echo();
    for (std::size_t k = 0; k < rep.z.size(); ++k)
        res.table.add_row({rep.z[k].real(), rep.z[k].imag(), rep.g_theory[k].real(), rep.g_theory[k].imag(),
                           rep.g_sde[k].real(), rep.g_sde[k].imag(), rep.g_direct[k].real(),
                           rep.g_direct[k].imag(), std::abs(rep.g_sde[k] - rep.g_theory[k]),
                           std::abs(rep.g_direct[k] - rep.g_theory[k]), rep.residual[k]});
    auto& m = res.table.meta;
    m.emplace_back("ks", num(rep.ks));
    m.emplace_back("max_dev_sde", num(rep.max_dev_sde));
    m.emplace_back("max_dev_direct", num(rep.max_dev_direct));
    m.emplace_back("max_residual", num(rep.max_residual));
    m.emplace_back("sde_steps", std::to_string(rep.stats.steps));
    m.emplace_back("sde_refinements", std::to_string(rep.stats.refinements));
    m.emplace_back("warm_until", num(rep.stats.warm_until));
    const bool ok = rep.max_deviation() <= cfg.tol && rep.max_residual <= 1e-10;
    std::ostringstream s;
    s << "burgers-check: max |G_N - G| sde " << rep.max_dev_sde << ", direct " << rep.max_dev_direct
      << " (tol " << cfg.tol << "), max residual " << rep.max_residual << ", KS " << rep.ks;
    res.summary = s.str();
    res.code = ok ? kExitOk : kExitAcceptance;
    return res;
}

namespace {

void add_shape(CLI::App* sub, RunConfig& c) {
    sub->add_option("--q", c.q, "N/M")->capture_default_str();
    sub->add_option("--alpha", c.alpha, "n/N")->capture_default_str();
    sub->add_option("--beta", c.beta, "m/M")->capture_default_str();
    sub->add_option("--t", c.t, "noise time")->capture_default_str();
    sub->add_option("--out", c.out, "output path, - for stdout")->capture_default_str();
    sub->add_option("--format", c.format, "csv or json")->capture_default_str();
    sub->add_option("--threads", c.threads, "worker threads (0: OVERLAPKIT_THREADS or all cores)");
}

void add_matrix(CLI::App* sub, RunConfig& c) {
    sub->add_option("--M", c.M, "rows of X")->capture_default_str();
    sub->add_option("--a-file", c.a_file, "A as CSV or binary");
    sub->add_option("--a-diag", c.a_diag, "diagonal of A, e.g. 1*200,2*200");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Singular-vector overlaps of noisy rectangular matrices and their truncations"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto* dens = app.add_subcommand("density", "spectral densities and Hilbert transforms");
    add_shape(dens, c);
    add_matrix(dens, c);
    dens->add_option("--grid", c.grid, "interior grid points (default 50)");
    dens->add_option("--mode", c.mode, "mp, general or plemelj")->capture_default_str();
    dens->add_option("--which", c.which, "rho, rhot or both")->capture_default_str();
    dens->add_flag("--with-edges", c.with_edges, "include the interval end points");
    dens->add_option("--lo", c.lo, "override the lower end of the grid");
    dens->add_option("--hi", c.hi, "override the upper end of the grid");
    dens->add_option("--eps-schedule", c.eps_schedule, "decreasing eps values for plemelj mode");

    auto* theo = app.add_subcommand("theory", "limiting rescaled overlaps");
    add_shape(theo, c);
    add_matrix(theo, c);
    theo->add_option("--grid", c.grid, "fraction grid per axis (default 10)");
    theo->add_option("--mode", c.mode, "mp, general or inversion")->capture_default_str();
    theo->add_option("--targets", c.targets, "x:y quantile fractions");
    theo->add_option("--points", c.points, "mu:lambda eigenvalue pairs");
    theo->add_flag("--kernel", c.kernel, "add kernel overlap columns");
    theo->add_option("--eps-schedule", c.eps_schedule, "decreasing eps values for inversion mode");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo overlap estimates");
    auto* cmp = app.add_subcommand("compare", "theory against Monte Carlo with a 3-stderr test");
    for (auto* sub : {sim, cmp}) {
        add_shape(sub, c);
        add_matrix(sub, c);
        sub->add_option("--trials", c.trials, "Monte Carlo trials")->capture_default_str();
        sub->add_option("--seed", c.seed, "base seed")->capture_default_str();
        sub->add_option("--grid", c.grid, "fraction grid per axis (default: 3 x 15 points)");
        sub->add_option("--targets", c.targets, "x:y quantile fractions");
        sub->add_option("--select", c.select, "fixed or nearest")->capture_default_str();
        sub->add_option("--window", c.window, "average over +-window indices")->capture_default_str();
        sub->add_option("--mode", c.mode, "theory mode: mp or general")->capture_default_str();
        sub->add_option("--eps-schedule", c.eps_schedule, "decreasing eps values for inversion mode");
    }
    sim->add_flag("--kernel", c.kernel, "also estimate the kernel overlaps");
    cmp->add_option("--min-pass", c.min_pass, "required fraction of points within 3 stderr")->capture_default_str();

    auto* bur = app.add_subcommand("burgers-check", "eigenvalue SDE and direct sampling against the implicit equation");
    add_shape(bur, c);
    add_matrix(bur, c);
    bur->add_option("--seed", c.seed, "seed")->capture_default_str();
    bur->add_option("--steps", c.steps, "SDE steps")->capture_default_str();
    bur->add_option("--tol", c.tol, "largest accepted |G_N - G|")->capture_default_str();
    bur->add_option("--noise-scale", c.noise_scale, "scale of the SDE noise")->capture_default_str();
    bur->add_option("--z", c.z, "re:im evaluation points");

    std::vector<const char*> argv{"overlapkit"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        c.command = app.get_subcommands().front()->get_name();
        c.validate();
        CommandResult res;
        if (c.command == "density") res = cmd_density(c);
        else if (c.command == "theory") res = cmd_theory(c);
        else if (c.command == "simulate") res = cmd_simulate(c);
        else if (c.command == "compare") res = cmd_compare(c);
        else res = cmd_burgers_check(c);

        std::ofstream file;
        std::ostream* dst = &out;
        if (c.out != "-") {
            file.open(c.out);
            if (!file) throw ParameterError("cannot write " + c.out);
            dst = &file;
        }
        if (c.format == "json") write_json(res.table, *dst);
        else write_csv(res.table, *dst);
        dst->flush();
        if (!res.summary.empty()) err << res.summary << '\n';
        return res.code;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace overlapkit
