#include "overlapkit/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "overlapkit/errors.hpp"
#include "overlapkit/matrix_io.hpp"
#include "overlapkit/parallel.hpp"
#include "overlapkit/rng.hpp"

namespace overlapkit {

MatrixSpec MatrixSpec::zero(const Dims& d) {
    MatrixSpec s;
    s.dims = d;
    s.validate();
    return s;
}

MatrixSpec MatrixSpec::diagonal(const Dims& d, std::vector<double> values) {
    MatrixSpec s;
    s.kind = Kind::Diagonal;
    s.dims = d;
    s.diag = std::move(values);
    s.validate();
    return s;
}

MatrixSpec MatrixSpec::file(const Dims& d, std::string path) {
    MatrixSpec s;
    s.kind = Kind::File;
    s.dims = d;
    s.path = std::move(path);
    s.validate();
    return s;
}

void MatrixSpec::validate() const {
    dims.validate();
    if (kind == Kind::Diagonal && diag.size() > std::min(dims.M, dims.N))
        throw ParameterError("diagonal has " + std::to_string(diag.size()) + " entries, more than min(M,N)");
    if (kind == Kind::File && path.empty()) throw ParameterError("matrix file path is empty");
}

Eigen::MatrixXd MatrixSpec::materialize() const {
    validate();
    const auto M = static_cast<Eigen::Index>(dims.M), N = static_cast<Eigen::Index>(dims.N);
    switch (kind) {
        case Kind::Zero:
            return Eigen::MatrixXd::Zero(M, N);
        case Kind::Diagonal: {
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M, N);
            for (std::size_t k = 0; k < diag.size(); ++k) A(k, k) = diag[k];
            return A;
        }
        case Kind::File: {
            Eigen::MatrixXd A = read_matrix(path);
            if (A.rows() != M || A.cols() != N)
                throw ParameterError(path + " is " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                                     ", expected " + std::to_string(M) + "x" + std::to_string(N));
            return A;
        }
    }
    return {};
}

EnsembleSample sample_ensemble(const Eigen::MatrixXd& A, const Dims& dims, double t,
                               std::uint64_t seed, std::uint64_t stream) {
    dims.validate();
    if (!(t >= 0.0)) throw ParameterError("t must be >= 0");
    if (A.rows() != static_cast<Eigen::Index>(dims.M) || A.cols() != static_cast<Eigen::Index>(dims.N))
        throw ParameterError("A has the wrong shape for the given dims");
    EnsembleSample s;
    s.X = A;
    if (t > 0.0) {
        const NormalStream z(seed, stream);
        const double scale = std::sqrt(t / static_cast<double>(dims.N));
        // column-major fill; entry (r, c) always uses index c*M + r
        double* p = s.X.data();
        for (Eigen::Index k = 0; k < s.X.size(); ++k) p[k] += scale * z(static_cast<std::uint64_t>(k));
    }
    s.Xtrunc = Eigen::MatrixXd::Zero(s.X.rows(), s.X.cols());
    s.Xtrunc.topLeftCorner(dims.m, dims.n) = s.X.topLeftCorner(dims.m, dims.n);
    return s;
}

EnsembleSample sample_ensemble(const MatrixSpec& spec, double t, std::uint64_t seed,
                               std::uint64_t stream) {
    return sample_ensemble(spec.materialize(), spec.dims, t, seed, stream);
}

namespace {

// index of the first component that is not negligible
Eigen::Index first_nonzero(const Eigen::VectorXd& v) {
    const double cut = 1e-12 * v.cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < v.size(); ++r)
        if (std::abs(v(r)) > cut) return r;
    return 0;
}

}  // namespace

void canonicalize_signs(SvdTriplet& s, std::size_t paired) {
    const auto P = static_cast<Eigen::Index>(std::min<std::size_t>(paired, s.right.cols()));
    for (Eigen::Index k = 0; k < P; ++k) {
        const Eigen::VectorXd col = s.right.col(k);
        if (col(first_nonzero(col)) < 0.0) {
            s.right.col(k) *= -1.0;
            s.left.col(k) *= -1.0;
        }
    }
    for (Eigen::Index k = P; k < s.right.cols(); ++k) {
        const Eigen::VectorXd col = s.right.col(k);
        if (col(first_nonzero(col)) < 0.0) s.right.col(k) *= -1.0;
    }
    for (Eigen::Index k = P; k < s.left.cols(); ++k) {
        const Eigen::VectorXd col = s.left.col(k);
        if (col(first_nonzero(col)) < 0.0) s.left.col(k) *= -1.0;
    }
}

SvdTriplet svd_full(const Eigen::MatrixXd& X) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    SvdTriplet s{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    canonicalize_signs(s, static_cast<std::size_t>(X.cols()));
    return s;
}

SvdTriplet svd_truncated(const Eigen::MatrixXd& Xtrunc, const Dims& dims) {
    dims.validate();
    const auto M = static_cast<Eigen::Index>(dims.M), N = static_cast<Eigen::Index>(dims.N);
    const auto m = static_cast<Eigen::Index>(dims.m), n = static_cast<Eigen::Index>(dims.n);
    if (Xtrunc.rows() != M || Xtrunc.cols() != N) throw ParameterError("Xtrunc has the wrong shape");
    const Eigen::MatrixXd B = Xtrunc.topLeftCorner(m, n);
    const double outside = Xtrunc.bottomRows(M - m).cwiseAbs().sum() +
                           Xtrunc.topRightCorner(m, N - n).cwiseAbs().sum();
    if (outside != 0.0) throw ParameterError("Xtrunc has entries outside the top-left m x n block");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (!(sv(n - 1) > 1e-12 * std::max(1.0, sv(0))))
        throw DegenerateSampleError("truncated block is rank deficient (smallest singular value " +
                                    std::to_string(sv(n - 1)) + ")");

    SvdTriplet s;
    // the full m x m U carries the in-block completion for columns n+1..m
    s.left = Eigen::MatrixXd::Identity(M, M);
    s.left.topLeftCorner(m, m) = svd.matrixU();
    s.right = Eigen::MatrixXd::Identity(N, N);
    s.right.topLeftCorner(n, n) = svd.matrixV();
    s.svals = Eigen::VectorXd::Zero(N);
    s.svals.head(n) = sv;
    canonicalize_signs(s, dims.n);
    return s;
}

OverlapTables overlap_matrices(const SvdTriplet& full, const SvdTriplet& trunc, const Dims& dims) {
    const auto M = static_cast<Eigen::Index>(dims.M), N = static_cast<Eigen::Index>(dims.N);
    const auto m = static_cast<Eigen::Index>(dims.m), n = static_cast<Eigen::Index>(dims.n);
    if (full.left.rows() != M || full.left.cols() != M || full.right.rows() != N || full.right.cols() != N ||
        trunc.left.rows() != M || trunc.left.cols() != M || trunc.right.rows() != N || trunc.right.cols() != N)
        throw ParameterError("triplets do not match dims");
    // truncated vectors vanish outside their block, so only the block rows contribute
    const Eigen::MatrixXd pv = trunc.right.topLeftCorner(n, n).transpose() * full.right.topRows(n);  // n x N
    const Eigen::MatrixXd pu = trunc.left.topLeftCorner(m, m).transpose() * full.left.topRows(m);   // m x M
    OverlapTables out;
    out.V = pv.array().square();
    out.U = pu.array().square();
    out.W = pv.array() * pu.topLeftCorner(n, N).array();
    return out;
}

OverlapEstimate summarize(const std::vector<double>& x) {
    OverlapEstimate e;
    e.trials = x.size();
    if (x.empty()) return e;
    const double T = static_cast<double>(x.size());
    e.value = pairwise_sum(x) / T;
    if (x.size() > 1) {
        std::vector<double> dev(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) dev[k] = (x[k] - e.value) * (x[k] - e.value);
        e.se = std::sqrt(pairwise_sum(dev) / (T - 1.0) / T);
    }
    return e;
}

std::size_t fraction_to_index(double x, std::size_t n) {
    const long long r = std::llround(x * static_cast<double>(n));
    return static_cast<std::size_t>(std::clamp<long long>(r, 1, static_cast<long long>(n)));
}

std::pair<SvdTriplet, SvdTriplet> sample_frames(const Eigen::MatrixXd& A, const Dims& dims,
                                                double t, std::uint64_t seed, std::uint64_t trial,
                                                int max_resample) {
    for (int attempt = 0; attempt <= max_resample; ++attempt) {
        const auto smp = sample_ensemble(A, dims, t, seed,
                                         make_stream(StreamDomain::Ensemble, trial, static_cast<std::uint64_t>(attempt)));
        try {
            SvdTriplet trunc = svd_truncated(smp.Xtrunc, dims);
            return {svd_full(smp.X), std::move(trunc)};
        } catch (const DegenerateSampleError&) {
        }
    }
    throw DegenerateSampleError("trial " + std::to_string(trial) + ": degenerate after " +
                                std::to_string(max_resample) + " resamples");
}

namespace {

void check_mc(const McOptions& o) {
    if (o.trials < 2) throw ParameterError("need at least 2 trials");
    if (o.window < 0) throw ParameterError("window must be >= 0");
    if (o.max_resample < 0) throw ParameterError("max_resample must be >= 0");
}

struct IndexRange {
    std::size_t lo, hi;  // 0-based, inclusive
};

IndexRange around(std::size_t idx1, int w, std::size_t n) {
    const long long c = static_cast<long long>(idx1) - 1;
    return {static_cast<std::size_t>(std::max<long long>(0, c - w)),
            static_cast<std::size_t>(std::min<long long>(static_cast<long long>(n) - 1, c + w))};
}

std::size_t nearest(const Eigen::VectorXd& svals, std::size_t count, double target) {
    std::size_t best = 0;
    double bd = std::abs(svals(0) * svals(0) - target);
    for (std::size_t k = 1; k < count; ++k) {
        const double d = std::abs(svals(k) * svals(k) - target);
        if (d < bd) bd = d, best = k;
    }
    return best + 1;
}

double block_mean(const Eigen::MatrixXd& T, IndexRange r, IndexRange c) {
    return T.block(r.lo, c.lo, r.hi - r.lo + 1, c.hi - c.lo + 1).mean();
}

}  // namespace

std::vector<TargetEstimate> mc_rescaled_overlaps(const MatrixSpec& spec, double t,
                                                 const std::vector<Target>& targets,
                                                 const McOptions& opts) {
    check_mc(opts);
    const Dims& d = spec.dims;
    for (const auto& tg : targets) {
        if (!(tg.x > 0.0 && tg.x < 1.0 && tg.y > 0.0 && tg.y < 1.0))
            throw ParameterError("target fractions must lie in (0,1)");
        if (opts.select == IndexSelection::NearestEigenvalue && !(std::isfinite(tg.mu) && std::isfinite(tg.lam)))
            throw ParameterError("nearest-eigenvalue selection needs eigenvalue targets");
    }
    const Eigen::MatrixXd A = spec.materialize();
    const double Nd = static_cast<double>(d.N);
    const std::size_t K = targets.size();
    // per_trial[k][trial] for channel V, U, W
    std::vector<std::vector<double>> pv(K, std::vector<double>(opts.trials)), pu = pv, pw = pv;

    parallel_for(opts.trials, resolve_threads(opts.threads), [&](std::size_t trial) {
        const auto [full, trunc] = sample_frames(A, d, t, opts.seed, trial, opts.max_resample);
        const OverlapTables tab = overlap_matrices(full, trunc, d);
        for (std::size_t k = 0; k < K; ++k) {
            std::size_t i = fraction_to_index(targets[k].x, d.n), j = fraction_to_index(targets[k].y, d.N);
            if (opts.select == IndexSelection::NearestEigenvalue) {
                i = nearest(trunc.svals, d.n, targets[k].mu);
                j = nearest(full.svals, d.N, targets[k].lam);
            }
            const IndexRange ri = around(i, opts.window, d.n), rj = around(j, opts.window, d.N);
            pv[k][trial] = Nd * block_mean(tab.V, ri, rj);
            pu[k][trial] = Nd * block_mean(tab.U, ri, rj);
            pw[k][trial] = Nd * block_mean(tab.W, ri, rj);
        }
    });

    std::vector<TargetEstimate> out(K);
    for (std::size_t k = 0; k < K; ++k) {
        out[k].target = targets[k];
        out[k].i = fraction_to_index(targets[k].x, d.n);
        out[k].j = fraction_to_index(targets[k].y, d.N);
        out[k].v = summarize(pv[k]);
        out[k].u = summarize(pu[k]);
        out[k].w = summarize(pw[k]);
    }
    return out;
}

OverlapEstimate mc_kernel_overlaps(const MatrixSpec& spec, double t, KernelCase which,
                                   double frac, const McOptions& opts) {
    check_mc(opts);
    const Dims& d = spec.dims;
    const bool need_i = which != KernelCase::U2, need_j = which != KernelCase::U1;
    if (need_i && d.m == d.n) throw ParameterError("m == n: no truncated null-space indices");
    if (need_j && d.M == d.N) throw ParameterError("M == N: no full null-space indices");
    if (which != KernelCase::U3 && !(frac > 0.0 && frac < 1.0)) throw ParameterError("fraction must lie in (0,1)");

    IndexRange ri{d.n, d.m - 1}, rj{d.N, d.M - 1};
    if (which == KernelCase::U1) rj = around(fraction_to_index(frac, d.N), opts.window, d.N);
    if (which == KernelCase::U2) ri = around(fraction_to_index(frac, d.n), opts.window, d.n);

    const Eigen::MatrixXd A = spec.materialize();
    std::vector<double> vals(opts.trials);
    parallel_for(opts.trials, resolve_threads(opts.threads), [&](std::size_t trial) {
        const auto [full, trunc] = sample_frames(A, d, t, opts.seed, trial, opts.max_resample);
        const OverlapTables tab = overlap_matrices(full, trunc, d);
        vals[trial] = static_cast<double>(d.N) * block_mean(tab.U, ri, rj);
    });
    return summarize(vals);
}

namespace {

std::vector<std::size_t> spread(std::size_t count, std::size_t hi) {
    std::vector<std::size_t> v;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t idx = 1 + static_cast<std::size_t>(std::llround(static_cast<double>(k) * (hi - 1) / (count - 1.0)));
        if (v.empty() || v.back() != idx) v.push_back(idx);
    }
    return v;
}

void check_indices(const std::vector<std::size_t>& v, std::size_t hi, const char* name) {
    for (auto x : v)
        if (x < 1 || x > hi) throw ParameterError(std::string("correlation index ") + name + " out of range");
}

}  // namespace

double correlation_identity_test(const Dims& dims, double t, double dt, std::size_t samples,
                                 std::uint64_t seed, const CorrelationOptions& opts) {
    dims.validate();
    if (!(t > 0.0)) throw ParameterError("correlation test needs t > 0");
    if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
    if (samples < 2) throw ParameterError("need at least 2 samples");
    const auto I = opts.i.empty() ? spread(5, dims.m) : opts.i;
    const auto L = opts.l.empty() ? spread(5, dims.n) : opts.l;
    const auto J = opts.j.empty() ? spread(5, dims.M) : opts.j;
    const auto K = opts.k.empty() ? spread(5, dims.N) : opts.k;
    check_indices(I, dims.m, "i");
    check_indices(L, dims.n, "l");
    check_indices(J, dims.M, "j");
    check_indices(K, dims.N, "k");

    const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dims.M, dims.N);
    const auto [full, trunc] = sample_frames(A, dims, t, seed, 0, 100);

    auto cols = [](const Eigen::MatrixXd& F, const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd out(F.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) out.col(c) = F.col(idx[c] - 1);
        return out;
    };
    const Eigen::MatrixXd UJ = cols(full.left, J), VK = cols(full.right, K);
    const Eigen::MatrixXd UI = cols(trunc.left, I), VL = cols(trunc.right, L);
    const auto m = static_cast<Eigen::Index>(dims.m), n = static_cast<Eigen::Index>(dims.n);
    const auto na = static_cast<Eigen::Index>(J.size() * K.size());
    const auto nb = static_cast<Eigen::Index>(I.size() * L.size());

    Eigen::MatrixXd sab = Eigen::MatrixXd::Zero(na, nb);
    Eigen::VectorXd sa = Eigen::VectorXd::Zero(na), sb = Eigen::VectorXd::Zero(nb);
    Eigen::MatrixXd dB(dims.M, dims.N);
    const double sd = std::sqrt(dt);
    for (std::size_t s = 0; s < samples; ++s) {
        const NormalStream z(seed, make_stream(StreamDomain::Correlation, s));
        for (Eigen::Index k = 0; k < dB.size(); ++k) dB.data()[k] = sd * z(static_cast<std::uint64_t>(k));
        const Eigen::MatrixXd a = UJ.transpose() * dB * VK;  // |J| x |K|
        const Eigen::MatrixXd b = UI.topRows(m).transpose() * dB.topLeftCorner(m, n) * VL.topRows(n);
        const Eigen::Map<const Eigen::VectorXd> av(a.data(), na), bv(b.data(), nb);
        sab.noalias() += av * bv.transpose();
        sa += av;
        sb += bv;
    }
    const double S = static_cast<double>(samples);
    const Eigen::MatrixXd cov = (sab - sa * sb.transpose() / S) / (S - 1.0);

    const Eigen::MatrixXd pu = UI.transpose() * UJ;  // <u~_i, u_j>
    const Eigen::MatrixXd pv = VL.transpose() * VK;  // <v~_l, v_k>
    double worst = 0.0;
    if (opts.entries) opts.entries->clear();
    for (std::size_t jj = 0; jj < J.size(); ++jj)
        for (std::size_t kk = 0; kk < K.size(); ++kk)
            for (std::size_t ii = 0; ii < I.size(); ++ii)
                for (std::size_t ll = 0; ll < L.size(); ++ll) {
                    const auto ra = static_cast<Eigen::Index>(jj + J.size() * kk);  // column-major a
                    const auto cb = static_cast<Eigen::Index>(ii + I.size() * ll);
                    const double meas = cov(ra, cb) / dt;
                    const double expct = pu(ii, jj) * pv(ll, kk);
                    worst = std::max(worst, std::abs(meas - expct));
                    if (opts.entries) opts.entries->push_back({I[ii], L[ll], J[jj], K[kk], meas, expct});
                }
    return worst;
}

}  // namespace overlapkit
