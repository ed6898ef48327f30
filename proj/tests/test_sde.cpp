#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "overlapkit/ensemble.hpp"
#include "overlapkit/errors.hpp"
#include "overlapkit/sde.hpp"
#include "overlapkit/spectral.hpp"

using namespace overlapkit;

namespace {

bool strictly_ordered(const std::vector<double>& e) {
    for (std::size_t j = 0; j + 1 < e.size(); ++j)
        if (!(e[j] > e[j + 1])) return false;
    return e.empty() || e.back() > 0.0;
}

}  // namespace

TEST_SUITE("sde") {

TEST_CASE("zero noise, one eigenvalue: linear growth") {
    SdeOptions o;
    o.noise_scale = 0.0;
    const EigenState s0{0.0, {2.0}, Dims{1, 1, 1, 1}};
    // d(lam) = (M - N + 1) / N dt with no noise, i.e. lam0 + t here
    CHECK(integrate(s0, 1.5, 1000, 1, o).eigs[0] == doctest::Approx(3.5).epsilon(1e-4));
    const EigenState s1{0.0, {2.0}, Dims{4, 1, 1, 1}};
    CHECK(integrate(s1, 0.5, 1000, 1, o).eigs[0] == doctest::Approx(2.0 + 4 * 0.5).epsilon(1e-4));
}

TEST_CASE("zero noise, two eigenvalues repel") {
    SdeOptions o;
    o.noise_scale = 0.0;
    const EigenState s0{0.0, {1.0, 0.99}, Dims{3, 2, 2, 1}};
    SdeStats st;
    const EigenState s = integrate(s0, 0.2, 64, 1, o, &st);
    CHECK(s.eigs[0] - s.eigs[1] > 0.01);
    CHECK(strictly_ordered(s.eigs));
    CHECK(st.steps == 64);
}

TEST_CASE("first moment and top-eigenvalue law match direct sampling") {
    const Dims d{5, 3, 3, 2};
    const std::vector<double> lam0{2.0, 1.0, 0.5};
    const double t = 1.0;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(5, 3);
    for (int k = 0; k < 3; ++k) A(k, k) = std::sqrt(lam0[k]);
    const int P = 1000;
    double sum = 0.0;
    std::vector<double> top_sde, top_direct;
    for (int p = 0; p < P; ++p) {
        const EigenState s = integrate({0.0, lam0, d}, t, 64, 1000 + p);
        CHECK(strictly_ordered(s.eigs));
        for (double e : s.eigs) sum += e;
        top_sde.push_back(s.eigs[0]);
        top_direct.push_back(gram_eigenvalues(sample_ensemble(A, d, t, 5000 + p).X)[0]);
    }
    // E tr X^T X = tr A^T A + M t
    const double expected = 3.5 + 5.0 * t;
    CHECK(sum / P == doctest::Approx(expected).epsilon(0.03));
    CHECK(ks_distance(top_sde, top_direct) < 0.08);
}

TEST_CASE("ordering holds along a long noisy run") {
    const Dims d{60, 50, 40, 20};
    std::vector<double> lam0(50);
    for (int j = 0; j < 50; ++j) lam0[j] = 3.0 - 0.05 * j;
    SdeStats st;
    const EigenState s = integrate({0.0, lam0, d}, 2.0, 256, 3, {}, &st);
    CHECK(strictly_ordered(s.eigs));
    CHECK(st.closest_gap > 0.0);
    CHECK(s.t == 2.0);
}

TEST_CASE("burgers check at t = 0 is exact") {
    const Dims d{50, 40, 30, 20};
    std::vector<double> diag(40);
    for (int k = 0; k < 40; ++k) diag[k] = 0.5 + 0.1 * k;
    const BurgersReport r = burgers_validate(MatrixSpec::diagonal(d, diag), 0.0, 16, default_z_grid(10.0), 1);
    CHECK(r.max_deviation() < 1e-12);
    CHECK(r.max_residual < 1e-12);
}

TEST_CASE("A = 0, N = 400: SDE and direct sample agree with the implicit equation") {
    const Dims d{444, 400, 400, 400};
    const BurgersReport r = burgers_validate(MatrixSpec::zero(d), 1.0, 256, {cplx(5.0, 1.0)}, 7);
    // closed form as an independent reference for the implicit solve
    const cplx ref = mp_stieltjes(MPSpec{1.0, 444.0 / 400.0, 1.0}, cplx(5.0, 1.0));
    CHECK(std::abs(r.g_theory[0] - ref) < 1e-10);
    CHECK(std::abs(r.g_sde[0] - ref) < 0.05);
    CHECK(std::abs(r.g_direct[0] - ref) < 0.05);
    CHECK(r.ks <= 0.08);
    CHECK(r.stats.warm_until > 0.0);  // zero initial spectrum needs the warm start
}

TEST_CASE("SDE endpoint spectrum follows Marchenko-Pastur") {
    const Dims d{250, 200, 200, 200};
    const MPSpec mp{1.0, 250.0 / 200.0, 1.0};
    std::vector<double> ks;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const EigenState s = integrate({0.0, std::vector<double>(200, 0.0), d}, 1.0, 64, seed);
        ks.push_back(ks_distance(s.eigs, [&](double x) { return 1.0 - mp_tail_mass(mp, x); }));
    }
    std::nth_element(ks.begin(), ks.begin() + 5, ks.end());
    CHECK(ks[5] <= 5.0 / std::sqrt(200.0));
}

TEST_CASE("strong convergence under refinement of one Brownian path") {
    const Dims d{30, 20, 20, 10};
    std::vector<double> lam0(20);
    for (int j = 0; j < 20; ++j) lam0[j] = 2.0 - 0.08 * j;
    SdeOptions o;
    o.base_steps = 8;
    const EigenState ref = integrate({0.0, lam0, d}, 0.5, 8 << 9, 11, o);
    std::vector<double> logdt, logerr;
    for (int L = 0; L <= 4; ++L) {
        const EigenState s = integrate({0.0, lam0, d}, 0.5, 8u << L, 11, o);
        double err = 0.0;
        for (std::size_t j = 0; j < 20; ++j) err = std::max(err, std::abs(s.eigs[j] - ref.eigs[j]));
        logdt.push_back(std::log(0.5 / (8 << L)));
        logerr.push_back(std::log(err));
    }
    // least-squares slope of log error against log dt
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < logdt.size(); ++k) mx += logdt[k], my += logerr[k];
    mx /= logdt.size();
    my /= logdt.size();
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < logdt.size(); ++k) {
        sxy += (logdt[k] - mx) * (logerr[k] - my);
        sxx += (logdt[k] - mx) * (logdt[k] - mx);
    }
    CHECK(sxy / sxx >= 0.8);
}

TEST_CASE("failures: unconvergeable step and oversized noise") {
    SdeOptions o;
    o.max_newton = 1;
    o.tol = 0.0;
    o.max_refine = 2;
    const EigenState s0{0.0, {2.0, 1.0, 0.5}, Dims{5, 3, 3, 2}};
    CHECK_THROWS_AS(integrate(s0, 1.0, 4, 1, o), StiffnessError);
    CHECK_THROWS_AS(bru_step(s0, 0.1, 1, 0, o), StiffnessError);
    SdeOptions big;
    big.noise_scale = 2.0;  // 4 > M - N + 1 = 3
    CHECK_THROWS_AS(integrate(s0, 1.0, 4, 1, big), ParameterError);
    CHECK_THROWS_AS(integrate(s0, 1.0, 6, 1, SdeOptions{1.0, 10, 1e-12, 60, 4}), ParameterError);
    CHECK_THROWS_AS((EigenState{0.0, {1.0, 1.0, 0.5}, Dims{5, 3, 3, 2}}.validate()), ParameterError);
    CHECK_THROWS_AS(burgers_validate(MatrixSpec::zero(Dims{5, 3, 3, 2}), 1.0, 4, {cplx(1.0, 0.01)}, 1),
                    ParameterError);
}

TEST_CASE("ks distance against hand values") {
    CHECK(ks_distance({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(ks_distance({1.0, 2.0}, {3.0, 4.0}) == 1.0);
    CHECK(ks_distance({0.5}, [](double x) { return x; }) == doctest::Approx(0.5));
}

}  // TEST_SUITE
