#include <doctest.h>

#include <cmath>
#include <vector>

#include "overlapkit/ensemble.hpp"
#include "overlapkit/errors.hpp"
#include "overlapkit/parallel.hpp"
#include "overlapkit/rng.hpp"

using namespace overlapkit;

TEST_SUITE("ensemble") {

TEST_CASE("philox known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal stream moments and addressing") {
    const NormalStream z(7, make_stream(StreamDomain::Ensemble, 3));
    const std::size_t n = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double x = z(k);
        s1 += x;
        s2 += x * x;
        s4 += x * x * x * x;
    }
    CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(double(n)));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
    CHECK(z(12345) == z(12345));
    const NormalStream other(7, make_stream(StreamDomain::Ensemble, 4));
    CHECK(z(0) != other(0));
    for (std::size_t k = 0; k < 1000; ++k) {
        const double u = z.uniform(k);
        CHECK((u > 0.0 && u < 1.0));
    }
}

TEST_CASE("ensemble sampling: t = 0, truncation and noise variance") {
    const Dims d{40, 30, 20, 12};
    std::vector<double> diag(30);
    for (int k = 0; k < 30; ++k) diag[k] = 1.0 + k;
    const MatrixSpec spec = MatrixSpec::diagonal(d, diag);
    const Eigen::MatrixXd A = spec.materialize();
    const EnsembleSample s0 = sample_ensemble(spec, 0.0, 5);
    CHECK((s0.X - A).norm() == 0.0);

    const double t = 2.0;
    const EnsembleSample s = sample_ensemble(spec, t, 5);
    CHECK(s.Xtrunc.block(0, 0, 20, 12) == s.X.block(0, 0, 20, 12));
    CHECK(s.Xtrunc.block(20, 0, 20, 30).norm() == 0.0);
    CHECK(s.Xtrunc.block(0, 12, 40, 18).norm() == 0.0);
    // pooled variance of the noise over several samples
    double ss = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) ss += (sample_ensemble(spec, t, 100 + r).X - A).squaredNorm();
    CHECK(ss / (reps * 40.0 * 30.0) == doctest::Approx(t / 30.0).epsilon(0.05));
}

TEST_CASE("null-space completion and orthonormal frames") {
    const Dims d{4, 2, 2, 1};
    Eigen::MatrixXd X(4, 2);
    X << 2.0, 0.3, -0.5, 1.0, 0.7, 0.2, 0.1, -0.4;
    Eigen::MatrixXd Xt = Eigen::MatrixXd::Zero(4, 2);
    Xt.block(0, 0, 2, 1) = X.block(0, 0, 2, 1);
    const SvdTriplet tr = svd_truncated(Xt, d);
    CHECK((tr.left.col(2) - Eigen::Vector4d(0, 0, 1, 0)).norm() < 1e-15);
    CHECK((tr.left.col(3) - Eigen::Vector4d(0, 0, 0, 1)).norm() < 1e-15);
    CHECK(std::abs(tr.left.col(1).tail(2).norm()) < 1e-15);  // completes the block inside m rows
    const SvdTriplet fu = svd_full(X);
    const Eigen::MatrixXd I4 = Eigen::MatrixXd::Identity(4, 4), I2 = Eigen::MatrixXd::Identity(2, 2);
    CHECK((tr.left.transpose() * tr.left - I4).norm() < 1e-13);
    CHECK((tr.right.transpose() * tr.right - I2).norm() < 1e-13);
    CHECK((fu.left.transpose() * fu.left - I4).norm() < 1e-13);
    CHECK((fu.right.transpose() * fu.right - I2).norm() < 1e-13);
    // reconstruct X from the triplet
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(4, 2);
    S(0, 0) = fu.svals(0);
    S(1, 1) = fu.svals(1);
    CHECK((fu.left * S * fu.right.transpose() - X).norm() < 1e-13);
}

TEST_CASE("overlap tables: row sums and identity truncation") {
    const Dims d{30, 24, 20, 10};
    const MatrixSpec spec = MatrixSpec::zero(d);
    const auto [full, trunc] = sample_frames(spec.materialize(), d, 1.0, 3, 0, 10);
    const OverlapTables o = overlap_matrices(full, trunc, d);
    for (Eigen::Index i = 0; i < o.V.rows(); ++i) CHECK(o.V.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index i = 0; i < o.U.rows(); ++i) CHECK(o.U.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));

    // a block that is the whole matrix gives identity overlaps
    const Dims same{30, 24, 30, 24};
    const auto [f2, t2] = sample_frames(Eigen::MatrixXd::Zero(30, 24), same, 1.0, 3, 0, 10);
    const OverlapTables id = overlap_matrices(f2, t2, same);
    CHECK((id.V - Eigen::MatrixXd::Identity(24, 24)).norm() < 1e-10);
    CHECK((id.U.topLeftCorner(24, 24) - Eigen::MatrixXd::Identity(24, 24)).norm() < 1e-10);
    CHECK((id.W - Eigen::MatrixXd::Identity(24, 24)).norm() < 1e-10);
}

TEST_CASE("overlaps do not depend on singular vector signs") {
    const Dims d{20, 15, 12, 8};
    const auto [full, trunc] = sample_frames(Eigen::MatrixXd::Zero(20, 15), d, 1.0, 9, 0, 10);
    const OverlapTables a = overlap_matrices(full, trunc, d);
    SvdTriplet f2 = full, t2 = trunc;
    for (int k : {0, 3, 7}) {
        f2.left.col(k) *= -1.0;
        f2.right.col(k) *= -1.0;
        t2.left.col(k) *= -1.0;
        t2.right.col(k) *= -1.0;
    }
    const OverlapTables b = overlap_matrices(f2, t2, d);
    CHECK((a.V - b.V).norm() < 1e-14);
    CHECK((a.U - b.U).norm() < 1e-14);
    CHECK((a.W - b.W).norm() < 1e-14);
    // canonicalisation undoes the flips
    canonicalize_signs(f2, 15);
    CHECK((f2.right - full.right).norm() < 1e-14);
}

TEST_CASE("scalar case: everything is one") {
    const Dims d{1, 1, 1, 1};
    McOptions o;
    o.trials = 5;
    const auto est = mc_rescaled_overlaps(MatrixSpec::zero(d), 1.0, {{0.5, 0.5}}, o);
    CHECK(est[0].v.value == doctest::Approx(1.0));
    CHECK(est[0].u.value == doctest::Approx(1.0));
    CHECK(est[0].w.value == doctest::Approx(1.0));
    CHECK(est[0].v.se == doctest::Approx(0.0));
}

TEST_CASE("results are identical for any thread count") {
    const Dims d = Dims::from_ratios(60, 0.9, 0.4, 0.8);
    McOptions o;
    o.trials = 16;
    o.seed = 4;
    const std::vector<Target> tg{{0.5, 0.5}, {0.2, 0.8}};
    o.threads = 1;
    const auto a = mc_rescaled_overlaps(MatrixSpec::zero(d), 1.0, tg, o);
    o.threads = 3;
    const auto b = mc_rescaled_overlaps(MatrixSpec::zero(d), 1.0, tg, o);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].v.value == b[k].v.value);
        CHECK(a[k].u.se == b[k].u.se);
        CHECK(a[k].w.value == b[k].w.value);
    }
    std::vector<double> x(1000);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = 1.0 / (1.0 + k);
    double naive = 0.0;
    for (double v : x) naive += v;
    CHECK(pairwise_sum(x) == doctest::Approx(naive).epsilon(1e-14));
}

TEST_CASE("errors: degenerate samples, bad kernels, bad targets") {
    const Dims d{10, 8, 6, 4};
    McOptions o;
    o.trials = 3;
    // A = 0 and t = 0 leaves the block rank deficient on every redraw
    CHECK_THROWS_AS(mc_rescaled_overlaps(MatrixSpec::zero(d), 0.0, {{0.5, 0.5}}, o), DegenerateSampleError);
    const Dims square{10, 8, 6, 6};
    CHECK_THROWS_AS(mc_kernel_overlaps(MatrixSpec::zero(square), 1.0, KernelCase::U1, 0.5, o), ParameterError);
    CHECK_THROWS_AS(mc_rescaled_overlaps(MatrixSpec::zero(d), 1.0, {{1.5, 0.5}}, o), ParameterError);
    o.trials = 1;
    CHECK_THROWS_AS(mc_rescaled_overlaps(MatrixSpec::zero(d), 1.0, {{0.5, 0.5}}, o), ParameterError);
    CHECK_THROWS_AS(MatrixSpec::diagonal(d, std::vector<double>(9, 1.0)).validate(), ParameterError);
}

TEST_CASE("first-order correlation identity, small sizes") {
    const Dims d{12, 10, 8, 6};
    std::vector<CorrelationEntry> entries;
    CorrelationOptions opts;
    opts.entries = &entries;
    const std::size_t S = 4000;
    const double worst = correlation_identity_test(d, 1.0, 0.01, S, 2, opts);
    CHECK(worst < 6.0 / std::sqrt(double(S)));
    // matched index pairs have expected value near one when the frames line up
    bool any = false;
    for (const auto& e : entries) any |= std::abs(e.expected) > 0.1;
    CHECK(any);
}

TEST_CASE("rescaled overlaps are consistent across N") {
    // fixed quantile targets; the rescaled overlap should not drift with the matrix size
    McOptions o;
    o.trials = 60;
    o.seed = 21;
    const std::vector<Target> tg{{0.5, 0.5}};
    const Dims d1 = Dims::from_ratios(150, 0.9, 0.4, 0.8), d2 = Dims::from_ratios(300, 0.9, 0.4, 0.8);
    o.window = 2;
    const auto a = mc_rescaled_overlaps(MatrixSpec::zero(d1), 3.0, tg, o);
    const auto b = mc_rescaled_overlaps(MatrixSpec::zero(d2), 3.0, tg, o);
    CHECK(std::abs(a[0].v.value - b[0].v.value) < 4.0 * std::hypot(a[0].v.se, b[0].v.se));
    CHECK(std::abs(a[0].u.value - b[0].u.value) < 4.0 * std::hypot(a[0].u.se, b[0].u.se));
}

}  // TEST_SUITE
