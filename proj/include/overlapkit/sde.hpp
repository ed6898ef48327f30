#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "overlapkit/ensemble.hpp"
#include "overlapkit/types.hpp"

namespace overlapkit {

// Eigenvalues of X^T X at time t, strictly decreasing.
struct EigenState {
    double t = 0.0;
    std::vector<double> eigs;
    Dims dims;

    void validate() const;  // strict ordering and positivity
};

struct SdeOptions {
    // Multiplies the Brownian term; 0 gives the deterministic drift-only flow.
    double noise_scale = 1.0;
    // A failed step is split along a Brownian bridge at most this many times (dt_min = dt / 2^k).
    int max_refine = 10;
    double tol = 1e-12;
    int max_newton = 60;
    // Number of coarse Brownian intervals. 0 means one per step; otherwise n_steps must be
    // base_steps * 2^L, and the finer path is derived from the coarse one by bridging, so runs
    // at different L see the same Brownian path.
    std::size_t base_steps = 0;
    // Degenerate initial spectra are advanced by exact sampling over the first
    // (t_final - t0) / warm_divisor before integrating. With warm_start off they are split by
    // j * 1e-8 instead.
    bool warm_start = true;
    int warm_divisor = 16;
};

struct SdeStats {
    std::size_t steps = 0;        // accepted implicit steps
    std::size_t refinements = 0;  // bridge splits forced by failed steps
    std::size_t newton_iterations = 0;
    double closest_gap = 0.0;     // smallest lam_j - lam_{j+1} seen after any accepted step
    double warm_until = 0.0;      // end of the exact-sampling segment, or t0 when unused
};

// One step of length dt driven by the increments of Brownian base interval `interval`
// under (seed). Refinement splits the same increments, so the driving path is unchanged.
EigenState bru_step(const EigenState& s, double dt, std::uint64_t seed, std::uint64_t interval,
                    const SdeOptions& opts = {}, SdeStats* stats = nullptr);

EigenState integrate(const EigenState& init, double t_final, std::size_t n_steps,
                     std::uint64_t seed, const SdeOptions& opts = {}, SdeStats* stats = nullptr);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);
// One-sample statistic against a CDF.
double ks_distance(std::vector<double> a, const std::function<double(double)>& cdf);

struct BurgersReport {
    std::vector<cplx> z;
    std::vector<cplx> g_theory, g_sde, g_direct;
    std::vector<double> residual;  // |implicit equation residual| at each theory value
    std::vector<double> eig_sde, eig_direct;
    double max_dev_sde = 0.0;
    double max_dev_direct = 0.0;
    double max_residual = 0.0;
    double ks = 0.0;  // SDE endpoint vs direct sample
    SdeStats stats;

    double max_deviation() const { return max_dev_sde > max_dev_direct ? max_dev_sde : max_dev_direct; }
};

BurgersReport burgers_validate(const MatrixSpec& spec, double t_final, std::size_t n_steps,
                               const std::vector<cplx>& z_grid, std::uint64_t seed,
                               const SdeOptions& opts = {});

// Ten points with |Im z| >= 0.5 spread over [0, upper].
std::vector<cplx> default_z_grid(double upper);

// Eigenvalues of A^T A, descending, length N.
std::vector<double> gram_eigenvalues(const Eigen::MatrixXd& A);

}  // namespace overlapkit
