#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "overlapkit/overlap_theory.hpp"
#include "overlapkit/types.hpp"

namespace overlapkit {

// The deterministic part A of X = A + B_t / sqrt(N).
struct MatrixSpec {
    enum class Kind { Zero, Diagonal, File };

    Kind kind = Kind::Zero;
    std::vector<double> diag;  // Diagonal: entries A(k, k), length <= N
    std::string path;          // File
    Dims dims;

    static MatrixSpec zero(const Dims& d);
    static MatrixSpec diagonal(const Dims& d, std::vector<double> values);
    static MatrixSpec file(const Dims& d, std::string path);

    void validate() const;
    // Dense M x N matrix; reads the file for Kind::File.
    Eigen::MatrixXd materialize() const;
};

struct SvdTriplet {
    Eigen::MatrixXd left;   // M x M
    Eigen::VectorXd svals;  // N, descending
    Eigen::MatrixXd right;  // N x N
};

struct EnsembleSample {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Xtrunc;
};

// X = A + sqrt(t/N) Z; Z is addressed by (seed, stream) so samples can be redrawn independently.
EnsembleSample sample_ensemble(const Eigen::MatrixXd& A, const Dims& dims, double t,
                               std::uint64_t seed, std::uint64_t stream = 0);
EnsembleSample sample_ensemble(const MatrixSpec& spec, double t, std::uint64_t seed,
                               std::uint64_t stream = 0);

// Makes the first nonzero component of right column k positive for k < paired, flipping left
// column k with it. Unpaired left columns get the same rule applied to themselves.
void canonicalize_signs(SvdTriplet& s, std::size_t paired);

SvdTriplet svd_full(const Eigen::MatrixXd& X);
// Null-space convention: block vectors are zero padded, left vectors n+1..m complete the block
// inside the first m coordinates, and everything else is a standard basis vector.
// Throws DegenerateSampleError if the block is rank deficient to within 1e-12.
SvdTriplet svd_truncated(const Eigen::MatrixXd& Xtrunc, const Dims& dims);

struct OverlapTables {
    Eigen::MatrixXd V;  // n x N
    Eigen::MatrixXd U;  // m x M
    Eigen::MatrixXd W;  // n x N
};
OverlapTables overlap_matrices(const SvdTriplet& full, const SvdTriplet& trunc, const Dims& dims);

struct OverlapEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t trials = 0;
};
OverlapEstimate summarize(const std::vector<double>& per_trial);

// Quantile fractions (x for the truncated spectrum, y for the full one). mu and lam are the
// eigenvalue targets used by nearest-eigenvalue selection.
struct Target {
    double x = 0.5;
    double y = 0.5;
    double mu = std::numeric_limits<double>::quiet_NaN();
    double lam = std::numeric_limits<double>::quiet_NaN();
};

enum class IndexSelection { Fixed, NearestEigenvalue };

struct McOptions {
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    int threads = 0;
    IndexSelection select = IndexSelection::Fixed;
    int max_resample = 100;
    // Averages over indices within +-window of the selected ones (per trial).
    int window = 0;
};

struct TargetEstimate {
    Target target;
    std::size_t i = 0, j = 0;  // 1-based fixed indices
    OverlapEstimate v, u, w;
};

// i = clamp(round(x n), 1, n)
std::size_t fraction_to_index(double x, std::size_t n);

std::vector<TargetEstimate> mc_rescaled_overlaps(const MatrixSpec& spec, double t,
                                                 const std::vector<Target>& targets,
                                                 const McOptions& opts);

// U1: i over n+1..m, j from frac = y. U2: i from frac = x, j over N+1..M. U3: both ranges.
OverlapEstimate mc_kernel_overlaps(const MatrixSpec& spec, double t, KernelCase which,
                                   double frac, const McOptions& opts);

// Draws one trial's frames, redrawing degenerate samples up to max_resample times.
std::pair<SvdTriplet, SvdTriplet> sample_frames(const Eigen::MatrixXd& A, const Dims& dims,
                                                double t, std::uint64_t seed, std::uint64_t trial,
                                                int max_resample);

struct CorrelationEntry {
    std::size_t i, l, j, k;  // 1-based
    double measured;         // covariance / dt
    double expected;         // <u~_i, u_j> <v~_l, v_k>
};

struct CorrelationOptions {
    // 1-based index lists; empty means 5 evenly spaced indices over the full range.
    std::vector<std::size_t> i, l, j, k;
    std::vector<CorrelationEntry>* entries = nullptr;
};

double correlation_identity_test(const Dims& dims, double t, double dt, std::size_t samples,
                                 std::uint64_t seed, const CorrelationOptions& opts = {});

}  // namespace overlapkit
