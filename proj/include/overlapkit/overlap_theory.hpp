#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "overlapkit/spectral.hpp"
#include "overlapkit/types.hpp"

namespace overlapkit {

// Closed forms for A = 0 (mu, lam in the bulks at time r.t).
OverlapTriple mp_overlap_triple(const ShapeRatios& r, double mu, double lam);
KernelOverlaps mp_kernel_overlaps(const ShapeRatios& r, double mu, double lam);
// Largest value of each density, used for the 2% bulk guard.
double mp_density_max(const MPSpec& spec);

CharacteristicPoint characteristic_map(cplx G, cplx Gt, cplx z, cplx zt, const ShapeRatios& r);

struct ResolventValues {
    cplx sv, su, sw;
    cplx su_scaled;  // z * zt * S_U, finite when z or zt goes to 0
};

// Evaluator of (S_V, S_U, S_W) at t = 0, as a function of (z, zt).
using InitialResolvent = std::function<ResolventValues(cplx z, cplx zt)>;
// Evaluator of (S_V, S_U, S_W) at the time baked into the closure.
using Resolvent = std::function<ResolventValues(cplx z, cplx zt)>;

// Overlaps between singular vectors of A and of its m x n truncation, at t = 0.
struct InitialOverlapTables {
    std::vector<double> lam0;  // N eigenvalues of A^T A, descending
    std::vector<double> mu0;   // n eigenvalues of the block's Gram matrix, descending
    Eigen::MatrixXd v0;        // n x N
    Eigen::MatrixXd u0;        // m x M, columns beyond N and rows beyond n sit at eigenvalue 0
    Eigen::MatrixXd w0;        // n x N signed products
};

InitialOverlapTables initial_tables_from_A(const Eigen::MatrixXd& A, const Dims& dims);

InitialResolvent initial_resolvents_zero(const ShapeRatios& r);
InitialResolvent initial_resolvents_from_A(const InitialOverlapTables& tables, const Dims& dims);

// s0 must be evaluated at (zt * ztp, zttilde * zttildep).
ResolventValues propagate_resolvents(const ResolventValues& s0, const CharacteristicPoint& cp,
                                     cplx z, cplx zt, double t);

// Composes S(., ., 0) with the characteristic map; G and Gt give the Stieltjes values at time r.t.
Resolvent resolvent_at_time(InitialResolvent s0, std::function<cplx(cplx)> G,
                            std::function<cplx(cplx)> Gt, const ShapeRatios& r);
Resolvent mp_resolvent(const ShapeRatios& r);

enum class Channel { V, U, W };
enum class KernelCase { U1, U2, U3 };

// Extrapolated eps -> 0 limit of the double-Stieltjes inversion. rho and rhot must exceed
// rho_min and rhot_min respectively.
double invert_bulk(const Resolvent& res, Channel ch, double mu, double lam, double rho,
                   double rhot, const ShapeRatios& r, const std::vector<double>& eps_schedule,
                   double rho_min = 0.0, double rhot_min = 0.0);

// U1 needs point = lam and density = rho(lam); U2 needs point = mu and density = rhot(mu).
double invert_kernel_U(const Resolvent& res, KernelCase which, double point, double density,
                       const ShapeRatios& r, const std::vector<double>& eps_schedule);

// General-A theory. Boundary values come from the implicit equations tracked onto the real axis,
// so the resulting formulas have no eps left in them.
class GeneralTheory {
public:
    GeneralTheory(InitialResolvent s0, StieltjesFn G0, StieltjesFn G0tilde, ShapeRatios r,
                  double lam0_max, double mu0_max, SolverOptions opts = {});

    static GeneralTheory from_tables(const InitialOverlapTables& tables, const Dims& dims,
                                     double t, SolverOptions opts = {});
    // A = 0 with the exact t = 0 resolvents.
    static GeneralTheory zero(const ShapeRatios& r, SolverOptions opts = {});

    const ShapeRatios& ratios() const { return r_; }

    // v + i pi rho at lam - i0, and the truncated analogue at mu - i0.
    cplx boundary_G(double lam) const;
    cplx boundary_Gt(double mu) const;
    // lim G(i eps) and lim Gt(i eps).
    double G_at_zero() const;
    double Gt_at_zero() const;

    double rho_max() const { return rho_max_; }
    double rhot_max() const { return rhot_max_; }
    double lam_upper() const { return lam_hi_; }
    double mu_upper() const { return mu_hi_; }

    // Throws EdgeProximityError below 2% of the density maxima.
    OverlapTriple triple(double mu, double lam) const;
    // Exact zero-point limits of the propagated S_U; need q < 1 and alpha q < beta.
    double kernel_u1(double lam) const;
    double kernel_u2(double mu) const;
    double kernel_u3() const;
    KernelOverlaps kernel(double mu, double lam) const;

    // Eigenvalue at upper-tail mass x for each fraction, from a midpoint-rule CDF on `cells`
    // cells of [0, upper]. truncated selects the block spectrum.
    std::vector<double> quantiles(bool truncated, const std::vector<double>& fractions,
                                  int cells = 2000) const;

    const ImplicitEquation& equation() const { return eq_; }
    const ImplicitEquation& equation_tilde() const { return eqt_; }

private:
    cplx boundary(const ImplicitEquation& eq, double x, double height) const;
    cplx at_zero(const ImplicitEquation& eq, double height) const;
    void require_kernel() const;

    InitialResolvent s0_;
    ImplicitEquation eq_, eqt_;
    ShapeRatios r_;
    SolverOptions opts_;
    double lam_hi_ = 0.0, mu_hi_ = 0.0;
    double rho_max_ = 0.0, rhot_max_ = 0.0;
};

OverlapTriple general_overlap_triple(const InitialOverlapTables& tables, const ShapeRatios& r,
                                     const Dims& dims, double mu, double lam, double t);

struct NormalizationSums {
    double vsum = 0.0;
    double usum = 0.0;
};
// Integrals of the A = 0 closed forms against rho(., t); mu in the truncated bulk.
NormalizationSums normalization_check(const ShapeRatios& r, double mu, double t);
// Integral of U(0, lam) rho + (1/q - 1) U(0, 0); should equal 1.
double kernel_row_sum(const ShapeRatios& r, double t);

}  // namespace overlapkit
