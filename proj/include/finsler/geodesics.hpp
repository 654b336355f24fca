#pragma once

#include "finsler/chart.hpp"

#include <string>
#include <vector>

namespace finsler {

/// Geodesic spray coefficients G(x, y): the geodesic equation reads
/// x'' + 2 G(x, x') = 0. Assembled from the Euler-Lagrange equations of the
/// squared norm; the x-derivatives are central differences, everything in y
/// comes from the fundamental tensor. Positively 2-homogeneous in y.
Vector spray(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
             const StepPolicy& steps = default_steps());

/// Jacobian of the spray in y: the nonlinear connection coefficients N(x, y),
/// with N(x, y) y = 2 G(x, y).
Matrix nonlinear_connection(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                            const StepPolicy& steps = default_steps());

/// Spray with both first-order jets (central differences of `spray`).
struct SprayJet {
	Vector G;
	Matrix dG_dx;
	Matrix dG_dy;
};
SprayJet spray_jet(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                   const StepPolicy& steps = default_steps());

/// Covariant derivative along a curve through (x, v), with reference vector v:
/// D U = U' + N(x, v) U. A curve is a geodesic iff D of its velocity vanishes.
Vector covariant_derivative(const ChartedFinslerMetric& m, const Vector& x, const Vector& v,
                            const Vector& U, const Vector& Udot,
                            const StepPolicy& steps = default_steps());

/// Dense-output geodesic: node tables plus cubic Hermite interpolation
/// between them. Nodes carry position, velocity and acceleration, so both
/// position() and velocity() interpolate at fourth order in the node spacing.
struct GeodesicSolution {
	std::vector<double> t;
	std::vector<Vector> x, v, a; // a = -2 G(x, v)

	bool exited_backward = false; // trajectory left the chart before the
	bool exited_forward = false;  // requested span was covered
	std::string note;             // human-readable stop reason, "" if none
	double speed_drift = 0.0;     // max |F(x,v) - F(x0,v0)| over the nodes

	double t_min() const { return t.front(); }
	double t_max() const { return t.back(); }
	int dim() const { return static_cast<int>(x.front().size()); }

	Vector position(double s) const;
	Vector velocity(double s) const;
};

/// Integrates the geodesic with gamma(0) = x0, gamma'(0) = v0 over
/// [t_from, t_to] (the span must contain 0). `grid` is the number of node
/// intervals (default 200). If the trajectory leaves the chart the solution
/// is truncated there and flagged rather than failed: the covered span is
/// whatever t_min()/t_max() report.
GeodesicSolution integrate_geodesic(const ChartedFinslerMetric& m, const Vector& x0,
                                    const Vector& v0, double t_from, double t_to, int grid = 0,
                                    const StepPolicy& steps = default_steps());

/// A Jacobi field along a geodesic: the linearization of the geodesic flow,
/// J'' + 2 (dG/dx) J + 2 (dG/dy) J' = 0, with the jets evaluated along the
/// base geodesic. Node tables with Hermite interpolation, like the geodesic.
struct JacobiSolution {
	std::vector<double> t;
	std::vector<Vector> j, jdot, jddot;

	/// Sup over the nodes of |g(J, gamma') - (its affine-in-t prediction)|.
	/// The inner product of a Jacobi field with the velocity is affine in t,
	/// so this measures integration quality, not geometry.
	double orthogonality_drift = 0.0;

	Vector value(double s) const;
	Vector derivative(double s) const;
};

/// Integrates the Jacobi equation along `geo` with initial value J0 and
/// initial covariant derivative DJ0 (both at t = 0). The span must contain 0
/// and lie inside the geodesic's covered span. The linearization jets are
/// tabulated at the geodesic nodes and interpolated, so the cost is one
/// spray jet per node regardless of integrator step count.
JacobiSolution integrate_jacobi(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                                const Vector& J0, const Vector& DJ0, double t_from, double t_to,
                                const StepPolicy& steps = default_steps());

/// Parallel transport of U0 from t_from to t_to along `geo`: solves
/// U' + N(gamma, gamma') U = 0. Transport preserves g_{gamma'}-inner products
/// of transported fields when the curve is a geodesic.
Vector parallel_transport(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                          const Vector& U0, double t_from, double t_to,
                          const StepPolicy& steps = default_steps());

/// Cross-check of the Jacobi integrator against its definition: the field is
/// also the s-derivative of a geodesic variation. Integrates two neighboring
/// geodesics displaced by +-fd_step along (J0, DJ0) and returns the sup over
/// `times` of |J_ode(t) - central difference|.
double jacobi_variation_mismatch(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                                 const Vector& J0, const Vector& DJ0,
                                 const std::vector<double>& times, double fd_step = 1e-4,
                                 const StepPolicy& steps = default_steps());

/// Riemann curvature operator R_y acting on tangent vectors, assembled from
/// the spray jets: R_y = 2 dG/dx - (directional x-derivative of N along y)
/// + 2 (directional y-derivative of N along G) - N^2. Satisfies R_y y = 0 and
/// is g_y-self-adjoint; both are measured by the tests rather than enforced.
Matrix riemann_operator(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                        const StepPolicy& steps = default_steps());

/// Flag curvature of the plane spanned by (y, u):
/// K = g_y(u, R_y u) / (F(y)^2 g_y(u,u) - g_y(y,u)^2).
double flag_curvature(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                      const Vector& u, const StepPolicy& steps = default_steps());

/// Independent route to the same number: integrate the Jacobi field with
/// J(0) = u (projected g_y-orthogonal to y), DJ(0) = 0 along the unit-speed
/// geodesic and read K off the second t-derivative of |J|_g at t = 0.
double flag_curvature_via_jacobi(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                                 const Vector& u, const StepPolicy& steps = default_steps());

/// Extremes of the flag curvature over all flag poles u at fixed (x, y):
/// eigenvalue range of the curvature form on the g_y-orthocomplement of y.
struct CurvatureRange {
	double k_min = 0.0;
	double k_max = 0.0;
};
CurvatureRange flag_curvature_range(const ChartedFinslerMetric& m, const Vector& x,
                                    const Vector& y, const StepPolicy& steps = default_steps());

/// S-curvature: the rate of change of the distortion along the geodesic with
/// initial data (x, y), by a centered five-node derivative. `density_budget`
/// is forwarded to the volume estimator (only dimensions >= 4 consume it).
double s_curvature(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                   long density_budget = 200000, const StepPolicy& steps = default_steps());

} // namespace finsler
