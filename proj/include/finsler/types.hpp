#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace finsler {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown on any contract violation: degenerate input, loss of strong
/// convexity, inadmissible wind, trajectories leaving the chart, and the like.
/// The message states which quantity failed and where.
struct FinslerError : std::runtime_error {
	using std::runtime_error::runtime_error;
};

/// Central knob box for every finite-difference step and solver tolerance
/// used by the geometry stack. Keeping them in one place makes the accuracy
/// ladder auditable: each default below was sized so that the verification
/// tolerances downstream hold with at least one order of margin.
///
/// All x-steps are multiplied by chart_scale, all y-steps by max(1,|y|).
struct StepPolicy {
	double chart_scale = 1.0;

	// First derivatives of F^2 and of its y-gradient in x (spray assembly).
	double x_step = 1e-5;

	// Second-difference Hessian of F^2 in y for evaluator-only norms.
	// eps^(1/4): the classical optimum for second differences. The smaller
	// cbrt(eps) step looks natural but its roundoff floor (~2e-6 on unit-size
	// norms) is measurably worse; see the norm tests which pin ~1e-7 here.
	double hessian_step = 1.221e-4;

	// First derivatives of the spray vector G (Jacobi linearization).
	double spray_jet_step = 1e-4;

	// Directional second derivatives of G inside the curvature operator.
	// Larger than spray_jet_step because second differences divide by h^2.
	double curvature_step = 5e-3;

	// Inner x/y steps used for the spray jets that feed the curvature
	// operator. The operator stacks three difference levels, so evaluator
	// noise is divided by the product of all three steps; the default fine
	// steps above would let that product amplify noise past the useful range,
	// while 1e-3 balances it against the O(h^2) truncation of the inner jets.
	double curvature_inner_step = 1e-3;

	// Five-point second derivative in t for the deviation-based curvature.
	double t2_step = 1e-3;

	// Five-point first derivative in t for the distortion rate (S-curvature).
	double s_rate_step = 1e-2;

	// d/dt probe of norm values along a flow (dilation measurement).
	double flow_probe_step = 1e-5;

	// Outer divergence step of the nonlinear Laplacian.
	double divergence_step = 1e-4;

	// Local differencing step for transported scalar fields, sized against
	// the root-finder noise floor of the transported values.
	double transported_diff_step = 1e-5;

	// ODE integrator tolerances for internal machinery (curvature probes,
	// flows, Jacobi coefficient tables). Public entry points default looser.
	double ode_rtol = 1e-12;
	double ode_atol = 1e-14;
};

/// Library-wide defaults. Scenario code may copy and adjust chart_scale.
inline const StepPolicy& default_steps() {
	static const StepPolicy p{};
	return p;
}

} // namespace finsler
