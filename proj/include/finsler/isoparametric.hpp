#pragma once

#include "finsler/correspondence.hpp"
#include "finsler/geodesics.hpp"
#include "finsler/navigation.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace finsler {

// Gradients, the density-weighted Laplacian, transnormal/isoparametric
// functions, and their correspondence under wind deformation: levels of the
// deformed function are the flow images of the base levels in warped time.

/// A scalar function on the chart. Without a closed-form differential the
/// covector falls back to central differences of `value` at step 1e-6.
struct ScalarFieldSpec {
	std::string name;
	std::function<double(const Vector&)> value;
	std::function<Vector(const Vector&)> differential;

	Vector differential_at(const Vector& x) const;
};

/// The gradient vector of f at x: the solution y of the Legendre problem
/// g_y(y, .) = df(x), by damped Newton on y -> F(y) dF(y) whose Jacobian is
/// the fundamental tensor exactly. The defining identity holds to 1e-10
/// relative on return; quadratic metrics converge in one step from the
/// closed-form start A^{-1} df.
Vector finsler_gradient(const ChartedFinslerMetric& m, const ScalarFieldSpec& f, const Vector& x,
                        const StepPolicy& steps = default_steps());

/// Gradient-length statistics over a level window: a(s) = F(grad f) sampled
/// on each level set (points found by gradient-flow projection), plus the
/// worst within-level deviation. spread < 1e-4 is the working test for
/// transnormality, i.e. for F(grad f) depending on x through f(x) only.
struct TransnormalProfile {
	std::vector<double> level;
	std::vector<double> a;
	double spread = 0.0;
};
TransnormalProfile transnormal_profile(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                                       const Vector& x0, double level_lo, double level_hi,
                                       int levels = 9, int per_level = 5, std::uint64_t seed = 1,
                                       const StepPolicy& steps = default_steps());

/// Rescales a transnormal f to its normalized representative phi o f with
/// unit gradient length and value 0 at x0. phi'(s) = 1/a(s) is integrated
/// along the gradient curve through x0 for the values; the differential is
/// normalized pointwise (df / F(grad f)), which transnormality makes exact.
/// Rejects non-transnormal input with the measured spread.
ScalarFieldSpec normalize_transnormal(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                                      const Vector& x0, double level_lo, double level_hi,
                                      const StepPolicy& steps = default_steps());

/// Density-weighted divergence of the gradient field,
///   (1/sigma) sum_i d_i(sigma (grad f)^i),
/// by central differences of the flux at step divergence_step * chart
/// scale. Throws "insufficient room" when the stencil leaves the chart.
double nonlinear_laplacian(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                           const Vector& x, long density_budget = 200000,
                           const StepPolicy& steps = default_steps());

/// Value at xtilde of the deformed-metric companion of a normalized
/// transnormal f: its levels are flow images of the base levels,
/// level t = Psi_t(f^{-1}(s(t))), so the value is the root t of
///   f(Psi_{-t}(xtilde)) = s(t),
/// found by safeguarded Newton from t = f(xtilde). Throws "outside
/// correspondence neighborhood" when no monotone bracket exists.
double transport_isoparametric(const NavigationDatum& datum, const ScalarFieldSpec& f,
                               const Vector& xtilde, const StepPolicy& steps = default_steps());

/// The transported function as a field spec. Values run the root solve
/// above; the differential uses the gradient push law
///   grad~ ftilde = V + e^{2ct} Psi_* (grad f)
/// (the navigation image of the pushed unit gradient, exactly like a
/// transported geodesic velocity), metric-paired back to a covector, so
/// downstream differencing does not stack onto root-solver noise.
ScalarFieldSpec transported_field(const NavigationDatum& datum, const ScalarFieldSpec& f,
                                  const StepPolicy& steps = default_steps());

/// Inverse of the level transport: recovers f(x) = s(t) from the root t of
/// ftilde(Psi_t(x)) = t. Composing transported_field with this is the
/// identity on the correspondence neighborhood.
double inverse_transport_isoparametric(const NavigationDatum& datum,
                                       const ScalarFieldSpec& ftilde, const Vector& x,
                                       const StepPolicy& steps = default_steps());

/// Max over the points of the Laplacian relation residual
///   | Delta~ ftilde(Psi(x)) - (2c f(x) + 1) Delta f(x) + 2cn |,
/// both Laplacians computed independently through nonlinear_laplacian and
/// Psi the level map (Psi_t on the level f = s(t)).
double verify_laplacian_relation(const NavigationDatum& datum, const ScalarFieldSpec& f,
                                 const std::vector<Vector>& points, long density_budget = 200000,
                                 const StepPolicy& steps = default_steps());

/// Residual at x of the density pull-back law for the level map Psi:
///   sigma~(Psi(x)) det DPsi(x) / sigma(x) = (1 + c0(x)) (2c f(x) + 1)^{-n-1},
/// with c0 the wind pairing intercept (at the f = 0 crossing) of the
/// gradient geodesic through x.
double density_pullback_residual(const NavigationDatum& datum, const ScalarFieldSpec& f,
                                 const Vector& x, long density_budget = 200000,
                                 const StepPolicy& steps = default_steps());

/// Within-level statistics of the two isoparametric quantities.
struct LevelStat {
	double level = 0.0;
	int n_points = 0;
	double grad_spread = 0.0; // std deviation of F(grad f) within the level
	double lap_spread = 0.0;  // std deviation of Delta f within the level
	bool sampled = false;     // enough points found on this level
};
struct IsoparametricReport {
	std::vector<LevelStat> levels;
	double max_spread = 0.0;
	bool isoparametric = false; // every sampled level has both spreads < 1e-3
};

/// Samples each requested level set by gradient-flow projection of random
/// points drawn near `around`, then reports the within-level spreads of the
/// gradient length and the Laplacian. Levels that cannot be sampled are
/// reported unsampled and excluded from the verdict.
IsoparametricReport isoparametric_check(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                                        const Vector& around, double radius,
                                        const std::vector<double>& levels, int per_level = 5,
                                        long density_budget = 200000, std::uint64_t seed = 1,
                                        const StepPolicy& steps = default_steps());

} // namespace finsler
