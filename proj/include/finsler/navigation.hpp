#pragma once

#include "finsler/chart.hpp"
#include "finsler/norm.hpp"

#include <memory>

namespace finsler {

/// A navigation problem: base metric F plus a wind V with F(x, -V(x)) < 1
/// on the working region (checked pointwise with a safety margin). The
/// deformed metric F~ assigns to ~y the unique speed lambda solving
///   F(x, ~y - lambda V(x)) = lambda.
struct NavigationDatum {
	std::shared_ptr<const ChartedFinslerMetric> base;
	VectorFieldSpec wind;
	double margin = 0.05;

	int dim() const { return base->dim(); }

	/// F(x, -V(x)) < 1 - margin.
	bool admissible(const Vector& x) const;
	/// Worst admissibility gap 1 - margin - F(x,-V(x)) over sampled points.
	double admissibility_gap(const Vector& x) const;
};

NavigationDatum make_navigation(ChartedFinslerMetric base, VectorFieldSpec wind,
                                double margin = 0.05);

/// Solves F(x, ~y - lambda V(x)) = lambda for the deformed norm value.
/// Exact for ~y = 0 (returns 0). Throws if x is not admissible.
double navigate(const NavigationDatum& datum, const Vector& x, const Vector& ytilde);

/// Inverse direction: given y, finds mu with F~(x, y + mu V(x)) = mu, the
/// norm that F assigned to y (navigate and inverse_navigate are inverse
/// relabelings of the same indicatrix shift).
double inverse_navigate(const NavigationDatum& datum, const Vector& x, const Vector& y);

/// The deformed metric as a charted metric. Every norm it hands out is a
/// custom-kind wrapper around the defining equation with analytic gradient
/// and tensor callbacks obtained by implicit differentiation, so downstream
/// geometry sees derivative noise at the root-solve level (~1e-14) rather
/// than at a finite-difference floor.
ChartedFinslerMetric navigated_metric(const NavigationDatum& datum,
                                      const StepPolicy& steps = default_steps());

/// Closed-form shortcut for a Riemannian base h = A(x) and wind W with
/// |W|_A < 1: the deformed metric is the randers norm
///   a~ = A/l + (AW)(AW)^T/l^2,  b~ = -AW/l,  l = 1 - |W|^2_A.
ChartedFinslerMetric navigate_randers(const ChartedFinslerMetric& riemannian_base,
                                      const VectorFieldSpec& wind,
                                      const StepPolicy& steps = default_steps());

/// Residual of the tensor comparison on the orthogonal complement of y:
/// g~_{y+F V}(u,v) vs g_y(u,v) / (1 + <V, y>_y), normalized by the scale of
/// the right-hand side. y need not be unit.
double verify_tensor_relation(const NavigationDatum& datum, const Vector& x, const Vector& y);

/// Relative difference of the wind-free and deformed densities at x, both
/// computed through the same quadrature path.
double verify_volume_equality(const NavigationDatum& datum, const Vector& x, long budget = 200000,
                              std::uint64_t seed = 1);

} // namespace finsler
