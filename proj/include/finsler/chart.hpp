#pragma once

#include "finsler/norm.hpp"
#include "finsler/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace finsler {

/// Open coordinate domain: a ball or an axis-aligned box.
struct ChartDomain {
	enum class Shape { Ball, Box };

	static ChartDomain ball(Vector center, double radius);
	static ChartDomain box(Vector lo, Vector hi);

	/// Point membership with an optional inward shrink (stencil headroom).
	bool contains(const Vector& x, double shrink = 0.0) const;
	int dim() const { return static_cast<int>(center.size()); }
	double scale() const; // characteristic length, feeds x-step sizing

	Shape shape = Shape::Ball;
	Vector center; // ball center, or box midpoint
	double radius = 1.0;
	Vector lo, hi; // box corners
};

/// A Finsler metric in one chart: a Minkowski norm attached to every point.
struct ChartedFinslerMetric {
	std::string name;
	ChartDomain domain;
	std::function<MinkowskiNormSpec(const Vector&)> norm_at;

	int dim() const { return domain.dim(); }
	double value(const Vector& x, const Vector& y) const { return norm_at(x).value(y); }
	Matrix tensor(const Vector& x, const Vector& y) const { return norm_at(x).tensor_matrix(y); }
	double inner(const Vector& x, const Vector& y, const Vector& u, const Vector& v) const {
		return norm_at(x).inner(y, u, v);
	}

	/// Riemannian metric field: same quadratic form at every direction.
	static ChartedFinslerMetric riemannian(std::string name, ChartDomain domain,
	                                       std::function<Matrix(const Vector&)> A_at,
	                                       const StepPolicy& steps = default_steps());
	static ChartedFinslerMetric euclidean(int n, double chart_radius = 1.0);
};

/// Flow map result: the moved point and the tangent (derivative) map.
struct FlowResult {
	Vector point;
	Matrix tangent;
};

/// A smooth vector field with optional analytic extras. `jacobian` defaults
/// to finite differences of `value`; `exact_flow`, when present, shortcuts
/// numeric flow integration (affine fields get it automatically).
struct VectorFieldSpec {
	std::string name;
	std::function<Vector(const Vector&)> value;
	std::function<Matrix(const Vector&)> jacobian;
	std::function<FlowResult(const Vector&, double)> exact_flow;
	std::optional<double> dilation; // set by homothetic_dilation on success

	Matrix jacobian_at(const Vector& x) const;

	/// V(x) = A x + b, flowed exactly through a matrix exponential.
	static VectorFieldSpec affine(Matrix A, Vector b, std::string name = "affine");
	static VectorFieldSpec radial(int n);                 // V(x) = x
	static VectorFieldSpec rotation(int n, double rate);  // rigid rotation in the x1-x2 plane
	static VectorFieldSpec translation(Vector w);         // constant field
	static VectorFieldSpec zero(int n);
};

/// Flow x along V for time t. Uses exact_flow when available, otherwise
/// integrates the joint system (point + tangent map) with the adaptive
/// integrator. If `domain` is given and the trajectory leaves it, throws
/// FinslerError("flow left chart ...").
FlowResult flow(const VectorFieldSpec& V, const Vector& x, double t,
                const ChartDomain* domain = nullptr, double rtol = 1e-10);

/// Dilation measurement: fits d/dt F(flow_t(x), Dflow_t y)|_0 = -2c F(x, y)
/// over the given samples. On success (max_residual < 1e-6) stores c into
/// V.dilation. Residuals are relative to the norm values, so a Killing field
/// reports c ~ 0 with a tiny residual rather than a 0/0.
struct DilationEstimate {
	double c = 0.0;
	double max_residual = 0.0;
};
DilationEstimate homothetic_dilation(const ChartedFinslerMetric& F, VectorFieldSpec& V,
                                     const std::vector<std::pair<Vector, Vector>>& samples,
                                     const StepPolicy& steps = default_steps());

/// Busemann-Hausdorff density at x: vol(Euclidean unit ball) / vol{F(x,.) <= 1}.
struct DensityValue {
	double sigma = 0.0;
	double estimator_error = 0.0; // 0 for the deterministic paths
};

/// Deterministic for quadratic norms (determinant) and in dimensions 2 and 3
/// (quadrature of the radial support over the direction sphere); seeded
/// quasi-Monte-Carlo rejection sampling in dimension >= 4. `force_quadrature`
/// makes a quadratic norm take the generic path too (route comparisons).
DensityValue bh_density(const ChartedFinslerMetric& F, const Vector& x, long budget = 200000,
                        std::uint64_t seed = 1, bool force_quadrature = false);

/// Distortion tau(x, y) = log( sqrt(det g_y) / sigma(x) ).
double distortion(const ChartedFinslerMetric& F, const Vector& x, const Vector& y,
                  long budget = 200000, std::uint64_t seed = 1);

/// Checks the homothety volume identity: the flow-t pullback of the density
/// equals exp(-2 c n t) times the density. Returns the relative residual.
double verify_homothetic_volume_scaling(const ChartedFinslerMetric& F, const VectorFieldSpec& V,
                                        double c, const Vector& x, double t, long budget = 200000,
                                        std::uint64_t seed = 1);

} // namespace finsler
