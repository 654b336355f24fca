#pragma once

#include "finsler/types.hpp"

#include <functional>
#include <vector>

namespace finsler {

/// Fundamental tensor g_y: the symmetric positive-definite form obtained as
/// half the y-Hessian of F^2, anchored at its base direction.
struct FundamentalTensor {
	Vector y;  // base direction (nonzero)
	Matrix g;  // SPD matrix of the form in chart coordinates

	double inner(const Vector& u, const Vector& v) const { return u.dot(g * v); }
};

/// A Minkowski norm on one tangent space: positive, smooth away from 0,
/// positively 1-homogeneous, with strongly convex unit ball.
///
/// Three constructions are supported. `quadratic` and `randers` carry exact
/// closed-form derivatives. `custom` wraps a bare evaluator and falls back to
/// finite differences for derivatives, unless the caller installs analytic
/// gradient/tensor callbacks (the navigation wrapper does, via implicit
/// differentiation of its defining equation).
class MinkowskiNormSpec {
public:
	enum class Kind { Quadratic, Randers, Custom };

	using Evaluator = std::function<double(const Vector&)>;
	using GradientFn = std::function<Vector(const Vector&)>;
	using TensorFn = std::function<Matrix(const Vector&)>;

	/// F(y) = sqrt(y^T A y); A symmetric positive definite.
	static MinkowskiNormSpec quadratic(Matrix A, const StepPolicy& steps = default_steps());

	/// F(y) = sqrt(y^T A y) + b.y; requires |b|_{A^{-1}} < 1 strictly,
	/// otherwise the unit ball is not strongly convex.
	static MinkowskiNormSpec randers(Matrix A, Vector b, const StepPolicy& steps = default_steps());

	/// Bare evaluator; derivatives by central finite differences.
	static MinkowskiNormSpec custom(int dim, Evaluator value,
	                                const StepPolicy& steps = default_steps());

	/// Evaluator with analytic first/second derivative callbacks
	/// (grad returns the y-gradient of F, tensor returns g_y).
	static MinkowskiNormSpec custom_with_derivatives(int dim, Evaluator value, GradientFn grad,
	                                                 TensorFn tensor,
	                                                 const StepPolicy& steps = default_steps());

	int dim() const { return dim_; }
	Kind kind() const { return kind_; }

	/// Norm value; exactly 0 at y = 0 for every kind.
	double value(const Vector& y) const;

	/// Euclidean-coordinate gradient of F at y (y bounded away from 0).
	Vector gradient(const Vector& y) const;

	FundamentalTensor fundamental_tensor(const Vector& y) const;
	Matrix tensor_matrix(const Vector& y) const { return fundamental_tensor(y).g; }

	/// g_y(u, v).
	double inner(const Vector& y, const Vector& u, const Vector& v) const;

	/// dim-1 vectors, g_y-orthonormal and g_y-orthogonal to y.
	std::vector<Vector> orthogonal_complement_basis(const Vector& y) const;

	// Kind-specific accessors (throw for the wrong kind).
	const Matrix& quadratic_form() const;
	const Vector& drift_covector() const;

	const StepPolicy& steps() const { return steps_; }

private:
	MinkowskiNormSpec() = default;

	void require_away_from_zero(const Vector& y) const;

	Kind kind_ = Kind::Quadratic;
	int dim_ = 0;
	Matrix A_;      // quadratic/randers
	Vector b_;      // randers
	Evaluator value_;
	GradientFn grad_;
	TensorFn tensor_;
	StepPolicy steps_;
};

} // namespace finsler
