#include "finsler/norm.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

namespace finsler {

namespace {

std::string format_vector(const Vector& y) {
	std::ostringstream os;
	os << "(";
	for (int i = 0; i < y.size(); ++i) os << (i ? ", " : "") << y[i];
	os << ")";
	return os.str();
}

void require_spd(const Matrix& A, const char* what) {
	if (A.rows() != A.cols() || A.rows() < 1)
		throw FinslerError(std::string(what) + ": matrix must be square");
	if (!A.isApprox(A.transpose(), 1e-12))
		throw FinslerError(std::string(what) + ": matrix must be symmetric");
	Eigen::LLT<Matrix> llt(A);
	if (llt.info() != Eigen::Success)
		throw FinslerError(std::string(what) + ": matrix is not positive definite");
}

} // namespace

MinkowskiNormSpec MinkowskiNormSpec::quadratic(Matrix A, const StepPolicy& steps) {
	require_spd(A, "quadratic norm");
	MinkowskiNormSpec s;
	s.kind_ = Kind::Quadratic;
	s.dim_ = static_cast<int>(A.rows());
	s.A_ = std::move(A);
	s.steps_ = steps;
	return s;
}

MinkowskiNormSpec MinkowskiNormSpec::randers(Matrix A, Vector b, const StepPolicy& steps) {
	require_spd(A, "randers norm");
	if (b.size() != A.rows()) throw FinslerError("randers norm: drift covector has wrong dimension");
	// Strong convexity of the unit ball requires |b|_{A^{-1}} < 1.
	const double bnorm2 = b.dot(A.llt().solve(b));
	if (!(bnorm2 < 1.0 - 1e-12))
		throw FinslerError("randers norm: not strongly convex, |b|_{A^{-1}} = " +
		                   std::to_string(std::sqrt(std::max(bnorm2, 0.0))));
	MinkowskiNormSpec s;
	s.kind_ = Kind::Randers;
	s.dim_ = static_cast<int>(A.rows());
	s.A_ = std::move(A);
	s.b_ = std::move(b);
	s.steps_ = steps;
	return s;
}

MinkowskiNormSpec MinkowskiNormSpec::custom(int dim, Evaluator value, const StepPolicy& steps) {
	if (dim < 1) throw FinslerError("custom norm: dimension must be >= 1");
	if (!value) throw FinslerError("custom norm: empty evaluator");
	MinkowskiNormSpec s;
	s.kind_ = Kind::Custom;
	s.dim_ = dim;
	s.value_ = std::move(value);
	s.steps_ = steps;
	return s;
}

MinkowskiNormSpec MinkowskiNormSpec::custom_with_derivatives(int dim, Evaluator value,
                                                             GradientFn grad, TensorFn tensor,
                                                             const StepPolicy& steps) {
	MinkowskiNormSpec s = custom(dim, std::move(value), steps);
	s.grad_ = std::move(grad);
	s.tensor_ = std::move(tensor);
	return s;
}

void MinkowskiNormSpec::require_away_from_zero(const Vector& y) const {
	if (y.size() != dim_) throw FinslerError("norm: vector has wrong dimension");
	if (y.norm() < 1e-10 * std::max(1.0, steps_.chart_scale))
		throw FinslerError("norm: y too close to 0 at y=" + format_vector(y));
}

double MinkowskiNormSpec::value(const Vector& y) const {
	if (y.size() != dim_) throw FinslerError("norm: vector has wrong dimension");
	if (y.isZero(0.0)) return 0.0;
	double v = 0.0;
	switch (kind_) {
	case Kind::Quadratic:
		v = std::sqrt(y.dot(A_ * y));
		break;
	case Kind::Randers:
		v = std::sqrt(y.dot(A_ * y)) + b_.dot(y);
		break;
	case Kind::Custom:
		v = value_(y);
		break;
	}
	if (!std::isfinite(v))
		throw FinslerError("norm evaluation failed at y=" + format_vector(y));
	return v;
}

Vector MinkowskiNormSpec::gradient(const Vector& y) const {
	require_away_from_zero(y);
	switch (kind_) {
	case Kind::Quadratic: {
		const Vector Ay = A_ * y;
		return Ay / std::sqrt(y.dot(Ay));
	}
	case Kind::Randers: {
		const Vector Ay = A_ * y;
		return Ay / std::sqrt(y.dot(Ay)) + b_;
	}
	case Kind::Custom:
		break;
	}
	if (grad_) return grad_(y);
	// Central differences at the first-derivative optimum.
	const double h = 6.06e-6 * std::max(1.0, y.norm());
	Vector g(dim_), yp, ym;
	for (int i = 0; i < dim_; ++i) {
		yp = y; yp[i] += h;
		ym = y; ym[i] -= h;
		g[i] = (value(yp) - value(ym)) / (2.0 * h);
	}
	return g;
}

FundamentalTensor MinkowskiNormSpec::fundamental_tensor(const Vector& y) const {
	require_away_from_zero(y);
	FundamentalTensor out;
	out.y = y;
	switch (kind_) {
	case Kind::Quadratic:
		out.g = A_;
		return out;
	case Kind::Randers: {
		// g = (F/a) (A - (Ay)(Ay)^T / a^2) + l l^T with a = |y|_A, l = Ay/a + b.
		const Vector Ay = A_ * y;
		const double a = std::sqrt(y.dot(Ay));
		const double F = a + b_.dot(y);
		const Vector l = Ay / a + b_;
		out.g = (F / a) * (A_ - (Ay * Ay.transpose()) / (a * a)) + l * l.transpose();
		return out;
	}
	case Kind::Custom:
		break;
	}
	if (tensor_) {
		out.g = tensor_(y);
		return out;
	}
	// Half the second-difference Hessian of F^2.
	const double h = steps_.hessian_step * std::max(1.0, y.norm());
	auto L = [this](const Vector& v) { const double f = value(v); return f * f; };
	Matrix H(dim_, dim_);
	const double L0 = L(y);
	Vector ya, yb;
	for (int i = 0; i < dim_; ++i) {
		ya = y; ya[i] += h;
		yb = y; yb[i] -= h;
		H(i, i) = (L(ya) - 2.0 * L0 + L(yb)) / (h * h);
		for (int j = i + 1; j < dim_; ++j) {
			ya = y; ya[i] += h; ya[j] += h;
			yb = y; yb[i] += h; yb[j] -= h;
			Vector yc = y; yc[i] -= h; yc[j] += h;
			Vector yd = y; yd[i] -= h; yd[j] -= h;
			H(i, j) = H(j, i) = (L(ya) - L(yb) - L(yc) + L(yd)) / (4.0 * h * h);
		}
	}
	out.g = 0.5 * H;
	if (!out.g.allFinite())
		throw FinslerError("norm evaluation failed at y=" + format_vector(y));
	Eigen::LLT<Matrix> llt(out.g);
	if (llt.info() != Eigen::Success)
		throw FinslerError("strong convexity violated at y=" + format_vector(y));
	return out;
}

double MinkowskiNormSpec::inner(const Vector& y, const Vector& u, const Vector& v) const {
	return u.dot(fundamental_tensor(y).g * v);
}

std::vector<Vector> MinkowskiNormSpec::orthogonal_complement_basis(const Vector& y) const {
	const Matrix g = fundamental_tensor(y).g;
	auto dot = [&](const Vector& u, const Vector& v) { return u.dot(g * v); };

	std::vector<Vector> basis;
	basis.reserve(dim_);
	const Vector y_unit = y / std::sqrt(dot(y, y));
	basis.push_back(y_unit);

	for (int i = 0; i < dim_ && static_cast<int>(basis.size()) < dim_; ++i) {
		Vector v = Vector::Zero(dim_);
		v[i] = 1.0;
		// Two projection passes keep the residual orthogonality near roundoff.
		for (int pass = 0; pass < 2; ++pass)
			for (const Vector& b : basis) v -= dot(b, v) * b;
		const double r = std::sqrt(std::max(dot(v, v), 0.0));
		if (r < 1e-8) continue; // canonical vector nearly inside the span
		basis.push_back(v / r);
	}
	if (static_cast<int>(basis.size()) != dim_)
		throw FinslerError("orthogonal complement construction failed (degenerate tensor?)");
	return {basis.begin() + 1, basis.end()};
}

const Matrix& MinkowskiNormSpec::quadratic_form() const {
	if (kind_ == Kind::Custom) throw FinslerError("norm: no quadratic form on a custom norm");
	return A_;
}

const Vector& MinkowskiNormSpec::drift_covector() const {
	if (kind_ != Kind::Randers) throw FinslerError("norm: drift covector only exists for randers");
	return b_;
}

} // namespace finsler
