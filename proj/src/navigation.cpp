#include "finsler/navigation.hpp"

#include <cmath>
#include <sstream>

namespace finsler {

namespace {

std::string format_point(const Vector& x) {
	std::ostringstream os;
	os << "(";
	for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
	os << ")";
	return os.str();
}

void require_admissible(const MinkowskiNormSpec& base_norm, const Vector& Vx, const Vector& x,
                        double margin) {
	const double headwind = Vx.isZero(0.0) ? 0.0 : base_norm.value(-Vx);
	if (!(headwind < 1.0 - margin)) {
		std::ostringstream os;
		os << "navigation undefined: F(x,-V(x)) = " << headwind << " >= " << 1.0 - margin
		   << " at x=" << format_point(x);
		throw FinslerError(os.str());
	}
}

// Solves F(u - lambda V) = lambda for the direction u, |u| = O(1).
// h(lambda) = F(u - lambda V) - lambda decreases at rate at least
// 1 - F(-V) > 0, so the root is unique and bracketed by
// [0, F(u) / (1 - F(-V))]. Newton from F(u), clipped into the bracket.
double solve_unit(const MinkowskiNormSpec& base, const Vector& Vx, const Vector& u) {
	const double f0 = base.value(u);
	if (f0 == 0.0) return 0.0;
	const double headwind = Vx.isZero(0.0) ? 0.0 : base.value(-Vx);
	if (Vx.isZero(0.0)) return f0;

	double lo = 0.0, hi = f0 / (1.0 - headwind);
	double lam = f0;
	double h = 0.0;
	for (int it = 0; it < 100; ++it) {
		const Vector ystar = u - lam * Vx;
		h = base.value(ystar) - lam;
		if (std::abs(h) <= 1e-15 * std::max(1.0, lam)) return lam;
		if (h > 0.0)
			lo = lam;
		else
			hi = lam;
		const double slope = -base.gradient(ystar).dot(Vx) - 1.0; // < 0
		double next = lam - h / slope;
		if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
		if (std::abs(next - lam) <= 4.0 * 2.22e-16 * std::max(1.0, lam)) return next;
		lam = next;
	}
	return lam;
}

double solve_navigation(const MinkowskiNormSpec& base, const Vector& Vx, const Vector& ytilde) {
	// The solution is positively homogeneous in ~y; normalizing keeps the
	// intermediate base-norm arguments away from the zero floor.
	const double scale = ytilde.norm();
	if (scale == 0.0) return 0.0;
	return scale * solve_unit(base, Vx, ytilde / scale);
}

/// Custom-kind norm for the deformed metric at a fixed point, with analytic
/// derivatives by implicit differentiation of F(~y - lambda V) = lambda:
/// with p = dF(y*), s = p.V, H = d2F(y*), q = HV, r = V.HV,
///   dlambda = p / (1+s)
///   d2lambda = (H - q dlambda^T)/(1+s) - p (q - r dlambda)^T / (1+s)^2
/// and g~ = lambda d2lambda + dlambda dlambda^T. Everything evaluates at
/// y* = ~y - lambda V, where F(y*) = lambda exactly.
MinkowskiNormSpec deformed_norm(const MinkowskiNormSpec& base, const Vector& Vx,
                                const StepPolicy& steps) {
	const int n = base.dim();
	auto value = [base, Vx](const Vector& yt) { return solve_navigation(base, Vx, yt); };
	auto grad = [base, Vx](const Vector& yt) -> Vector {
		const double lam = solve_navigation(base, Vx, yt);
		const Vector ystar = yt - lam * Vx;
		const Vector p = base.gradient(ystar);
		return p / (1.0 + p.dot(Vx));
	};
	auto tensor = [base, Vx](const Vector& yt) -> Matrix {
		const double lam = solve_navigation(base, Vx, yt);
		const Vector ystar = yt - lam * Vx;
		const Vector p = base.gradient(ystar);
		const Matrix g = base.fundamental_tensor(ystar).g;
		const Matrix H = (g - p * p.transpose()) / lam; // Hessian of F at y*
		const Vector q = H * Vx;
		const double r = Vx.dot(q);
		const double s = p.dot(Vx);
		const Vector dl = p / (1.0 + s);
		const Matrix d2l = (H - q * dl.transpose()) / (1.0 + s) -
		                   (p * (q - r * dl).transpose()) / ((1.0 + s) * (1.0 + s));
		return lam * d2l + dl * dl.transpose();
	};
	return MinkowskiNormSpec::custom_with_derivatives(n, std::move(value), std::move(grad),
	                                                  std::move(tensor), steps);
}

} // namespace

bool NavigationDatum::admissible(const Vector& x) const {
	const Vector Vx = wind.value(x);
	if (Vx.isZero(0.0)) return true;
	return base->value(x, -Vx) < 1.0 - margin;
}

double NavigationDatum::admissibility_gap(const Vector& x) const {
	const Vector Vx = wind.value(x);
	const double headwind = Vx.isZero(0.0) ? 0.0 : base->value(x, -Vx);
	return 1.0 - margin - headwind;
}

NavigationDatum make_navigation(ChartedFinslerMetric base, VectorFieldSpec wind, double margin) {
	NavigationDatum d;
	d.base = std::make_shared<ChartedFinslerMetric>(std::move(base));
	d.wind = std::move(wind);
	d.margin = margin;
	return d;
}

double navigate(const NavigationDatum& datum, const Vector& x, const Vector& ytilde) {
	const MinkowskiNormSpec base_norm = datum.base->norm_at(x);
	const Vector Vx = datum.wind.value(x);
	require_admissible(base_norm, Vx, x, datum.margin);
	return solve_navigation(base_norm, Vx, ytilde);
}

double inverse_navigate(const NavigationDatum& datum, const Vector& x, const Vector& y) {
	const MinkowskiNormSpec base_norm = datum.base->norm_at(x);
	const Vector Vx = datum.wind.value(x);
	require_admissible(base_norm, Vx, x, datum.margin);
	if (y.isZero(0.0)) return 0.0;
	const MinkowskiNormSpec deformed = deformed_norm(base_norm, Vx, base_norm.steps());

	// k(mu) = F~(y + mu V) - mu falls at rate >= 1 - F~(V) > 0 (V sits
	// strictly inside the deformed unit body, so F~(V) < 1).
	const double k0 = deformed.value(y);
	if (Vx.isZero(0.0)) return k0;
	const double tailwind = deformed.value(Vx);
	double lo = 0.0, hi = k0 / (1.0 - tailwind);
	double mu = k0;
	for (int it = 0; it < 100; ++it) {
		const Vector yt = y + mu * Vx;
		const double k = deformed.value(yt) - mu;
		if (std::abs(k) <= 1e-15 * std::max(1.0, mu)) return mu;
		if (k > 0.0)
			lo = mu;
		else
			hi = mu;
		const double slope = deformed.gradient(yt).dot(Vx) - 1.0; // < 0
		double next = mu - k / slope;
		if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
		if (std::abs(next - mu) <= 4.0 * 2.22e-16 * std::max(1.0, mu)) return next;
		mu = next;
	}
	return mu;
}

ChartedFinslerMetric navigated_metric(const NavigationDatum& datum, const StepPolicy& steps) {
	ChartedFinslerMetric m;
	m.name = "navigated(" + datum.base->name + ", " + datum.wind.name + ")";
	m.domain = datum.base->domain;
	const NavigationDatum d = datum; // value capture: the metric owns its data
	m.norm_at = [d, steps](const Vector& x) {
		const MinkowskiNormSpec base_norm = d.base->norm_at(x);
		const Vector Vx = d.wind.value(x);
		require_admissible(base_norm, Vx, x, d.margin);
		return deformed_norm(base_norm, Vx, steps);
	};
	return m;
}

ChartedFinslerMetric navigate_randers(const ChartedFinslerMetric& riemannian_base,
                                      const VectorFieldSpec& wind, const StepPolicy& steps) {
	ChartedFinslerMetric m;
	m.name = "randers(" + riemannian_base.name + ", " + wind.name + ")";
	m.domain = riemannian_base.domain;
	const auto base_at = riemannian_base.norm_at;
	const auto wind_value = wind.value;
	m.norm_at = [base_at, wind_value, steps](const Vector& x) {
		const MinkowskiNormSpec base_norm = base_at(x);
		if (base_norm.kind() != MinkowskiNormSpec::Kind::Quadratic)
			throw FinslerError("navigate_randers: base metric must be riemannian");
		const Matrix& A = base_norm.quadratic_form();
		const Vector W = wind_value(x);
		const double l = 1.0 - W.dot(A * W);
		if (!(l > 0.0))
			throw FinslerError("navigation undefined: |W|_A >= 1 at x=" + format_point(x));
		const Vector AW = A * W;
		const Matrix At = A / l + (AW * AW.transpose()) / (l * l);
		const Vector bt = -AW / l;
		return MinkowskiNormSpec::randers(At, bt, steps);
	};
	return m;
}

double verify_tensor_relation(const NavigationDatum& datum, const Vector& x, const Vector& y) {
	const MinkowskiNormSpec base_norm = datum.base->norm_at(x);
	const Vector Vx = datum.wind.value(x);
	require_admissible(base_norm, Vx, x, datum.margin);

	const double F = base_norm.value(y);
	const Vector ytilde = y + F * Vx;
	const MinkowskiNormSpec deformed = deformed_norm(base_norm, Vx, base_norm.steps());

	const Matrix g = base_norm.fundamental_tensor(y).g;
	const Matrix gt = deformed.fundamental_tensor(ytilde).g;
	const double pairing = y.dot(g * Vx) / F; // <V, y/F>_y, 0-homogeneous form
	const double factor = 1.0 / (1.0 + pairing);

	const auto basis = base_norm.orthogonal_complement_basis(y);
	double worst = 0.0;
	for (std::size_t i = 0; i < basis.size(); ++i)
		for (std::size_t j = i; j < basis.size(); ++j) {
			const double lhs = basis[i].dot(gt * basis[j]);
			const double rhs = factor * basis[i].dot(g * basis[j]);
			worst = std::max(worst, std::abs(lhs - rhs) / factor);
		}
	return worst;
}

double verify_volume_equality(const NavigationDatum& datum, const Vector& x, long budget,
                              std::uint64_t seed) {
	// Same integration path on both sides: force the base off its exact
	// determinant shortcut so discretization bias cancels in the comparison.
	const double sigma_base = bh_density(*datum.base, x, budget, seed, true).sigma;
	const ChartedFinslerMetric deformed = navigated_metric(datum);
	const double sigma_def = bh_density(deformed, x, budget, seed, true).sigma;
	return std::abs(sigma_base - sigma_def) / sigma_base;
}

} // namespace finsler
