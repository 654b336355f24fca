#include "finsler/chart.hpp"

#include "finsler/ode.hpp"
#include "finsler/util.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace finsler {

// ===========================================================================
// ChartDomain
// ===========================================================================

ChartDomain ChartDomain::ball(Vector center, double radius) {
	if (radius <= 0.0) throw FinslerError("chart domain: radius must be positive");
	ChartDomain d;
	d.shape = Shape::Ball;
	d.center = std::move(center);
	d.radius = radius;
	return d;
}

ChartDomain ChartDomain::box(Vector lo, Vector hi) {
	if (lo.size() != hi.size() || ((hi - lo).array() <= 0.0).any())
		throw FinslerError("chart domain: box corners out of order");
	ChartDomain d;
	d.shape = Shape::Box;
	d.lo = std::move(lo);
	d.hi = std::move(hi);
	d.center = 0.5 * (d.lo + d.hi);
	d.radius = 0.5 * (d.hi - d.lo).maxCoeff();
	return d;
}

bool ChartDomain::contains(const Vector& x, double shrink) const {
	if (x.size() != center.size()) return false;
	if (shape == Shape::Ball) return (x - center).norm() < radius - shrink;
	return ((x - lo).array() > shrink).all() && ((hi - x).array() > shrink).all();
}

double ChartDomain::scale() const { return radius; }

// ===========================================================================
// ChartedFinslerMetric factories
// ===========================================================================

ChartedFinslerMetric ChartedFinslerMetric::riemannian(std::string name, ChartDomain domain,
                                                      std::function<Matrix(const Vector&)> A_at,
                                                      const StepPolicy& steps) {
	ChartedFinslerMetric m;
	m.name = std::move(name);
	m.domain = std::move(domain);
	m.norm_at = [A_at = std::move(A_at), steps](const Vector& x) {
		return MinkowskiNormSpec::quadratic(A_at(x), steps);
	};
	return m;
}

ChartedFinslerMetric ChartedFinslerMetric::euclidean(int n, double chart_radius) {
	return riemannian("euclidean", ChartDomain::ball(Vector::Zero(n), chart_radius),
	                  [n](const Vector&) { return Matrix::Identity(n, n); });
}

// ===========================================================================
// Vector fields and flows
// ===========================================================================

Matrix VectorFieldSpec::jacobian_at(const Vector& x) const {
	if (jacobian) return jacobian(x);
	const int n = static_cast<int>(x.size());
	const double h = 1e-6 * std::max(1.0, x.norm());
	Matrix J(n, n);
	Vector xp, xm;
	for (int j = 0; j < n; ++j) {
		xp = x; xp[j] += h;
		xm = x; xm[j] -= h;
		J.col(j) = (value(xp) - value(xm)) / (2.0 * h);
	}
	return J;
}

VectorFieldSpec VectorFieldSpec::affine(Matrix A, Vector b, std::string name) {
	const int n = static_cast<int>(A.rows());
	if (A.cols() != n || b.size() != n) throw FinslerError("affine field: shape mismatch");
	VectorFieldSpec V;
	V.name = std::move(name);
	V.value = [A, b](const Vector& x) -> Vector { return A * x + b; };
	V.jacobian = [A](const Vector&) { return A; };
	// Flow through the augmented matrix exponential: the (n+1)x(n+1) block
	// [[A, b], [0, 0]] exponentiates to [[M(t), w(t)], [0, 1]] with
	// flow_t(x) = M(t) x + w(t) and tangent map M(t). Handles singular A.
	V.exact_flow = [A, b, n](const Vector& x, double t) {
		Matrix B = Matrix::Zero(n + 1, n + 1);
		B.topLeftCorner(n, n) = A * t;
		B.topRightCorner(n, 1) = b * t;
		const Matrix E = B.exp();
		FlowResult r;
		r.tangent = E.topLeftCorner(n, n);
		r.point = r.tangent * x + E.topRightCorner(n, 1);
		return r;
	};
	return V;
}

VectorFieldSpec VectorFieldSpec::radial(int n) {
	return affine(Matrix::Identity(n, n), Vector::Zero(n), "radial");
}

VectorFieldSpec VectorFieldSpec::rotation(int n, double rate) {
	if (n < 2) throw FinslerError("rotation field needs dimension >= 2");
	Matrix A = Matrix::Zero(n, n);
	A(0, 1) = -rate;
	A(1, 0) = rate;
	return affine(std::move(A), Vector::Zero(n), "rotation");
}

VectorFieldSpec VectorFieldSpec::translation(Vector w) {
	const int n = static_cast<int>(w.size());
	return affine(Matrix::Zero(n, n), std::move(w), "translation");
}

VectorFieldSpec VectorFieldSpec::zero(int n) {
	return affine(Matrix::Zero(n, n), Vector::Zero(n), "zero");
}

FlowResult flow(const VectorFieldSpec& V, const Vector& x, double t, const ChartDomain* domain,
                double rtol) {
	if (domain && !domain->contains(x))
		throw FinslerError("flow left chart: start point outside domain");
	if (V.exact_flow) {
		FlowResult r = V.exact_flow(x, t);
		if (domain && !domain->contains(r.point)) {
			std::ostringstream os;
			os << "flow left chart at t=" << t;
			throw FinslerError(os.str());
		}
		return r;
	}

	// Joint system: point plus the columns of the tangent map.
	const int n = static_cast<int>(x.size());
	Vector state(n + n * n);
	state.head(n) = x;
	Matrix id = Matrix::Identity(n, n);
	for (int j = 0; j < n; ++j) state.segment(n + j * n, n) = id.col(j);

	OdeRhs rhs = [&V, n](double, const Vector& s, Vector& ds) {
		const Vector p = s.head(n);
		ds.resize(n + n * n);
		ds.head(n) = V.value(p);
		const Matrix J = V.jacobian_at(p);
		for (int j = 0; j < n; ++j) ds.segment(n + j * n, n) = J * s.segment(n + j * n, n);
	};

	OdeOptions opt;
	opt.rtol = rtol;
	opt.atol = rtol * 1e-2;
	double exit_t = 0.0;
	std::function<bool(double, const Vector&)> guard;
	if (domain)
		guard = [&](double tt, const Vector& s) {
			if (!domain->contains(s.head(n))) {
				exit_t = tt;
				return false;
			}
			return true;
		};

	Vector final_state = state;
	const OdeStatus st = integrate_ode(
	    rhs, state, 0.0, t, {}, [&](double, const Vector& s) { final_state = s; }, opt, guard);
	if (!st.completed) {
		std::ostringstream os;
		if (st.message == "guard stopped integration")
			os << "flow left chart at t=" << exit_t;
		else
			os << "flow integration failed: " << st.message;
		throw FinslerError(os.str());
	}

	FlowResult r;
	r.point = final_state.head(n);
	r.tangent.resize(n, n);
	for (int j = 0; j < n; ++j) r.tangent.col(j) = final_state.segment(n + j * n, n);
	return r;
}

// ===========================================================================
// Dilation measurement
// ===========================================================================

DilationEstimate homothetic_dilation(const ChartedFinslerMetric& F, VectorFieldSpec& V,
                                     const std::vector<std::pair<Vector, Vector>>& samples,
                                     const StepPolicy& steps) {
	if (samples.empty()) throw FinslerError("homothetic_dilation: no samples");
	const double h = steps.flow_probe_step;

	// Model: d/dt F(flow_t x, Dflow_t y) at t=0 equals -2c F(x, y).
	// Least squares over samples, then the worst relative misfit.
	std::vector<double> dphi, f0;
	dphi.reserve(samples.size());
	f0.reserve(samples.size());
	for (const auto& [x, y] : samples) {
		const FlowResult fwd = flow(V, x, h, nullptr, steps.ode_rtol);
		const FlowResult bwd = flow(V, x, -h, nullptr, steps.ode_rtol);
		const double fp = F.value(fwd.point, fwd.tangent * y);
		const double fm = F.value(bwd.point, bwd.tangent * y);
		dphi.push_back((fp - fm) / (2.0 * h));
		f0.push_back(F.value(x, y));
	}

	double num = 0.0, den = 0.0;
	for (std::size_t i = 0; i < dphi.size(); ++i) {
		num += dphi[i] * f0[i];
		den += f0[i] * f0[i];
	}
	DilationEstimate est;
	est.c = -num / (2.0 * den);

	// Residual per sample, normalized by the norm value so Killing fields
	// (c = 0) are judged on the same absolute footing.
	for (std::size_t i = 0; i < dphi.size(); ++i) {
		const double res = std::abs(dphi[i] + 2.0 * est.c * f0[i]) / f0[i];
		est.max_residual = std::max(est.max_residual, res / std::max(1.0, 2.0 * std::abs(est.c)));
	}
	if (est.max_residual < 1e-6) V.dilation = est.c;
	return est;
}

// ===========================================================================
// Busemann-Hausdorff density
// ===========================================================================

namespace {

// Radial support of the unit body along direction e: solves F(x, r e) = 1.
// One-homogeneity makes r = 1/F(x, e) the exact answer; a Newton polish
// keeps the routine honest for evaluators that are only approximately
// homogeneous (it converges in one step otherwise).
double radial_support(const MinkowskiNormSpec& norm, const Vector& e) {
	const double f = norm.value(e);
	if (!(f > 0.0)) throw FinslerError("bh_density: norm not positive on a direction");
	double r = 1.0 / f;
	for (int it = 0; it < 8; ++it) {
		const double fr = norm.value(r * e);
		const double df = norm.gradient(r * e).dot(e);
		if (std::abs(fr - 1.0) < 1e-14) break;
		if (!(df > 0.0)) break;
		r -= (fr - 1.0) / df;
	}
	return r;
}

DensityValue density_dim1(const MinkowskiNormSpec& norm) {
	Vector e(1);
	e[0] = 1.0;
	const double rp = radial_support(norm, e);
	e[0] = -1.0;
	const double rm = radial_support(norm, e);
	DensityValue d;
	d.sigma = 2.0 / (rp + rm);
	return d;
}

// Composite Simpson over the angle; the integrand is smooth and periodic so
// the rule converges far faster than its algebraic order.
DensityValue density_dim2_quadrature(const MinkowskiNormSpec& norm) {
	constexpr int kNodes = 2048; // even
	const double dtheta = 2.0 * M_PI / kNodes;
	double area2 = 0.0; // integral of r(theta)^2
	Vector e(2);
	for (int k = 0; k <= kNodes; ++k) {
		const double th = k * dtheta;
		e[0] = std::cos(th);
		e[1] = std::sin(th);
		const double r = radial_support(norm, e);
		const double w = (k == 0 || k == kNodes) ? 1.0 : (k % 2 ? 4.0 : 2.0);
		area2 += w * r * r;
	}
	area2 *= dtheta / 3.0;
	DensityValue d;
	d.sigma = M_PI / (0.5 * area2);
	return d;
}

// Product quadrature on the sphere: Gauss-Legendre in cos(theta), trapezoid
// in the periodic angle. The integrand u -> r(u)^3 is smooth, so the rule
// converges fast; the error report compares against a half-order pass.
DensityValue density_dim3_quadrature(const MinkowskiNormSpec& norm) {
	auto body_volume = [&norm](int m_polar, int m_azimuth) {
		std::vector<double> cn, cw;
		gauss_legendre(m_polar, cn, cw);
		Vector u(3);
		double acc = 0.0;
		for (int i = 0; i < m_polar; ++i) {
			const double ci = cn[i];
			const double si = std::sqrt(std::max(0.0, 1.0 - ci * ci));
			double ring = 0.0;
			for (int j = 0; j < m_azimuth; ++j) {
				const double phi = 2.0 * M_PI * j / m_azimuth;
				u[0] = si * std::cos(phi);
				u[1] = si * std::sin(phi);
				u[2] = ci;
				const double r = radial_support(norm, u);
				ring += r * r * r;
			}
			acc += cw[i] * ring * (2.0 * M_PI / m_azimuth);
		}
		return acc / 3.0;
	};
	const double coarse = body_volume(32, 64);
	const double fine = body_volume(64, 128);
	DensityValue d;
	d.sigma = unit_ball_volume(3) / fine;
	d.estimator_error = std::abs(unit_ball_volume(3) / coarse - d.sigma);
	return d;
}

DensityValue density_qmc(const MinkowskiNormSpec& norm, long budget, std::uint64_t seed) {
	const int n = norm.dim();
	// Bounding radius: the body lies inside 1/min_e F(e). Estimate the
	// minimum over scrambled directions and pad; points outside the body
	// only cost efficiency, never correctness.
	Rng rng(seed);
	double fmin = std::numeric_limits<double>::max();
	for (int k = 0; k < 4096; ++k) fmin = std::min(fmin, norm.value(rng.direction(n)));
	const double R = 1.15 / fmin;

	long inside = 0;
	Vector y(n);
	static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
	const std::uint64_t offset = 1 + (seed % 65536);
	for (long k = 0; k < budget; ++k) {
		for (int i = 0; i < n; ++i)
			y[i] = R * (2.0 * halton(offset + static_cast<std::uint64_t>(k), primes[i]) - 1.0);
		if (norm.value(y) <= 1.0) ++inside;
	}
	const double frac = static_cast<double>(inside) / static_cast<double>(budget);
	const double box = std::pow(2.0 * R, n);
	DensityValue d;
	const double body = frac * box;
	d.sigma = unit_ball_volume(n) / body;
	// Conservative plain-MC error bar; Halton does better in practice.
	const double vol_err = box * std::sqrt(std::max(frac * (1.0 - frac), 1e-12) /
	                                        static_cast<double>(budget));
	d.estimator_error = d.sigma * vol_err / body;
	return d;
}

} // namespace

DensityValue bh_density(const ChartedFinslerMetric& F, const Vector& x, long budget,
                        std::uint64_t seed, bool force_quadrature) {
	const MinkowskiNormSpec norm = F.norm_at(x);
	const int n = norm.dim();
	if (norm.kind() == MinkowskiNormSpec::Kind::Quadratic && !force_quadrature) {
		// Unit body is the ellipsoid of A: vol = V_n / sqrt(det A).
		DensityValue d;
		d.sigma = std::sqrt(norm.quadratic_form().determinant());
		return d;
	}
	if (n == 1) return density_dim1(norm);
	if (n == 2) return density_dim2_quadrature(norm);
	if (n == 3) return density_dim3_quadrature(norm);
	return density_qmc(norm, budget, seed);
}

double distortion(const ChartedFinslerMetric& F, const Vector& x, const Vector& y, long budget,
                  std::uint64_t seed) {
	const Matrix g = F.tensor(x, y);
	const DensityValue d = bh_density(F, x, budget, seed);
	return 0.5 * std::log(g.determinant()) - std::log(d.sigma);
}

double verify_homothetic_volume_scaling(const ChartedFinslerMetric& F, const VectorFieldSpec& V,
                                        double c, const Vector& x, double t, long budget,
                                        std::uint64_t seed) {
	const int n = F.dim();
	const FlowResult moved = flow(V, x, t);
	const double sigma_here = bh_density(F, x, budget, seed).sigma;
	const double sigma_there = bh_density(F, moved.point, budget, seed).sigma;
	const double pulled_back = sigma_there * moved.tangent.determinant();
	const double expected = std::exp(-2.0 * c * n * t) * sigma_here;
	return std::abs(pulled_back - expected) / std::abs(expected);
}

} // namespace finsler
