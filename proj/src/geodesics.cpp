#include "finsler/geodesics.hpp"

#include "finsler/ode.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace finsler {

// ===========================================================================
// Dense-output helpers
// ===========================================================================

namespace {

std::size_t locate(const std::vector<double>& T, double s, const char* what) {
	if (T.size() < 2) {
		std::ostringstream os;
		os << what << " has no covered span to evaluate";
		throw FinslerError(os.str());
	}
	const double tol = 1e-9 * std::max(1.0, T.back() - T.front());
	if (s < T.front() - tol || s > T.back() + tol) {
		std::ostringstream os;
		os << what << " evaluated at t=" << s << " outside covered span [" << T.front() << ", "
		   << T.back() << "]";
		throw FinslerError(os.str());
	}
	auto it = std::upper_bound(T.begin(), T.end(), s);
	std::size_t i = (it == T.begin()) ? 0 : static_cast<std::size_t>(it - T.begin()) - 1;
	return std::min(i, T.size() - 2);
}

// Cubic Hermite from values P and derivatives D on the bracketing interval.
Vector hermite(const std::vector<double>& T, const std::vector<Vector>& P,
               const std::vector<Vector>& D, double s, std::size_t i) {
	const double h = T[i + 1] - T[i];
	const double u = (s - T[i]) / h;
	const double u2 = u * u, u3 = u2 * u;
	return (2.0 * u3 - 3.0 * u2 + 1.0) * P[i] + ((u3 - 2.0 * u2 + u) * h) * D[i] +
	       (-2.0 * u3 + 3.0 * u2) * P[i + 1] + ((u3 - u2) * h) * D[i + 1];
}

} // namespace

Vector GeodesicSolution::position(double s) const {
	return hermite(t, x, v, s, locate(t, s, "geodesic"));
}

Vector GeodesicSolution::velocity(double s) const {
	return hermite(t, v, a, s, locate(t, s, "geodesic"));
}

Vector JacobiSolution::value(double s) const {
	return hermite(t, j, jdot, s, locate(t, s, "jacobi field"));
}

Vector JacobiSolution::derivative(double s) const {
	return hermite(t, jdot, jddot, s, locate(t, s, "jacobi field"));
}

// ===========================================================================
// Spray and jets
// ===========================================================================

Vector spray(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
             const StepPolicy& steps) {
	const int n = m.dim();
	const double yn = y.norm();
	if (yn < 1e-14 * std::max(1.0, steps.chart_scale)) return Vector::Zero(n); // 2-homogeneous
	const double hx = steps.x_step * std::max(steps.chart_scale, x.norm());

	const Matrix g = m.tensor(x, y);

	// Euler-Lagrange pieces for L = F^2: the y-gradient of L is 2 g_y y
	// exactly, so its x-derivative contracted with y is a single directional
	// difference along y, and the x-gradient of L needs only norm values.
	const double s = hx / yn;
	const Vector lp = 2.0 * (m.tensor(x + s * y, y) * y);
	const Vector lm = 2.0 * (m.tensor(x - s * y, y) * y);
	const Vector w = (lp - lm) / (2.0 * s);

	Vector dL(n), xp, xm;
	for (int k = 0; k < n; ++k) {
		xp = x;
		xp[k] += hx;
		xm = x;
		xm[k] -= hx;
		const double fp = m.value(xp, y);
		const double fm = m.value(xm, y);
		dL[k] = (fp * fp - fm * fm) / (2.0 * hx);
	}
	return 0.25 * g.llt().solve(w - dL);
}

Matrix nonlinear_connection(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                            const StepPolicy& steps) {
	const int n = m.dim();
	const double hy = steps.spray_jet_step * std::max(1.0, y.norm());
	Matrix N(n, n);
	Vector yp, ym;
	for (int k = 0; k < n; ++k) {
		yp = y;
		yp[k] += hy;
		ym = y;
		ym[k] -= hy;
		N.col(k) = (spray(m, x, yp, steps) - spray(m, x, ym, steps)) / (2.0 * hy);
	}
	return N;
}

SprayJet spray_jet(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                   const StepPolicy& steps) {
	const int n = m.dim();
	SprayJet jet;
	jet.G = spray(m, x, y, steps);
	jet.dG_dx.resize(n, n);
	const double hx = steps.spray_jet_step * std::max(steps.chart_scale, x.norm());
	Vector xp, xm;
	for (int k = 0; k < n; ++k) {
		xp = x;
		xp[k] += hx;
		xm = x;
		xm[k] -= hx;
		jet.dG_dx.col(k) = (spray(m, xp, y, steps) - spray(m, xm, y, steps)) / (2.0 * hx);
	}
	jet.dG_dy = nonlinear_connection(m, x, y, steps);
	return jet;
}

Vector covariant_derivative(const ChartedFinslerMetric& m, const Vector& x, const Vector& v,
                            const Vector& U, const Vector& Udot, const StepPolicy& steps) {
	return Udot + nonlinear_connection(m, x, v, steps) * U;
}

// ===========================================================================
// Geodesic integration
// ===========================================================================

GeodesicSolution integrate_geodesic(const ChartedFinslerMetric& m, const Vector& x0,
                                    const Vector& v0, double t_from, double t_to, int grid,
                                    const StepPolicy& steps) {
	const int n = m.dim();
	if (x0.size() != n || v0.size() != n) throw FinslerError("geodesic: dimension mismatch");
	if (!(t_from <= 0.0 && t_to >= 0.0 && t_to > t_from))
		throw FinslerError("geodesic span must contain t = 0");
	if (!m.domain.contains(x0)) throw FinslerError("geodesic start outside chart");
	if (grid <= 0) grid = 200;
	const double dt = (t_to - t_from) / grid;
	const double shrink = 8.0 * steps.x_step * m.domain.scale();

	OdeRhs rhs = [&m, &steps, n](double, const Vector& s, Vector& ds) {
		ds.resize(2 * n);
		ds.head(n) = s.tail(n);
		ds.tail(n) = -2.0 * spray(m, s.head(n), s.tail(n), steps);
	};
	OdeOptions opt;
	opt.rtol = steps.ode_rtol;
	opt.atol = steps.ode_atol;
	auto guard = [&m, shrink, n](double, const Vector& s) {
		return m.domain.contains(s.head(n), shrink);
	};

	Vector state0(2 * n);
	state0 << x0, v0;

	struct Raw {
		std::vector<double> t;
		std::vector<Vector> x, v, a;
		std::vector<double> speed;
	};
	const double F0 = m.value(x0, v0);

	auto run = [&](double tend, Raw& out, bool& exited, std::string& why) {
		std::vector<double> ts;
		const double dirn = (tend > 0.0) ? 1.0 : -1.0;
		for (int k = 1; k * dt < std::abs(tend) * (1.0 - 1e-12); ++k) ts.push_back(dirn * k * dt);
		try {
			const OdeStatus st = integrate_ode(
			    rhs, state0, 0.0, tend, ts,
			    [&](double tt, const Vector& s) {
				    if (!out.t.empty() &&
				        std::abs(tt - out.t.back()) < 1e-13 * std::max(1.0, std::abs(tt)))
					    return;
				    out.t.push_back(tt);
				    out.x.push_back(s.head(n));
				    out.v.push_back(s.tail(n));
			    },
			    opt, guard);
			if (!st.completed) {
				exited = true;
				why = (st.message == "guard stopped integration") ? "left the chart" : st.message;
			}
		} catch (const FinslerError& e) {
			// The metric stopped being evaluable (admissibility edge and the
			// like): treat as a trajectory exit, keep the covered part.
			exited = true;
			why = e.what();
		}
		// Acceleration and speed per node; the exit node may sit past the
		// evaluable region, in which case it is dropped.
		for (std::size_t k = 0; k < out.t.size(); ++k) {
			try {
				out.a.push_back(-2.0 * spray(m, out.x[k], out.v[k], steps));
				out.speed.push_back(m.value(out.x[k], out.v[k]));
			} catch (const FinslerError&) {
				if (k + 1 == out.t.size() && exited) {
					out.t.pop_back();
					out.x.pop_back();
					out.v.pop_back();
					break;
				}
				throw;
			}
		}
	};

	Raw fwd, bwd;
	bool exf = false, exb = false;
	std::string whyf, whyb;
	if (t_to > 0.0) run(t_to, fwd, exf, whyf);
	if (t_from < 0.0) run(t_from, bwd, exb, whyb);

	GeodesicSolution sol;
	sol.exited_forward = exf;
	sol.exited_backward = exb;
	auto push = [&](const Raw& r, std::size_t k) {
		sol.t.push_back(r.t[k]);
		sol.x.push_back(r.x[k]);
		sol.v.push_back(r.v[k]);
		sol.a.push_back(r.a[k]);
		sol.speed_drift = std::max(sol.speed_drift, std::abs(r.speed[k] - F0));
	};
	for (std::size_t k = bwd.t.size(); k > 0; --k) push(bwd, k - 1);
	for (std::size_t k = 0; k < fwd.t.size(); ++k) {
		if (!sol.t.empty() && fwd.t[k] <= sol.t.back() + 1e-13) continue;
		push(fwd, k);
	}
	if (sol.t.size() < 2) throw FinslerError("geodesic left the chart immediately");

	if (exb || exf) {
		std::ostringstream os;
		if (exb) os << "backward integration stopped at t=" << sol.t_min() << " (" << whyb << ")";
		if (exf) {
			if (exb) os << "; ";
			os << "forward integration stopped at t=" << sol.t_max() << " (" << whyf << ")";
		}
		sol.note = os.str();
	}
	return sol;
}

// ===========================================================================
// Linearized flow: Jacobi fields and parallel transport
// ===========================================================================

namespace {

// Spray jets tabulated at geodesic nodes, interpolated by four-point
// Lagrange. The nodes are dense enough (default span/200) that the
// interpolation error sits far below the jets' own difference noise.
struct JetTable {
	std::vector<double> t;
	std::vector<Matrix> gx, gy;

	void eval(double s, Matrix& gxs, Matrix& gys) const {
		const std::size_t m = t.size();
		const std::size_t count = std::min<std::size_t>(4, m);
		auto it = std::upper_bound(t.begin(), t.end(), s);
		std::size_t i = (it == t.begin()) ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
		i = std::min(i, m - 2);
		std::size_t k0 = (i == 0) ? 0 : i - 1;
		if (k0 + count > m) k0 = m - count;
		gxs.setZero(gx[0].rows(), gx[0].cols());
		gys.setZero(gx[0].rows(), gx[0].cols());
		for (std::size_t a = 0; a < count; ++a) {
			double w = 1.0;
			for (std::size_t b = 0; b < count; ++b)
				if (b != a) w *= (s - t[k0 + b]) / (t[k0 + a] - t[k0 + b]);
			gxs += w * gx[k0 + a];
			gys += w * gy[k0 + a];
		}
	}
};

JetTable build_jets(const ChartedFinslerMetric& m, const GeodesicSolution& geo, double lo,
                    double hi, const StepPolicy& steps) {
	if (geo.t.size() < 2) throw FinslerError("jacobi: geodesic has no covered span");
	std::size_t i_lo = 0, i_hi = geo.t.size() - 1;
	while (i_lo + 1 < geo.t.size() && geo.t[i_lo + 1] <= lo) ++i_lo;
	while (i_hi > 0 && geo.t[i_hi - 1] >= hi) --i_hi;
	if (i_lo > 0) --i_lo;
	if (i_hi + 1 < geo.t.size()) ++i_hi;
	JetTable table;
	for (std::size_t i = i_lo; i <= i_hi; ++i) {
		const SprayJet jet = spray_jet(m, geo.x[i], geo.v[i], steps);
		table.t.push_back(geo.t[i]);
		table.gx.push_back(jet.dG_dx);
		table.gy.push_back(jet.dG_dy);
	}
	return table;
}

void require_inside_span(const GeodesicSolution& geo, double t_from, double t_to,
                         const char* what) {
	const double tol = 1e-9 * std::max(1.0, geo.t_max() - geo.t_min());
	if (t_from < geo.t_min() - tol || t_to > geo.t_max() + tol) {
		std::ostringstream os;
		os << what << " span [" << t_from << ", " << t_to << "] exceeds the geodesic's covered span ["
		   << geo.t_min() << ", " << geo.t_max() << "]";
		throw FinslerError(os.str());
	}
}

} // namespace

JacobiSolution integrate_jacobi(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                                const Vector& J0, const Vector& DJ0, double t_from, double t_to,
                                const StepPolicy& steps) {
	const int n = geo.dim();
	if (J0.size() != n || DJ0.size() != n) throw FinslerError("jacobi: dimension mismatch");
	if (!(t_from <= 0.0 && t_to >= 0.0 && t_to > t_from))
		throw FinslerError("jacobi span must contain t = 0");
	require_inside_span(geo, t_from, t_to, "jacobi");
	t_from = std::max(t_from, geo.t_min());
	t_to = std::min(t_to, geo.t_max());

	const JetTable table = build_jets(m, geo, t_from, t_to, steps);

	Matrix gx0(n, n), gy0(n, n);
	table.eval(0.0, gx0, gy0);
	const Vector jdot0 = DJ0 - gy0 * J0; // covariant -> plain derivative

	OdeRhs rhs = [&table, n](double tt, const Vector& s, Vector& ds) {
		Matrix gxs(n, n), gys(n, n);
		table.eval(tt, gxs, gys);
		ds.resize(2 * n);
		ds.head(n) = s.tail(n);
		ds.tail(n) = -2.0 * (gxs * s.head(n)) - 2.0 * (gys * s.tail(n));
	};
	OdeOptions opt;
	opt.rtol = steps.ode_rtol;
	opt.atol = steps.ode_atol;

	Vector state0(2 * n);
	state0 << J0, jdot0;

	struct Raw {
		std::vector<double> t;
		std::vector<Vector> j, jdot;
	};
	auto run = [&](double tend, Raw& out) {
		if (tend == 0.0) return;
		std::vector<double> ts;
		if (tend > 0.0) {
			for (double tv : geo.t)
				if (tv > 1e-13 && tv < tend * (1.0 - 1e-12)) ts.push_back(tv);
		} else {
			for (auto it = geo.t.rbegin(); it != geo.t.rend(); ++it)
				if (*it < -1e-13 && *it > tend * (1.0 - 1e-12)) ts.push_back(*it);
		}
		const OdeStatus st = integrate_ode(
		    rhs, state0, 0.0, tend, ts,
		    [&](double tt, const Vector& s) {
			    if (!out.t.empty() &&
			        std::abs(tt - out.t.back()) < 1e-13 * std::max(1.0, std::abs(tt)))
				    return;
			    out.t.push_back(tt);
			    out.j.push_back(s.head(n));
			    out.jdot.push_back(s.tail(n));
		    },
		    opt);
		if (!st.completed) throw FinslerError("jacobi integration failed: " + st.message);
	};

	Raw fwd, bwd;
	run(t_to, fwd);
	run(t_from, bwd);

	JacobiSolution sol;
	auto push = [&](const Raw& r, std::size_t k) {
		sol.t.push_back(r.t[k]);
		sol.j.push_back(r.j[k]);
		sol.jdot.push_back(r.jdot[k]);
	};
	for (std::size_t k = bwd.t.size(); k > 0; --k) push(bwd, k - 1);
	for (std::size_t k = 0; k < fwd.t.size(); ++k) {
		if (!sol.t.empty() && fwd.t[k] <= sol.t.back() + 1e-13) continue;
		push(fwd, k);
	}
	if (sol.t.size() < 2) throw FinslerError("jacobi span too short to integrate");

	Matrix gxs(n, n), gys(n, n);
	for (std::size_t k = 0; k < sol.t.size(); ++k) {
		table.eval(sol.t[k], gxs, gys);
		sol.jddot.push_back(-2.0 * (gxs * sol.j[k]) - 2.0 * (gys * sol.jdot[k]));
	}

	// g(J, gamma') is affine in t along a geodesic; the drift off that line
	// is pure integration error and a cheap quality signal.
	const Vector xc = geo.position(0.0), vc = geo.velocity(0.0);
	const double o0 = m.inner(xc, vc, J0, vc);
	const double odot0 = m.inner(xc, vc, DJ0, vc);
	for (std::size_t k = 0; k < sol.t.size(); ++k) {
		const Vector xt = geo.position(sol.t[k]);
		const Vector vt = geo.velocity(sol.t[k]);
		const double o = m.inner(xt, vt, sol.j[k], vt);
		sol.orthogonality_drift =
		    std::max(sol.orthogonality_drift, std::abs(o - (o0 + sol.t[k] * odot0)));
	}
	return sol;
}

Vector parallel_transport(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                          const Vector& U0, double t_from, double t_to, const StepPolicy& steps) {
	const int n = geo.dim();
	if (U0.size() != n) throw FinslerError("parallel transport: dimension mismatch");
	const double lo = std::min(t_from, t_to), hi = std::max(t_from, t_to);
	require_inside_span(geo, lo, hi, "parallel transport");
	if (t_from == t_to) return U0;

	const JetTable table = build_jets(m, geo, lo, hi, steps);
	OdeRhs rhs = [&table, n](double tt, const Vector& s, Vector& ds) {
		Matrix gxs(n, n), gys(n, n);
		table.eval(tt, gxs, gys);
		ds = -gys * s;
	};
	OdeOptions opt;
	opt.rtol = steps.ode_rtol;
	opt.atol = steps.ode_atol;
	Vector out = U0;
	const OdeStatus st = integrate_ode(
	    rhs, U0, t_from, t_to, {}, [&](double, const Vector& s) { out = s; }, opt);
	if (!st.completed) throw FinslerError("parallel transport failed: " + st.message);
	return out;
}

double jacobi_variation_mismatch(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                                 const Vector& J0, const Vector& DJ0,
                                 const std::vector<double>& times, double fd_step,
                                 const StepPolicy& steps) {
	if (times.empty()) throw FinslerError("jacobi variation check: no comparison times");
	double lo = 0.0, hi = 0.0;
	for (double tt : times) {
		lo = std::min(lo, tt);
		hi = std::max(hi, tt);
	}
	if (hi == lo) throw FinslerError("jacobi variation check: degenerate time set");

	const JacobiSolution jac = integrate_jacobi(m, geo, J0, DJ0, lo, hi, steps);

	const Vector x0 = geo.position(0.0), v0 = geo.velocity(0.0);
	const Vector w = DJ0 - nonlinear_connection(m, x0, v0, steps) * J0;
	const GeodesicSolution plus =
	    integrate_geodesic(m, x0 + fd_step * J0, v0 + fd_step * w, lo, hi, 0, steps);
	const GeodesicSolution minus =
	    integrate_geodesic(m, x0 - fd_step * J0, v0 - fd_step * w, lo, hi, 0, steps);
	const double tol = 1e-9 * std::max(1.0, hi - lo);
	if (plus.t_max() < hi - tol || plus.t_min() > lo + tol || minus.t_max() < hi - tol ||
	    minus.t_min() > lo + tol)
		throw FinslerError("jacobi variation check: displaced geodesic left the chart");

	double worst = 0.0;
	for (double tt : times) {
		const Vector fd = (plus.position(tt) - minus.position(tt)) / (2.0 * fd_step);
		worst = std::max(worst, (jac.value(tt) - fd).norm());
	}
	return worst;
}

// ===========================================================================
// Curvature
// ===========================================================================

Matrix riemann_operator(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                        const StepPolicy& steps) {
	const int n = m.dim();
	const double yn = y.norm();
	if (yn < 1e-12 * std::max(1.0, steps.chart_scale))
		throw FinslerError("curvature undefined at y = 0");

	// Rebalance the inner jets: three stacked difference levels divide the
	// evaluator noise by the product of the steps, so the inner ones must be
	// coarser here than in plain spray work.
	StepPolicy inner = steps;
	inner.x_step = steps.curvature_inner_step;
	inner.spray_jet_step = steps.curvature_inner_step;

	const SprayJet jet = spray_jet(m, x, y, inner);

	// Directional x-derivative of the connection along y, five-point.
	const double sx = steps.curvature_step * std::max(steps.chart_scale, x.norm()) / yn;
	auto Nx = [&](double s) { return nonlinear_connection(m, x + s * y, y, inner); };
	const Matrix ddx =
	    (-Nx(2.0 * sx) + 8.0 * Nx(sx) - 8.0 * Nx(-sx) + Nx(-2.0 * sx)) / (12.0 * sx);

	// Directional y-derivative of the connection along G, five-point. G = 0
	// (flat in these coordinates) contributes nothing.
	Matrix ddy = Matrix::Zero(n, n);
	const double gn = jet.G.norm();
	if (gn > 1e-14 * std::max(1.0, yn * yn)) {
		const double sy = steps.curvature_step * yn / gn;
		auto Ny = [&](double s) { return nonlinear_connection(m, x, y + s * jet.G, inner); };
		ddy = (-Ny(2.0 * sy) + 8.0 * Ny(sy) - 8.0 * Ny(-sy) + Ny(-2.0 * sy)) / (12.0 * sy);
	}

	return 2.0 * jet.dG_dx - ddx + 2.0 * ddy - jet.dG_dy * jet.dG_dy;
}

double flag_curvature(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                      const Vector& u, const StepPolicy& steps) {
	const Matrix R = riemann_operator(m, x, y, steps);
	const MinkowskiNormSpec norm = m.norm_at(x);
	const FundamentalTensor ft = norm.fundamental_tensor(y);
	const double F = norm.value(y);
	const double num = ft.inner(u, R * u);
	const double den = F * F * ft.inner(u, u) - ft.inner(y, u) * ft.inner(y, u);
	if (!(den > 1e-12 * F * F * u.squaredNorm()))
		throw FinslerError("flag plane degenerate: the pole is parallel to the base direction");
	return num / den;
}

CurvatureRange flag_curvature_range(const ChartedFinslerMetric& m, const Vector& x,
                                    const Vector& y, const StepPolicy& steps) {
	const Matrix R = riemann_operator(m, x, y, steps);
	const MinkowskiNormSpec norm = m.norm_at(x);
	const FundamentalTensor ft = norm.fundamental_tensor(y);
	const double F = norm.value(y);
	const std::vector<Vector> basis = norm.orthogonal_complement_basis(y);
	if (basis.empty()) throw FinslerError("flag curvature needs dimension >= 2");

	// In a g_y-orthonormal basis of the orthocomplement the flag curvature is
	// the Rayleigh quotient of the curvature form; its extremes over poles
	// are that form's eigenvalue range.
	const int k = static_cast<int>(basis.size());
	Matrix M(k, k);
	for (int a = 0; a < k; ++a)
		for (int b = 0; b < k; ++b) M(a, b) = ft.inner(basis[a], R * basis[b]) / (F * F);
	M = 0.5 * (M + M.transpose()).eval();
	Eigen::SelfAdjointEigenSolver<Matrix> es(M);

	CurvatureRange range;
	range.k_min = es.eigenvalues().minCoeff();
	range.k_max = es.eigenvalues().maxCoeff();
	return range;
}

double flag_curvature_via_jacobi(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                                 const Vector& u, const StepPolicy& steps) {
	const MinkowskiNormSpec norm = m.norm_at(x);
	const double F0 = norm.value(y);
	if (!(F0 > 0.0)) throw FinslerError("curvature undefined at y = 0");
	const Vector yhat = y / F0;

	const FundamentalTensor ft = norm.fundamental_tensor(yhat);
	const Vector uperp = u - (ft.inner(yhat, u) / ft.inner(yhat, yhat)) * yhat;
	if (!(uperp.norm() > 1e-8 * u.norm()))
		throw FinslerError("flag plane degenerate: the pole is parallel to the base direction");

	const double h = steps.t2_step;
	const GeodesicSolution geo = integrate_geodesic(m, x, yhat, -2.5 * h, 2.5 * h, 40, steps);
	if (geo.exited_backward || geo.exited_forward)
		throw FinslerError("curvature probe geodesic left the chart");
	const JacobiSolution jac =
	    integrate_jacobi(m, geo, uperp, Vector::Zero(geo.dim()), -2.2 * h, 2.2 * h, steps);

	// With DJ(0) = 0 the g-length of the field starts at a curvature-reading
	// stationary point: |J|(t) = |J|(0) (1 - K t^2 / 2 + O(t^4)).
	auto len = [&](double tt) {
		const Vector xt = geo.position(tt);
		const Vector vt = geo.velocity(tt);
		const Vector Jt = jac.value(tt);
		return std::sqrt(m.inner(xt, vt, Jt, Jt));
	};
	const double m0 = len(0.0);
	const double mdd = (-len(-2.0 * h) + 16.0 * len(-h) - 30.0 * m0 + 16.0 * len(h) -
	                    len(2.0 * h)) /
	                   (12.0 * h * h);
	return -mdd / m0;
}

double s_curvature(const ChartedFinslerMetric& m, const Vector& x, const Vector& y,
                   long density_budget, const StepPolicy& steps) {
	const double h = steps.s_rate_step;
	const GeodesicSolution geo = integrate_geodesic(m, x, y, -2.0 * h, 2.0 * h, 16, steps);
	if (geo.exited_backward || geo.exited_forward)
		throw FinslerError("distortion rate probe left the chart");

	auto tau = [&](double tt) {
		const Vector xt = geo.position(tt);
		const Vector vt = geo.velocity(tt);
		const Matrix g = m.tensor(xt, vt);
		const double sigma = bh_density(m, xt, density_budget).sigma;
		return 0.5 * std::log(g.determinant()) - std::log(sigma);
	};
	return (-tau(2.0 * h) + 8.0 * tau(h) - 8.0 * tau(-h) + tau(-2.0 * h)) / (12.0 * h);
}

} // namespace finsler
