#include "finsler/isoparametric.hpp"

#include "finsler/ode.hpp"
#include "finsler/util.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace finsler {

namespace {

// === small local helpers ====================================================

double sample_stddev(const std::vector<double>& v) {
	const double n = static_cast<double>(v.size());
	double mean = 0.0;
	for (double x : v) mean += x;
	mean /= n;
	double ss = 0.0;
	for (double x : v) ss += (x - mean) * (x - mean);
	return std::sqrt(ss / n);
}

// Follows the gradient flow x' = grad f / F(grad f)^2, along which f moves at
// unit rate, from z until f reaches `target`. Returns false when the curve
// leaves the (shrunk) chart first.
bool project_to_level(const ChartedFinslerMetric& m, const ScalarFieldSpec& f, const Vector& z,
                      double target, double shrink, Vector& out, const StepPolicy& steps) {
	const double tau = target - f.value(z);
	out = z;
	if (std::abs(tau) < 1e-14) return true;
	OdeOptions opt;
	opt.rtol = steps.ode_rtol;
	opt.atol = steps.ode_atol;
	Vector cur = z;
	const OdeStatus st = integrate_ode(
	    [&](double, const Vector& x, Vector& dx) {
		    const Vector g = finsler_gradient(m, f, x, steps);
		    const double fn = m.value(x, g);
		    dx = g / (fn * fn);
	    },
	    z, 0.0, tau, {}, [&](double, const Vector& y) { cur = y; }, opt,
	    [&](double, const Vector& y) { return m.domain.contains(y, shrink); });
	if (!st.completed) return false;
	// One Newton polish along the gradient direction.
	const Vector g = finsler_gradient(m, f, cur, steps);
	const double fn = m.value(cur, g);
	out = cur + ((target - f.value(cur)) / (fn * fn)) * g;
	return m.domain.contains(out, shrink);
}

// Cumulative integral of 1/a along the gradient curve, tabulated on level
// nodes with exact slopes; evaluated by cubic Hermite with clamped ends.
struct PhiTable {
	std::vector<double> s;   // ascending levels
	std::vector<double> phi; // phi(s), phi(f(x0)) = 0
	std::vector<double> w;   // phi'(s) = 1/a(s)

	double operator()(double q) const {
		std::size_t i = std::upper_bound(s.begin(), s.end(), q) - s.begin();
		i = std::clamp<std::size_t>(i, 1, s.size() - 1) - 1;
		const double h = s[i + 1] - s[i];
		const double u = (q - s[i]) / h;
		const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
		const double h10 = u * (1 - u) * (1 - u);
		const double h01 = u * u * (3 - 2 * u);
		const double h11 = u * u * (u - 1);
		return h00 * phi[i] + h * h10 * w[i] + h01 * phi[i + 1] + h * h11 * w[i + 1];
	}
};

// Safeguarded Newton for a root of rho with a monotone-bracket contract:
// expands a bracket around t0, rejects non-monotone residuals (the level
// correspondence only holds where the warped-level equation has a single
// crossing), then iterates Newton steps clamped to the shrinking bracket.
double safeguarded_root(const std::function<double(double)>& rho, double t0, const char* what) {
	double lo = t0 - 0.05;
	double hi = t0 + 0.05;
	double rlo = rho(lo);
	double rhi = rho(hi);
	for (int grow = 0; rlo * rhi > 0.0 && grow < 5; ++grow) {
		const double r = hi - lo;
		lo -= r / 2;
		hi += r / 2;
		rlo = rho(lo);
		rhi = rho(hi);
	}
	if (rlo * rhi > 0.0)
		throw FinslerError(std::string(what) + ": no level crossing near t = " +
		                   std::to_string(t0) + " - outside correspondence neighborhood");
	if (rlo == 0.0) return lo;
	if (rhi == 0.0) return hi;
	const double span = std::abs(rlo) + std::abs(rhi);
	const double dir = (rhi > rlo) ? 1.0 : -1.0;
	double prev = rlo;
	for (int k = 1; k <= 7; ++k) {
		const double rv = rho(lo + k * (hi - lo) / 8.0);
		if ((rv - prev) * dir < -1e-9 * span)
			throw FinslerError(std::string(what) +
			                   ": level equation is not monotone across the bracket - outside "
			                   "correspondence neighborhood");
		prev = rv;
	}
	double t = std::clamp(t0, lo, hi);
	for (int it = 0; it < 80; ++it) {
		const double rv = rho(t);
		if (std::abs(rv) < 1e-13 * (1.0 + std::abs(t))) return t;
		if ((rv > 0) == (rlo > 0))
			lo = t;
		else
			hi = t;
		const double h = 1e-6;
		const double drv = (rho(t + h) - rho(t - h)) / (2 * h);
		double tn = (std::abs(drv) > 1e-14) ? t - rv / drv : 0.5 * (lo + hi);
		if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
		t = tn;
		if (hi - lo < 4e-16 * (1.0 + std::abs(t))) return 0.5 * (lo + hi);
	}
	const double rv = rho(t);
	if (std::abs(rv) > 1e-10 * (1.0 + std::abs(t)))
		throw FinslerError(std::string(what) + ": root polish stalled at residual " +
		                   std::to_string(rv));
	return t;
}

} // namespace

// === scalar fields ==========================================================

Vector ScalarFieldSpec::differential_at(const Vector& x) const {
	if (differential) return differential(x);
	const double h = 1e-6;
	Vector d(x.size());
	Vector xp = x;
	Vector xm = x;
	for (int i = 0; i < x.size(); ++i) {
		xp[i] = x[i] + h;
		xm[i] = x[i] - h;
		d[i] = (value(xp) - value(xm)) / (2 * h);
		xp[i] = x[i];
		xm[i] = x[i];
	}
	return d;
}

// === gradients ==============================================================

Vector finsler_gradient(const ChartedFinslerMetric& m, const ScalarFieldSpec& f, const Vector& x,
                        const StepPolicy&) {
	const Vector df = f.differential_at(x);
	const double dn = df.norm();
	if (dn < 1e-12)
		throw FinslerError("gradient of '" + f.name + "' undefined: differential vanishes");
	const MinkowskiNormSpec norm = m.norm_at(x);
	const auto legendre = [&](const Vector& y) -> Vector {
		return norm.value(y) * norm.gradient(y);
	};
	Vector y = norm.tensor_matrix(df).llt().solve(df);
	Vector r = legendre(y) - df;
	for (int it = 0; it < 60 && r.norm() > 1e-12 * dn; ++it) {
		const Vector step = norm.tensor_matrix(y).llt().solve(r);
		double lambda = 1.0;
		Vector ynext = y - step;
		Vector rnext = legendre(ynext) - df;
		for (int halve = 0; halve < 8 && rnext.norm() > r.norm(); ++halve) {
			lambda /= 2;
			ynext = y - lambda * step;
			rnext = legendre(ynext) - df;
		}
		y = ynext;
		r = rnext;
	}
	if (r.norm() > 1e-10 * dn) {
		std::ostringstream os;
		os << "Legendre solve failed for '" << f.name << "': residual " << r.norm() / dn
		   << " relative after damped Newton";
		throw FinslerError(os.str());
	}
	return y;
}

// === transnormal functions ==================================================

TransnormalProfile transnormal_profile(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                                       const Vector& x0, double level_lo, double level_hi,
                                       int levels, int per_level, std::uint64_t seed,
                                       const StepPolicy& steps) {
	if (!(level_hi > level_lo) || levels < 2)
		throw FinslerError("transnormal profile needs a nondegenerate level window");
	Rng rng(seed);
	TransnormalProfile prof;
	const double scale = m.domain.scale();
	const double shrink = 4.0 * steps.x_step * scale;
	const double r_seed = std::min(0.45 * scale, 2.5 * (level_hi - level_lo));
	for (int j = 0; j < levels; ++j) {
		const double lv = level_lo + j * (level_hi - level_lo) / (levels - 1);
		std::vector<double> vals;
		for (int attempt = 0; attempt < 4 * per_level && (int)vals.size() < per_level; ++attempt) {
			const Vector z = rng.ball_point(x0, r_seed);
			if (!m.domain.contains(z, shrink)) continue;
			try {
				Vector p;
				if (!project_to_level(m, f, z, lv, shrink, p, steps)) continue;
				vals.push_back(m.value(p, finsler_gradient(m, f, p, steps)));
			} catch (const FinslerError&) {
				continue;
			}
		}
		if (vals.size() < 2) continue;
		double mean = 0.0;
		for (double v : vals) mean += v;
		mean /= static_cast<double>(vals.size());
		double dev = 0.0;
		for (double v : vals) dev = std::max(dev, std::abs(v - mean));
		prof.level.push_back(lv);
		prof.a.push_back(mean);
		prof.spread = std::max(prof.spread, dev);
	}
	if (prof.level.size() < 3)
		throw FinslerError("could not sample the level window [" + std::to_string(level_lo) +
		                   ", " + std::to_string(level_hi) + "] for '" + f.name + "'");
	return prof;
}

ScalarFieldSpec normalize_transnormal(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                                      const Vector& x0, double level_lo, double level_hi,
                                      const StepPolicy& steps) {
	const TransnormalProfile prof = transnormal_profile(m, f, x0, level_lo, level_hi, 9, 5, 1, steps);
	if (prof.spread >= 1e-4) {
		std::ostringstream os;
		os << "'" << f.name << "' is not transnormal on [" << level_lo << ", " << level_hi
		   << "]: gradient-length spread " << prof.spread << " within levels";
		throw FinslerError(os.str());
	}
	const double s0 = f.value(x0);
	const double margin = 0.05 * (level_hi - level_lo);
	const double lo = std::min(level_lo - margin, s0);
	const double hi = std::max(level_hi + margin, s0);

	// Tabulate phi(s) = int_{s0}^{s} du / a(u) along the gradient curve
	// through x0, carrying phi as an extra ODE state so its node values
	// inherit the integrator tolerance rather than a quadrature grid.
	const int n = m.dim();
	const double shrink = 4.0 * steps.x_step * m.domain.scale();
	auto table = std::make_shared<PhiTable>();
	const auto run = [&](double target) {
		if (std::abs(target - s0) < 1e-14) return;
		std::vector<double> nodes;
		const int per = 48;
		for (int j = 1; j < per; ++j) nodes.push_back(s0 + j * (target - s0) / per);
		Vector y0(n + 1);
		y0.head(n) = x0;
		y0[n] = 0.0;
		OdeOptions opt;
		opt.rtol = steps.ode_rtol;
		opt.atol = steps.ode_atol;
		const OdeStatus st = integrate_ode(
		    [&](double, const Vector& y, Vector& dy) {
			    const Vector x = y.head(n);
			    const Vector g = finsler_gradient(m, f, x, steps);
			    const double a = m.value(x, g);
			    dy.resize(n + 1);
			    dy.head(n) = g / (a * a);
			    dy[n] = 1.0 / a;
		    },
		    y0, s0, target, nodes,
		    [&](double u, const Vector& y) {
			    const Vector x = y.head(n);
			    const double a = m.value(x, finsler_gradient(m, f, x, steps));
			    table->s.push_back(u);
			    table->phi.push_back(y[n]);
			    table->w.push_back(1.0 / a);
		    },
		    opt, [&](double, const Vector& y) { return m.domain.contains(y.head(n), shrink); });
		if (!st.completed)
			throw FinslerError("gradient curve through the base point leaves the chart before "
			                   "covering the level window of '" + f.name + "'");
	};
	run(lo);
	run(hi);
	std::vector<std::size_t> order(table->s.size());
	for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
	std::sort(order.begin(), order.end(),
	          [&](std::size_t a, std::size_t b) { return table->s[a] < table->s[b]; });
	PhiTable sorted;
	for (std::size_t i : order) {
		if (!sorted.s.empty() && table->s[i] - sorted.s.back() < 1e-12) continue;
		sorted.s.push_back(table->s[i]);
		sorted.phi.push_back(table->phi[i]);
		sorted.w.push_back(table->w[i]);
	}
	*table = std::move(sorted);
	if (table->s.size() < 4)
		throw FinslerError("gradient curve tabulation too short to normalize '" + f.name + "'");

	// Values go through phi; the differential is normalized pointwise, which
	// is exact on a transnormal function: d(phi o f) = df / F(grad f).
	ScalarFieldSpec out;
	out.name = f.name + "-normalized";
	const ChartedFinslerMetric metric = m;
	const ScalarFieldSpec base = f;
	const StepPolicy st = steps;
	out.value = [table, base](const Vector& x) { return (*table)(base.value(x)); };
	out.differential = [metric, base, st](const Vector& x) -> Vector {
		const Vector g = finsler_gradient(metric, base, x, st);
		return base.differential_at(x) / metric.value(x, g);
	};
	return out;
}

// === the density-weighted Laplacian =========================================

double nonlinear_laplacian(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                           const Vector& x, long density_budget, const StepPolicy& steps) {
	const int n = m.dim();
	const double h = steps.divergence_step * m.domain.scale();
	Vector probe = x;
	for (int i = 0; i < n; ++i) {
		for (double side : {-1.0, 1.0}) {
			probe[i] = x[i] + side * h;
			if (!m.domain.contains(probe))
				throw FinslerError("insufficient room for the divergence stencil at the chart "
				                   "boundary (step " + std::to_string(h) + ")");
		}
		probe[i] = x[i];
	}
	const auto flux = [&](const Vector& z, int i) {
		const Vector g = finsler_gradient(m, f, z, steps);
		return bh_density(m, z, density_budget).sigma * g[i];
	};
	double div = 0.0;
	for (int i = 0; i < n; ++i) {
		probe[i] = x[i] + h;
		const double fp = flux(probe, i);
		probe[i] = x[i] - h;
		const double fm = flux(probe, i);
		probe[i] = x[i];
		div += (fp - fm) / (2 * h);
	}
	return div / bh_density(m, x, density_budget).sigma;
}

// === level transport ========================================================

double transport_isoparametric(const NavigationDatum& datum, const ScalarFieldSpec& f,
                               const Vector& xtilde, const StepPolicy& steps) {
	const TimeWarp warp{measured_dilation(datum, steps)};
	const auto rho = [&](double t) {
		const Vector x = flow(datum.wind, xtilde, -t, &datum.base->domain, steps.ode_rtol).point;
		return f.value(x) - warp.map(t);
	};
	return safeguarded_root(rho, f.value(xtilde), "level transport");
}

ScalarFieldSpec transported_field(const NavigationDatum& datum, const ScalarFieldSpec& f,
                                  const StepPolicy& steps) {
	const TimeWarp warp{measured_dilation(datum, steps)};
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	const NavigationDatum d = datum;
	const ScalarFieldSpec base = f;
	const StepPolicy st = steps;
	ScalarFieldSpec out;
	out.name = f.name + "-transported";
	out.value = [d, base, st](const Vector& xt) {
		return transport_isoparametric(d, base, xt, st);
	};
	out.differential = [d, base, st, warp, deformed](const Vector& xt) -> Vector {
		const double t = transport_isoparametric(d, base, xt, st);
		const Vector x = flow(d.wind, xt, -t, &d.base->domain, st.ode_rtol).point;
		const Vector gradf = finsler_gradient(*d.base, base, x, st);
		const FlowResult fwd = flow(d.wind, x, t, &d.base->domain, st.ode_rtol);
		const Vector gt = d.wind.value(xt) + warp.rate(t) * (fwd.tangent * gradf);
		const MinkowskiNormSpec norm = deformed.norm_at(xt);
		return norm.value(gt) * norm.gradient(gt);
	};
	return out;
}

double inverse_transport_isoparametric(const NavigationDatum& datum,
                                       const ScalarFieldSpec& ftilde, const Vector& x,
                                       const StepPolicy& steps) {
	const TimeWarp warp{measured_dilation(datum, steps)};
	const auto rho = [&](double t) {
		const Vector xt = flow(datum.wind, x, t, &datum.base->domain, steps.ode_rtol).point;
		return ftilde.value(xt) - t;
	};
	const double t = safeguarded_root(rho, ftilde.value(x), "inverse level transport");
	return warp.map(t);
}

// === correspondences ========================================================

double verify_laplacian_relation(const NavigationDatum& datum, const ScalarFieldSpec& f,
                                 const std::vector<Vector>& points, long density_budget,
                                 const StepPolicy& steps) {
	const double c = measured_dilation(datum, steps);
	const TimeWarp warp{c};
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	const ScalarFieldSpec ft = transported_field(datum, f, steps);
	const int n = datum.base->dim();
	double worst = 0.0;
	for (const Vector& x : points) {
		const double fx = f.value(x);
		const double t = warp.inverse(fx);
		const Vector xt = flow(datum.wind, x, t, &datum.base->domain, steps.ode_rtol).point;
		const double lhs = nonlinear_laplacian(deformed, ft, xt, density_budget, steps);
		const double rhs =
		    (2.0 * c * fx + 1.0) * nonlinear_laplacian(*datum.base, f, x, density_budget, steps) -
		    2.0 * c * n;
		worst = std::max(worst, std::abs(lhs - rhs));
	}
	return worst;
}

double density_pullback_residual(const NavigationDatum& datum, const ScalarFieldSpec& f,
                                 const Vector& x, long density_budget, const StepPolicy& steps) {
	const double c = measured_dilation(datum, steps);
	const TimeWarp warp{c};
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	const int n = datum.base->dim();
	const double fx = f.value(x);
	const double t = warp.inverse(fx);
	const FlowResult fr = flow(datum.wind, x, t, &datum.base->domain, steps.ode_rtol);
	// Level-map Jacobian: the flow tangent plus the wind times the
	// sensitivity of the flow time t = inverse(f) to the base point.
	const Matrix dpsi = fr.tangent + (1.0 / warp.rate(t)) * datum.wind.value(fr.point) *
	                                     f.differential_at(x).transpose();
	const double det = dpsi.determinant();
	if (!(det > 0))
		throw FinslerError("level map is not orientation preserving at the sample point");
	const double ratio = bh_density(deformed, fr.point, density_budget).sigma * det /
	                     bh_density(*datum.base, x, density_budget).sigma;
	// Pairing intercept of the gradient geodesic, shifted to its f = 0 time.
	const Vector g = finsler_gradient(*datum.base, f, x, steps);
	const GeodesicSolution geo = integrate_geodesic(*datum.base, x, g, -0.04, 0.04, 40, steps);
	const LinearPairingResult lp = linear_pairing(*datum.base, geo, datum.wind);
	const double c0 = lp.c0 + 2.0 * c * fx;
	const double expected = (1.0 + c0) * std::pow(2.0 * c * fx + 1.0, -n - 1);
	return std::abs(ratio - expected);
}

// === isoparametric verdicts =================================================

IsoparametricReport isoparametric_check(const ChartedFinslerMetric& m, const ScalarFieldSpec& f,
                                        const Vector& around, double radius,
                                        const std::vector<double>& levels, int per_level,
                                        long density_budget, std::uint64_t seed,
                                        const StepPolicy& steps) {
	Rng rng(seed);
	IsoparametricReport rep;
	const double scale = m.domain.scale();
	const double shrink = (4.0 * steps.x_step + 2.0 * steps.divergence_step) * scale;
	for (double lv : levels) {
		LevelStat st;
		st.level = lv;
		std::vector<double> gvals;
		std::vector<double> lvals;
		for (int attempt = 0; attempt < 4 * per_level && (int)gvals.size() < per_level;
		     ++attempt) {
			const Vector z = rng.ball_point(around, radius);
			if (!m.domain.contains(z, shrink)) continue;
			try {
				Vector p;
				if (!project_to_level(m, f, z, lv, shrink, p, steps)) continue;
				gvals.push_back(m.value(p, finsler_gradient(m, f, p, steps)));
				lvals.push_back(nonlinear_laplacian(m, f, p, density_budget, steps));
			} catch (const FinslerError&) {
				continue;
			}
		}
		st.n_points = static_cast<int>(gvals.size());
		st.sampled = st.n_points >= 3;
		if (st.sampled) {
			st.grad_spread = sample_stddev(gvals);
			st.lap_spread = sample_stddev(lvals);
		}
		rep.levels.push_back(st);
	}
	bool any = false;
	bool ok = true;
	for (const LevelStat& st : rep.levels) {
		if (!st.sampled) continue;
		any = true;
		rep.max_spread = std::max({rep.max_spread, st.grad_spread, st.lap_spread});
		if (st.grad_spread >= 1e-3 || st.lap_spread >= 1e-3) ok = false;
	}
	rep.isoparametric = any && ok;
	return rep;
}

} // namespace finsler
