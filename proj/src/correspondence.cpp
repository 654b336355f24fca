#include "finsler/correspondence.hpp"

#include "finsler/util.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace finsler {

// === time warp ==============================================================

namespace {

constexpr double kSeriesSwitch = 1e-8;

} // namespace

double TimeWarp::map(double t) const {
	if (std::abs(c) < kSeriesSwitch)
		return t * (1.0 + c * t * (1.0 + (2.0 / 3.0) * c * t));
	return std::expm1(2.0 * c * t) / (2.0 * c);
}

double TimeWarp::inverse(double s) const {
	if (std::abs(c) < kSeriesSwitch)
		return s * (1.0 - c * s * (1.0 - (4.0 / 3.0) * c * s));
	const double arg = 1.0 + 2.0 * c * s;
	if (!(arg > 0.0)) {
		std::ostringstream msg;
		msg << "time warp inverse undefined at s = " << s << " for dilation " << c;
		throw FinslerError(msg.str());
	}
	return std::log1p(2.0 * c * s) / (2.0 * c);
}

double TimeWarp::rate(double t) const { return std::exp(2.0 * c * t); }

// === transport plumbing =====================================================

namespace {

/// One evaluation of the transport map: warped base time, flowed point, flow
/// tangent map, and the transported velocity.
struct TransportPoint {
	double s = 0.0;
	Vector x, v;
	Matrix tangent;
};

TransportPoint transport_point(const NavigationDatum& datum, const TimeWarp& warp,
                               const GeodesicSolution& geo, double t, const StepPolicy& steps) {
	TransportPoint out;
	out.s = warp.map(t);
	const double tol = 1e-9 * std::max(1.0, geo.t_max() - geo.t_min());
	if (out.s < geo.t_min() - tol || out.s > geo.t_max() + tol) {
		std::ostringstream msg;
		msg << "warped time s(" << t << ") = " << out.s << " leaves the base solution span ["
		    << geo.t_min() << ", " << geo.t_max() << "]: extend base geodesic";
		throw FinslerError(msg.str());
	}
	const Vector p = geo.position(out.s);
	const Vector w = geo.velocity(out.s);
	const FlowResult fr = flow(datum.wind, p, t, &datum.base->domain, steps.ode_rtol);
	out.x = fr.point;
	out.tangent = fr.tangent;
	out.v = datum.wind.value(out.x) + warp.rate(t) * (fr.tangent * w);
	return out;
}

/// Output grid for the transported objects: the warped images of the base
/// node times, clipped to the window, plus the exact endpoints.
std::vector<double> warped_node_times(const TimeWarp& warp, const std::vector<double>& nodes,
                                      double t_from, double t_to) {
	std::vector<double> ts;
	ts.push_back(t_from);
	const double s_lo = warp.map(t_from), s_hi = warp.map(t_to);
	for (double s : nodes)
		if (s > s_lo && s < s_hi) ts.push_back(warp.inverse(s));
	ts.push_back(t_to);
	std::sort(ts.begin(), ts.end());
	std::vector<double> out;
	const double tol = 1e-9 * std::max(1.0, t_to - t_from);
	for (double v : ts)
		if (out.empty() || v - out.back() > tol) out.push_back(v);
	return out;
}

void require_window(double t_from, double t_to) {
	if (!(t_from < t_to) || t_from > 0.0 || t_to < 0.0)
		throw FinslerError("transport window must be nondegenerate and contain t = 0");
}

std::size_t nearest_to_zero(const std::vector<double>& ts) {
	std::size_t best = 0;
	for (std::size_t k = 1; k < ts.size(); ++k)
		if (std::abs(ts[k]) < std::abs(ts[best])) best = k;
	return best;
}

} // namespace

// === geodesic and jacobi transport ==========================================

GeodesicSolution transport_geodesic(const NavigationDatum& datum, const GeodesicSolution& geo,
                                    double t_from, double t_to, const StepPolicy& steps) {
	require_window(t_from, t_to);
	const TimeWarp warp{measured_dilation(datum, steps)};
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);

	GeodesicSolution out;
	out.t = warped_node_times(warp, geo.t, t_from, t_to);
	out.x.reserve(out.t.size());
	out.v.reserve(out.t.size());
	out.a.reserve(out.t.size());
	std::vector<double> speed(out.t.size());
	for (std::size_t k = 0; k < out.t.size(); ++k) {
		const TransportPoint tp = transport_point(datum, warp, geo, out.t[k], steps);
		out.x.push_back(tp.x);
		out.v.push_back(tp.v);
		out.a.push_back(-2.0 * spray(deformed, tp.x, tp.v, steps));
		speed[k] = deformed.value(tp.x, tp.v);
	}
	const double speed0 = speed[nearest_to_zero(out.t)];
	for (double sp : speed) out.speed_drift = std::max(out.speed_drift, std::abs(sp - speed0));
	return out;
}

double transported_geodesic_residual(const NavigationDatum& datum, const GeodesicSolution& geo,
                                     double t, const StepPolicy& steps) {
	const TimeWarp warp{measured_dilation(datum, steps)};
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	const double h = steps.flow_probe_step;
	const TransportPoint mid = transport_point(datum, warp, geo, t, steps);
	const TransportPoint fwd = transport_point(datum, warp, geo, t + h, steps);
	const TransportPoint bwd = transport_point(datum, warp, geo, t - h, steps);
	const Vector vdot = (fwd.v - bwd.v) / (2.0 * h);
	return (vdot + 2.0 * spray(deformed, mid.x, mid.v, steps)).norm();
}

JacobiSolution transport_jacobi(const NavigationDatum& datum, const GeodesicSolution& geo,
                                const JacobiSolution& jac, double t_from, double t_to,
                                const StepPolicy& steps) {
	require_window(t_from, t_to);
	const TimeWarp warp{measured_dilation(datum, steps)};
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);

	const double jac_lo = jac.t.front(), jac_hi = jac.t.back();
	const double cover_lo = std::max(jac_lo, geo.t_min());
	const double cover_hi = std::min(jac_hi, geo.t_max());
	const double tol = 1e-9 * std::max(1.0, cover_hi - cover_lo);
	if (warp.map(t_from) < cover_lo - tol || warp.map(t_to) > cover_hi + tol)
		throw FinslerError("warped window leaves the base jacobi data: extend base geodesic");

	// Pushed field value at one time; feeds both the nodes and the
	// difference stencils for the derivative nodes.
	auto pushed = [&](double tau) -> Vector {
		const TransportPoint tp = transport_point(datum, warp, geo, tau, steps);
		return tp.tangent * jac.value(tp.s);
	};
	auto in_cover = [&](double tau) {
		const double s = warp.map(tau);
		return s >= cover_lo - tol && s <= cover_hi + tol;
	};

	JacobiSolution out;
	out.t = warped_node_times(warp, jac.t, t_from, t_to);
	const double h = steps.flow_probe_step;
	std::vector<Vector> vel(out.t.size());
	std::vector<Vector> pos(out.t.size());
	for (std::size_t k = 0; k < out.t.size(); ++k) {
		const double tk = out.t[k];
		const TransportPoint tp = transport_point(datum, warp, geo, tk, steps);
		const Vector jk = tp.tangent * jac.value(tp.s);

		Vector jdotk;
		if (in_cover(tk + h) && in_cover(tk - h))
			jdotk = (pushed(tk + h) - pushed(tk - h)) / (2.0 * h);
		else if (in_cover(tk + 2.0 * h)) // left edge: difference inward
			jdotk = (-3.0 * jk + 4.0 * pushed(tk + h) - pushed(tk + 2.0 * h)) / (2.0 * h);
		else
			jdotk = (3.0 * jk - 4.0 * pushed(tk - h) + pushed(tk - 2.0 * h)) / (2.0 * h);

		const SprayJet jet = spray_jet(deformed, tp.x, tp.v, steps);
		out.j.push_back(jk);
		out.jdot.push_back(jdotk);
		out.jddot.push_back(-2.0 * (jet.dG_dx * jk + jet.dG_dy * jdotk));
		pos[k] = tp.x;
		vel[k] = tp.v;
	}

	// The velocity pairing of a transported field must stay affine in t,
	// exactly as for a directly integrated one.
	const std::size_t k0 = nearest_to_zero(out.t);
	const Vector D0 = covariant_derivative(deformed, pos[k0], vel[k0], out.j[k0], out.jdot[k0],
	                                       steps);
	const double o0 = deformed.inner(pos[k0], vel[k0], out.j[k0], vel[k0]);
	const double odot0 = deformed.inner(pos[k0], vel[k0], D0, vel[k0]);
	for (std::size_t k = 0; k < out.t.size(); ++k) {
		const double ok = deformed.inner(pos[k], vel[k], out.j[k], vel[k]);
		out.orthogonality_drift = std::max(out.orthogonality_drift,
		                                   std::abs(ok - o0 - (out.t[k] - out.t[k0]) * odot0));
	}
	return out;
}

// === pairing, dilation, and the squared-length law ==========================

LinearPairingResult linear_pairing(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                                   const VectorFieldSpec& V) {
	std::vector<double> ts, ps;
	ts.reserve(geo.t.size());
	ps.reserve(geo.t.size());
	for (std::size_t k = 0; k < geo.t.size(); ++k) {
		ts.push_back(geo.t[k]);
		ps.push_back(m.inner(geo.x[k], geo.v[k], V.value(geo.x[k]), geo.v[k]));
	}
	const AffineFit fit = fit_affine(ts, ps);
	return {fit.intercept, fit.slope, fit.max_abs_residual};
}

double measured_dilation(const NavigationDatum& datum, const StepPolicy& steps) {
	if (datum.wind.dilation) return *datum.wind.dilation;
	const int n = datum.dim();
	const double radius = 0.35 * datum.base->domain.scale();
	Rng rng(97);
	std::vector<std::pair<Vector, Vector>> samples;
	for (int k = 0; k < 64 && samples.size() < 8; ++k) {
		const Vector x = rng.ball_point(datum.base->domain.center, radius);
		if (!datum.base->domain.contains(x) || !datum.admissible(x)) continue;
		samples.emplace_back(x, rng.direction(n));
	}
	if (samples.size() < 3)
		throw FinslerError("could not sample the chart for a dilation fit");
	VectorFieldSpec probe = datum.wind;
	const DilationEstimate est = homothetic_dilation(*datum.base, probe, samples, steps);
	if (est.max_residual > 1e-6) {
		std::ostringstream msg;
		msg << "wind '" << datum.wind.name << "' is not homothetic for base '"
		    << datum.base->name << "': dilation fit residual " << est.max_residual;
		throw FinslerError(msg.str());
	}
	return est.c;
}

KeyIdentityResult verify_key_identity(const NavigationDatum& datum, const GeodesicSolution& geo,
                                      const Vector& v, const std::vector<double>& t_grid,
                                      const StepPolicy& steps) {
	const TimeWarp warp{measured_dilation(datum, steps)};
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	const ChartedFinslerMetric& base = *datum.base;
	const double c0 = linear_pairing(base, geo, datum.wind).c0;

	KeyIdentityResult out;
	for (double t : t_grid) {
		const TransportPoint tp = transport_point(datum, warp, geo, t, steps);
		const Vector p = geo.position(tp.s);
		const Vector w = geo.velocity(tp.s);
		Vector vt = v - (base.inner(p, w, v, w) / base.inner(p, w, w, w)) * w;
		if (vt.norm() < 1e-10 * v.norm()) continue; // probe collapsed onto the velocity
		const Vector moved = tp.tangent * vt;
		const double lhs = deformed.inner(tp.x, tp.v, moved, moved);
		const double rhs = base.inner(p, w, vt, vt) / (warp.rate(t) * (c0 + 1.0));
		out.max_relative_residual =
		    std::max(out.max_relative_residual, std::abs(lhs / rhs - 1.0));
		const double vv = deformed.inner(tp.x, tp.v, tp.v, tp.v);
		out.max_orthogonality =
		    std::max(out.max_orthogonality,
		             std::abs(deformed.inner(tp.x, tp.v, moved, tp.v)) / std::sqrt(lhs * vv));
	}
	return out;
}

// === curvature shift tables =================================================

namespace {

void close_report(ResidualReport& rep) {
	for (double r : rep.residuals) rep.max_residual = std::max(rep.max_residual, r);
}

} // namespace

ResidualReport verify_flag_shift(const NavigationDatum& datum, const std::vector<FlagInput>& flags,
                                 const StepPolicy& steps) {
	const double c = measured_dilation(datum, steps);
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	const ChartedFinslerMetric& base = *datum.base;

	ResidualReport rep;
	for (const FlagInput& flag : flags) {
		double k_base = 0.0, k_deformed = 0.0;
		try {
			const double fy = base.value(flag.x, flag.y);
			if (!(fy > 1e-12)) throw FinslerError("flag pole vanishes");
			const Vector unit = flag.y / fy;
			// Project the edge orthogonal to the pole. The flag planes on both
			// sides are unchanged (and orthogonality survives the deformation),
			// but the curvature quotient never runs near its degenerate locus.
			const Vector edge =
			    flag.u - (base.inner(flag.x, unit, flag.u, unit) /
			              base.inner(flag.x, unit, unit, unit)) *
			                 unit;
			if (edge.norm() < 1e-8 * flag.u.norm()) throw FinslerError("flag edge collapsed");
			k_base = flag_curvature(base, flag.x, unit, edge, steps);
			k_deformed =
			    flag_curvature(deformed, flag.x, unit + datum.wind.value(flag.x), edge, steps);
		} catch (const FinslerError&) {
			++rep.n_skipped;
			continue;
		}
		rep.residuals.push_back(std::abs(k_deformed - k_base + c * c));
	}
	close_report(rep);
	return rep;
}

ResidualReport verify_s_shift(const NavigationDatum& datum,
                              const std::vector<std::pair<Vector, Vector>>& points,
                              long density_budget, const StepPolicy& steps) {
	const double c = measured_dilation(datum, steps);
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	const ChartedFinslerMetric& base = *datum.base;
	const double shift = (datum.dim() + 1) * c;

	ResidualReport rep;
	for (const auto& [x, y] : points) {
		double s_base = 0.0, s_deformed = 0.0;
		try {
			const double fy = base.value(x, y);
			if (!(fy > 1e-12)) throw FinslerError("probe direction vanishes");
			const Vector unit = y / fy;
			s_base = s_curvature(base, x, unit, density_budget, steps);
			s_deformed = s_curvature(deformed, x, unit + datum.wind.value(x), density_budget, steps);
		} catch (const FinslerError&) {
			++rep.n_skipped;
			continue;
		}
		rep.residuals.push_back(std::abs(s_deformed - s_base - shift));
	}
	close_report(rep);
	return rep;
}

CurvatureProfile locally_symmetric_probe(const NavigationDatum& datum,
                                         const GeodesicSolution& transported,
                                         const std::vector<double>& t_grid,
                                         const StepPolicy& steps) {
	const ChartedFinslerMetric deformed = navigated_metric(datum, steps);
	CurvatureProfile out;
	for (double t : t_grid) {
		out.t.push_back(t);
		out.range.push_back(
		    flag_curvature_range(deformed, transported.position(t), transported.velocity(t), steps));
	}
	return out;
}

} // namespace finsler
