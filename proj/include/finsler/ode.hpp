#pragma once

#include "finsler/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace finsler {

/// Dormand-Prince 5(4) with PI step control. Small and predictable on the
/// low-dimensional stiff-free systems this project integrates (flows,
/// geodesics, Jacobi equations); steps are clamped so every requested output
/// time is hit exactly rather than interpolated.
struct OdeOptions {
	double rtol = 1e-10;
	double atol = 1e-12;
	long max_steps = 2000000;
};

struct OdeStatus {
	bool completed = true;    // false: guard tripped or step budget exhausted
	double t_reached = 0.0;
	std::string message;      // empty when completed
};

using OdeRhs = std::function<void(double, const Vector&, Vector&)>;

/// Integrates y' = rhs(t, y) from t0 towards t1 (either direction).
/// `on_sample` is called at t0, at every time in `sample_times` (sorted in
/// the direction of integration, strictly inside (t0, t1] ), and at t1.
/// `guard`, when given, is checked after each accepted step; returning false
/// stops integration early with completed = false.
inline OdeStatus integrate_ode(const OdeRhs& rhs, Vector y, double t0, double t1,
                               const std::vector<double>& sample_times,
                               const std::function<void(double, const Vector&)>& on_sample,
                               const OdeOptions& opt = {},
                               const std::function<bool(double, const Vector&)>& guard = nullptr) {
	// Butcher tableau, Dormand-Prince 5(4).
	static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
	static const double a21 = 1.0 / 5;
	static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
	static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
	static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
	                    a54 = -212.0 / 729;
	static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
	                    a64 = 49.0 / 176, a65 = -5103.0 / 18656;
	static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
	                    b5 = -2187.0 / 6784, b6 = 11.0 / 84;
	// Difference between 5th- and embedded 4th-order weights.
	static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
	                    e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

	OdeStatus status;
	const double dir = (t1 >= t0) ? 1.0 : -1.0;
	const double span = std::abs(t1 - t0);
	if (span == 0.0) {
		if (on_sample) on_sample(t0, y);
		status.t_reached = t0;
		return status;
	}

	const int n = static_cast<int>(y.size());
	Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), yerr(n);

	double t = t0;
	double last_emitted = t0 - dir; // sentinel: nothing emitted at t1 yet
	auto emit = [&](double te, const Vector& ye) {
		if (on_sample) on_sample(te, ye);
		last_emitted = te;
	};
	emit(t, y);
	rhs(t, y, k1);

	// Conservative initial step scaled by the RHS size.
	double h = span / 100.0;
	{
		const double d0 = y.norm(), d1 = k1.norm();
		if (d1 > 1e-10) h = std::min(h, 0.01 * std::max(d0, 1.0) / d1);
		h = std::max(h, span * 1e-10);
	}

	std::size_t next_sample = 0;
	double prev_err = 1.0;
	const double tiny = 1e-14;
	for (long step = 0; step < opt.max_steps; ++step) {
		// Clamp to the next output time, then to the end.
		double target = (next_sample < sample_times.size()) ? sample_times[next_sample] : t1;
		double hstep = std::min(h, std::abs(target - t));
		const bool clamped = hstep < h;
		if (hstep < tiny * std::max(1.0, std::abs(t))) hstep = tiny * std::max(1.0, std::abs(t));
		const double hd = dir * hstep;

		ytmp = y + hd * a21 * k1;
		rhs(t + c2 * hd, ytmp, k2);
		ytmp = y + hd * (a31 * k1 + a32 * k2);
		rhs(t + c3 * hd, ytmp, k3);
		ytmp = y + hd * (a41 * k1 + a42 * k2 + a43 * k3);
		rhs(t + c4 * hd, ytmp, k4);
		ytmp = y + hd * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
		rhs(t + c5 * hd, ytmp, k5);
		ytmp = y + hd * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
		rhs(t + hd, ytmp, k6);
		ynew = y + hd * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
		rhs(t + hd, ynew, k7);
		yerr = hd * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

		double err = 0.0;
		for (int i = 0; i < n; ++i) {
			const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
			err = std::max(err, std::abs(yerr[i]) / sc);
		}

		if (err <= 1.0 || hstep <= tiny * std::max(1.0, std::abs(t))) {
			t += hd;
			y = ynew;
			k1 = k7; // first-same-as-last
			if (guard && !guard(t, y)) {
				emit(t, y);
				status.completed = false;
				status.t_reached = t;
				status.message = "guard stopped integration";
				return status;
			}
			while (next_sample < sample_times.size() &&
			       dir * (t - sample_times[next_sample]) >= -tiny * std::max(1.0, std::abs(t))) {
				emit(sample_times[next_sample], y);
				++next_sample;
			}
			if (dir * (t - t1) >= -tiny * std::max(1.0, std::abs(t1))) {
				if (std::abs(last_emitted - t1) > tiny * std::max(1.0, std::abs(t1))) emit(t1, y);
				status.t_reached = t1;
				return status;
			}
			const double fac =
			    0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(prev_err, 0.4 / 5.0);
			prev_err = std::max(err, 1e-10);
			// Keep the controller state when the step was shortened only to
			// hit an output time, so dense sampling does not throttle it.
			if (!clamped) h = hstep * std::clamp(fac, 0.2, 5.0);
		} else {
			h = hstep * std::max(0.2, 0.9 * std::pow(err, -1.0 / 5.0));
		}
	}
	status.completed = false;
	status.message = "step budget exhausted";
	status.t_reached = t;
	return status;
}

/// Convenience: integrate and return only the final state.
inline Vector solve_to(const OdeRhs& rhs, const Vector& y0, double t0, double t1,
                       const OdeOptions& opt = {}) {
	Vector out = y0;
	integrate_ode(
	    rhs, y0, t0, t1, {}, [&](double, const Vector& y) { out = y; }, opt);
	return out;
}

} // namespace finsler
