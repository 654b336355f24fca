#pragma once

#include "finsler/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace finsler {

/// Deterministic RNG wrapper. All sampling in the verification suites goes
/// through this so that a fixed seed reproduces every draw bit for bit,
/// independent of standard-library distribution internals.
class Rng {
public:
	explicit Rng(std::uint64_t seed) : eng_(seed) {}

	double uniform(double a, double b) {
		// 53-bit mantissa draw, fully determined by the engine stream.
		const std::uint64_t r = eng_() >> 11;
		const double u = static_cast<double>(r) * 0x1.0p-53;
		return a + (b - a) * u;
	}

	double normal() {
		// Marsaglia polar; deterministic given the engine stream.
		for (;;) {
			const double u = uniform(-1.0, 1.0);
			const double v = uniform(-1.0, 1.0);
			const double s = u * u + v * v;
			if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
		}
	}

	Vector vector(int n, double a, double b) {
		Vector v(n);
		for (int i = 0; i < n; ++i) v[i] = uniform(a, b);
		return v;
	}

	/// Uniform direction on the Euclidean unit sphere.
	Vector direction(int n) {
		for (;;) {
			Vector v(n);
			for (int i = 0; i < n; ++i) v[i] = normal();
			const double r = v.norm();
			if (r > 1e-6) return v / r;
		}
	}

	/// Uniform point in the Euclidean ball of given radius around center.
	Vector ball_point(const Vector& center, double radius) {
		const int n = static_cast<int>(center.size());
		const Vector dir = direction(n);
		const double u = uniform(0.0, 1.0);
		return center + radius * std::pow(u, 1.0 / n) * dir;
	}

	std::uint64_t raw() { return eng_(); }

private:
	std::mt19937_64 eng_;
};

/// Halton low-discrepancy sequence, used by the rejection-sampling volume
/// estimator in dimension >= 3. Index starts at 1.
inline double halton(std::uint64_t index, int base) {
	double f = 1.0, r = 0.0;
	while (index > 0) {
		f /= base;
		r += f * static_cast<double>(index % base);
		index /= base;
	}
	return r;
}

inline double unit_ball_volume(int n) {
	// V_n = pi^(n/2) / Gamma(n/2 + 1)
	return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Plenty for the quadrature orders used here (<= 128).
inline void gauss_legendre(int m, std::vector<double>& nodes, std::vector<double>& weights) {
	nodes.assign(m, 0.0);
	weights.assign(m, 0.0);
	for (int i = 0; i < (m + 1) / 2; ++i) {
		double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
		double dp = 0.0;
		for (int it = 0; it < 100; ++it) {
			double p0 = 1.0, p1 = x;
			for (int k = 2; k <= m; ++k) {
				const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
				p0 = p1;
				p1 = p2;
			}
			dp = m * (x * p1 - p0) / (x * x - 1.0);
			const double dx = p1 / dp;
			x -= dx;
			if (std::abs(dx) < 1e-15) break;
		}
		nodes[i] = -x;
		nodes[m - 1 - i] = x;
		const double w = 2.0 / ((1.0 - x * x) * dp * dp);
		weights[i] = w;
		weights[m - 1 - i] = w;
	}
}

/// Least-squares fit of samples (t_i, p_i) to p = intercept + slope*t.
struct AffineFit {
	double intercept = 0.0;
	double slope = 0.0;
	double max_abs_residual = 0.0;
};

inline AffineFit fit_affine(const std::vector<double>& t, const std::vector<double>& p) {
	const std::size_t m = t.size();
	double st = 0, sp = 0, stt = 0, stp = 0;
	for (std::size_t i = 0; i < m; ++i) {
		st += t[i];
		sp += p[i];
		stt += t[i] * t[i];
		stp += t[i] * p[i];
	}
	const double denom = m * stt - st * st;
	AffineFit fit;
	if (std::abs(denom) < 1e-300) {
		fit.intercept = sp / static_cast<double>(m);
		fit.slope = 0.0;
	} else {
		fit.slope = (m * stp - st * sp) / denom;
		fit.intercept = (sp - fit.slope * st) / static_cast<double>(m);
	}
	for (std::size_t i = 0; i < m; ++i)
		fit.max_abs_residual =
		    std::max(fit.max_abs_residual, std::abs(p[i] - fit.intercept - fit.slope * t[i]));
	return fit;
}

} // namespace finsler
