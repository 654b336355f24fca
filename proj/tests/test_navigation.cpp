#include "finsler/navigation.hpp"
#include "finsler/util.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace finsler;

namespace {

Vector vec2(double a, double b) {
	Vector v(2);
	v << a, b;
	return v;
}

// Euclidean disk with outward radial wind: the standard constant-curvature
// deformation on the unit disk.
NavigationDatum funk_datum() {
	return make_navigation(ChartedFinslerMetric::euclidean(2, 0.9), VectorFieldSpec::radial(2));
}

} // namespace

TEST_CASE("navigate: zero wind returns the base norm") {
	auto d = make_navigation(ChartedFinslerMetric::euclidean(2, 1.0), VectorFieldSpec::zero(2));
	Rng rng(3);
	for (int k = 0; k < 20; ++k) {
		const Vector x = rng.ball_point(Vector::Zero(2), 0.8);
		const Vector y = rng.vector(2, -2.0, 2.0);
		CHECK(navigate(d, x, y) == doctest::Approx(y.norm()).epsilon(1e-14));
	}
}

TEST_CASE("navigate: frozen value on the radial-wind disk") {
	auto d = funk_datum();
	// |(1,0) - l*(1/2,0)| = l  =>  l = 2/3
	CHECK(navigate(d, vec2(0.5, 0.0), vec2(1.0, 0.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
	// At the origin the wind vanishes: euclidean norm.
	CHECK(navigate(d, Vector::Zero(2), vec2(0.6, 0.8)) == doctest::Approx(1.0).epsilon(1e-14));
	CHECK(navigate(d, vec2(0.5, 0.0), Vector::Zero(2)) == 0.0);
}

TEST_CASE("navigate: positive homogeneity and indicatrix shift") {
	auto d = funk_datum();
	auto deformed = navigated_metric(d);
	Rng rng(5);
	for (int k = 0; k < 100; ++k) {
		const Vector x = rng.ball_point(Vector::Zero(2), 0.7);
		const Vector y = rng.vector(2, -2.0, 2.0);
		if (y.norm() < 1e-6) continue;
		const double lam = rng.uniform(0.2, 4.0);
		const double f1 = navigate(d, x, y);
		CHECK(std::abs(navigate(d, x, lam * y) - lam * f1) < 1e-9 * std::max(1.0, lam * f1));

		// Unit vectors of the base map to unit vectors of the deformation.
		const Vector u = y / y.norm(); // base is euclidean
		CHECK(std::abs(deformed.value(x, u + d.wind.value(x)) - 1.0) < 1e-9);
	}
}

TEST_CASE("navigate matches the closed-form randers deformation") {
	SUBCASE("constant wind") {
		auto base = ChartedFinslerMetric::euclidean(2, 1.0);
		auto wind = VectorFieldSpec::translation(vec2(0.5, 0.0));
		auto d = make_navigation(base, wind);
		auto randers = navigate_randers(*d.base, d.wind);
		Rng rng(7);
		for (int k = 0; k < 100; ++k) {
			const Vector x = rng.ball_point(Vector::Zero(2), 0.8);
			const Vector y = rng.vector(2, -2.0, 2.0);
			CHECK(std::abs(navigate(d, x, y) - randers.value(x, y)) <
			      1e-10 * std::max(1.0, y.norm()));
		}
	}
	SUBCASE("radial wind") {
		auto d = funk_datum();
		auto randers = navigate_randers(*d.base, d.wind);
		Rng rng(9);
		for (int k = 0; k < 100; ++k) {
			const Vector x = rng.ball_point(Vector::Zero(2), 0.85);
			const Vector y = rng.vector(2, -2.0, 2.0);
			CHECK(std::abs(navigate(d, x, y) - randers.value(x, y)) <
			      1e-10 * std::max(1.0, y.norm()));
		}
	}
}

TEST_CASE("inverse_navigate undoes navigate") {
	auto d = funk_datum();
	Rng rng(11);
	for (int k = 0; k < 50; ++k) {
		const Vector x = rng.ball_point(Vector::Zero(2), 0.8);
		const Vector y = rng.direction(2) * rng.uniform(0.3, 2.0);
		const double F = y.norm(); // base norm of y
		const Vector ytilde = y + F * d.wind.value(x);
		// Forward: the shifted vector has deformed norm F.
		CHECK(std::abs(navigate(d, x, ytilde) - F) < 1e-11 * F);
		// Inverse: recovers F from y alone.
		CHECK(std::abs(inverse_navigate(d, x, y) - F) < 1e-9 * F);
	}
	// Zero wind: inverse equals the deformed (= base) norm.
	auto dz = make_navigation(ChartedFinslerMetric::euclidean(2, 1.0), VectorFieldSpec::zero(2));
	CHECK(inverse_navigate(dz, vec2(0.1, 0.1), vec2(3.0, 4.0)) ==
	      doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("deformed tensor: analytic callbacks vs finite differences") {
	auto d = funk_datum();
	auto deformed = navigated_metric(d);
	Rng rng(13);
	for (int k = 0; k < 25; ++k) {
		const Vector x = rng.ball_point(Vector::Zero(2), 0.7);
		const Vector yt = rng.direction(2) * rng.uniform(0.5, 1.5);
		const MinkowskiNormSpec norm = deformed.norm_at(x);
		const Matrix g = norm.tensor_matrix(yt);

		auto L = [&](const Vector& v) {
			const double f = norm.value(v);
			return f * f;
		};
		const Matrix g_fd = 0.5 * oracles::fd_hessian(L, yt, 1.2e-4 * std::max(1.0, yt.norm()));
		CHECK((g - g_fd).norm() / g.norm() < 1e-6);

		// Euler identity survives the wrapping.
		const double F = norm.value(yt);
		CHECK(std::abs(yt.dot(g * yt) - F * F) < 1e-10 * F * F);

		// Analytic gradient against differences of the root solve.
		const Vector grad = norm.gradient(yt);
		Vector fd(2);
		for (int i = 0; i < 2; ++i) {
			Vector a = yt, b = yt;
			a[i] += 1e-6;
			b[i] -= 1e-6;
			fd[i] = (norm.value(a) - norm.value(b)) / 2e-6;
		}
		CHECK((grad - fd).norm() < 1e-8);
	}
}

TEST_CASE("tensor relation on the orthogonal complement") {
	SUBCASE("zero wind: identity") {
		auto d = make_navigation(ChartedFinslerMetric::euclidean(2, 1.0), VectorFieldSpec::zero(2));
		CHECK(verify_tensor_relation(d, vec2(0.2, 0.1), vec2(0.0, 1.0)) < 1e-12);
	}
	SUBCASE("radial wind") {
		auto d = funk_datum();
		CHECK(verify_tensor_relation(d, vec2(0.3, 0.0), vec2(0.0, 1.0)) < 1e-5);
		Rng rng(17);
		for (int k = 0; k < 30; ++k) {
			const Vector x = rng.ball_point(Vector::Zero(2), 0.7);
			const Vector y = rng.direction(2) * rng.uniform(0.5, 2.0);
			CHECK(verify_tensor_relation(d, x, y) < 1e-5);
		}
	}
	SUBCASE("rotational wind") {
		auto d = make_navigation(ChartedFinslerMetric::euclidean(2, 1.0),
		                         VectorFieldSpec::rotation(2, 0.8));
		Rng rng(19);
		for (int k = 0; k < 30; ++k) {
			const Vector x = rng.ball_point(Vector::Zero(2), 0.7);
			const Vector y = rng.direction(2) * rng.uniform(0.5, 2.0);
			CHECK(verify_tensor_relation(d, x, y) < 1e-5);
		}
	}
	SUBCASE("dimension 3") {
		auto d = make_navigation(ChartedFinslerMetric::euclidean(3, 0.9),
		                         VectorFieldSpec::radial(3));
		Rng rng(23);
		for (int k = 0; k < 10; ++k) {
			const Vector x = rng.ball_point(Vector::Zero(3), 0.6);
			const Vector y = rng.direction(3);
			CHECK(verify_tensor_relation(d, x, y) < 1e-5);
		}
	}
}

TEST_CASE("deformation preserves the density") {
	SUBCASE("zero wind") {
		auto d = make_navigation(ChartedFinslerMetric::euclidean(2, 1.0), VectorFieldSpec::zero(2));
		CHECK(verify_volume_equality(d, vec2(0.4, 0.2)) < 1e-12);
	}
	SUBCASE("radial wind, several points") {
		auto d = funk_datum();
		for (double r : {0.0, 0.3, 0.6})
			CHECK(verify_volume_equality(d, vec2(r, 0.0)) < 1e-6);
	}
	SUBCASE("constant wind") {
		auto d = make_navigation(ChartedFinslerMetric::euclidean(2, 1.0),
		                         VectorFieldSpec::translation(vec2(0.3, 0.0)));
		CHECK(verify_volume_equality(d, vec2(0.1, 0.5)) < 1e-6);
	}
}

TEST_CASE("inadmissible wind is rejected") {
	// Radial wind reaches unit speed at |x| = 1 > 0.95 = 1 - margin.
	auto base = ChartedFinslerMetric::euclidean(2, 2.0);
	auto d = make_navigation(base, VectorFieldSpec::radial(2));
	CHECK(!d.admissible(vec2(0.97, 0.0)));
	CHECK(d.admissible(vec2(0.5, 0.0)));
	CHECK_THROWS_WITH_AS(navigate(d, vec2(1.2, 0.0), vec2(1.0, 0.0)),
	                     doctest::Contains("navigation undefined"), FinslerError);
	auto deformed = navigated_metric(d);
	CHECK_THROWS_AS(deformed.norm_at(vec2(0.96, 0.0)), FinslerError);
}
