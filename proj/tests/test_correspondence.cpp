#include "finsler/correspondence.hpp"
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

NavigationDatum funk_datum(int n = 2) {
	return make_navigation(ChartedFinslerMetric::euclidean(n, 0.9), VectorFieldSpec::radial(n));
}

NavigationDatum rotation_datum(double rate = 0.7) {
	return make_navigation(ChartedFinslerMetric::euclidean(2, 0.9),
	                       VectorFieldSpec::rotation(2, rate));
}

// Unit-speed euclidean ray from the origin, long enough steering room for
// every warped window used below.
GeodesicSolution base_ray(const NavigationDatum& datum, const Vector& e) {
	return integrate_geodesic(*datum.base, Vector::Zero(2), e, -0.1, 0.45);
}

} // namespace

TEST_CASE("time warp: branches, endpoints, round trips") {
	const TimeWarp funk{-0.5};
	CHECK(funk.map(0.0) == 0.0);
	CHECK(funk.rate(0.0) == 1.0);
	CHECK(funk.map(0.4) == doctest::Approx(1.0 - std::exp(-0.4)).epsilon(1e-14));

	for (double c : {-0.5, 0.0, 0.3, 1e-8, -1e-8}) {
		const TimeWarp warp{c};
		for (double t : {-0.5, 0.25, 1.0})
			CHECK(warp.inverse(warp.map(t)) == doctest::Approx(t).epsilon(1e-12));
	}

	// Continuity across the series switch.
	const TimeWarp above{1e-8 + 1e-12}, below{1e-8 - 1e-12};
	CHECK(std::abs(above.map(1.0) - below.map(1.0)) < 1e-10);
	CHECK(std::abs(above.inverse(1.0) - below.inverse(1.0)) < 1e-10);
}

TEST_CASE("measured dilation: homothetic winds fit, others are rejected") {
	CHECK(measured_dilation(funk_datum()) == doctest::Approx(-0.5).epsilon(1e-9));
	CHECK(std::abs(measured_dilation(rotation_datum())) < 1e-9);

	auto sphere_killing =
	    make_navigation(oracles::sphere_chart(2, 0.9), VectorFieldSpec::rotation(2, 0.5));
	CHECK(std::abs(measured_dilation(sphere_killing)) < 1e-8);

	VectorFieldSpec bump;
	bump.name = "shear-bump";
	bump.value = [](const Vector& x) { return vec2(x[0] * x[0], 0.0); };
	auto bad = make_navigation(ChartedFinslerMetric::euclidean(2, 0.9), bump);
	CHECK_THROWS_WITH_AS(measured_dilation(bad), doctest::Contains("not homothetic"),
	                     FinslerError);
}

TEST_CASE("zero wind: both transports are the identity") {
	auto datum =
	    make_navigation(ChartedFinslerMetric::euclidean(2, 1.0), VectorFieldSpec::zero(2));
	const Vector x0 = vec2(0.1, -0.2), e = vec2(0.6, 0.8);
	const GeodesicSolution geo = integrate_geodesic(*datum.base, x0, e, -0.5, 0.5);

	const GeodesicSolution moved = transport_geodesic(datum, geo, -0.4, 0.4);
	CHECK(moved.speed_drift < 1e-10);
	for (double tt : {-0.35, 0.0, 0.2, 0.4}) {
		CHECK((moved.position(tt) - geo.position(tt)).norm() < 1e-10);
		CHECK((moved.velocity(tt) - geo.velocity(tt)).norm() < 1e-9);
	}

	const JacobiSolution jac =
	    integrate_jacobi(*datum.base, geo, vec2(0.3, 0.1), vec2(-0.2, 0.5), -0.5, 0.5);
	const JacobiSolution movedj = transport_jacobi(datum, geo, jac, -0.4, 0.4);
	for (double tt : {-0.3, 0.0, 0.25, 0.4})
		CHECK((movedj.value(tt) - jac.value(tt)).norm() < 1e-9);
}

TEST_CASE("deformed disk: transported ray matches direct integration") {
	auto datum = funk_datum();
	const Vector e = vec2(std::cos(0.4), std::sin(0.4));
	const GeodesicSolution geo = base_ray(datum, e);

	const GeodesicSolution moved = transport_geodesic(datum, geo, 0.0, 0.4);
	const ChartedFinslerMetric deformed = navigated_metric(datum);

	// Unit speed out of the gate (the wind vanishes at the origin) and flat
	// speed profile across the window.
	CHECK(deformed.value(moved.position(0.0), moved.velocity(0.0)) ==
	      doctest::Approx(1.0).epsilon(1e-9));
	CHECK(moved.speed_drift < 1e-6);

	// The transported curve stays a reparametrized ray.
	const Vector far = moved.position(0.35);
	CHECK((far - far.dot(e) * e).norm() < 1e-9);

	const GeodesicSolution direct =
	    integrate_geodesic(deformed, moved.position(0.0), moved.velocity(0.0), 0.0, 0.4);
	for (double tt : {0.05, 0.15, 0.25, 0.4})
		CHECK((moved.position(tt) - direct.position(tt)).norm() < 1e-5);

	for (double tt : {0.1, 0.25, 0.35})
		CHECK(transported_geodesic_residual(datum, geo, tt) < 1e-4);
}

TEST_CASE("killing rotation: transported geodesic matches direct integration") {
	auto datum = rotation_datum();
	const Vector x0 = vec2(0.2, -0.1), e = vec2(0.6, 0.8);
	const GeodesicSolution geo = integrate_geodesic(*datum.base, x0, e, -0.5, 0.5);

	const GeodesicSolution moved = transport_geodesic(datum, geo, -0.4, 0.4);
	const ChartedFinslerMetric deformed = navigated_metric(datum);
	CHECK(moved.speed_drift < 1e-6);

	const GeodesicSolution direct = integrate_geodesic(deformed, moved.position(0.0),
	                                                   moved.velocity(0.0), -0.4, 0.4);
	for (double tt : {-0.35, -0.15, 0.1, 0.3, 0.4})
		CHECK((moved.position(tt) - direct.position(tt)).norm() < 1e-6);

	for (double tt : {-0.3, 0.0, 0.3})
		CHECK(transported_geodesic_residual(datum, geo, tt) < 1e-4);
}

TEST_CASE("deformed disk: transported jacobi field matches re-integration") {
	auto datum = funk_datum();
	const Vector e = vec2(std::cos(0.4), std::sin(0.4));
	const Vector u = vec2(-std::sin(0.4), std::cos(0.4));
	const GeodesicSolution geo = base_ray(datum, e);
	const JacobiSolution jac =
	    integrate_jacobi(*datum.base, geo, u, Vector::Zero(2), -0.1, 0.45);

	const JacobiSolution moved = transport_jacobi(datum, geo, jac, 0.0, 0.4);
	CHECK(moved.orthogonality_drift < 1e-5);

	const ChartedFinslerMetric deformed = navigated_metric(datum);
	const GeodesicSolution along = transport_geodesic(datum, geo, 0.0, 0.4);
	const Vector J0 = moved.value(0.0);
	const Vector DJ0 = covariant_derivative(deformed, along.position(0.0), along.velocity(0.0),
	                                        J0, moved.derivative(0.0));
	const JacobiSolution redone = integrate_jacobi(deformed, along, J0, DJ0, 0.0, 0.4);
	for (double tt : {0.1, 0.2, 0.3, 0.4})
		CHECK((moved.value(tt) - redone.value(tt)).norm() < 1e-4);
}

TEST_CASE("killing rotation: transported jacobi field matches re-integration") {
	auto datum = rotation_datum();
	const Vector x0 = vec2(0.15, -0.2), e = vec2(0.8, 0.6);
	const GeodesicSolution geo = integrate_geodesic(*datum.base, x0, e, -0.5, 0.5);
	// Both initial value and rate orthogonal to e: tangential parts are
	// outside the transport contract.
	const JacobiSolution jac =
	    integrate_jacobi(*datum.base, geo, vec2(-0.6, 0.8), vec2(0.06, -0.08), -0.5, 0.5);

	const JacobiSolution moved = transport_jacobi(datum, geo, jac, 0.0, 0.4);
	const ChartedFinslerMetric deformed = navigated_metric(datum);
	const GeodesicSolution along = transport_geodesic(datum, geo, 0.0, 0.4);
	const Vector J0 = moved.value(0.0);
	const Vector DJ0 = covariant_derivative(deformed, along.position(0.0), along.velocity(0.0),
	                                        J0, moved.derivative(0.0));
	const JacobiSolution redone = integrate_jacobi(deformed, along, J0, DJ0, 0.0, 0.4);
	for (double tt : {0.1, 0.25, 0.4})
		CHECK((moved.value(tt) - redone.value(tt)).norm() < 1e-5);
}

TEST_CASE("linear pairing: slope is minus twice the dilation") {
	SUBCASE("radial wind, slope +1") {
		auto datum = funk_datum();
		const Vector x0 = vec2(0.2, 0.1), e = vec2(0.6, -0.8);
		const GeodesicSolution geo = integrate_geodesic(*datum.base, x0, e, -0.3, 0.3);
		const LinearPairingResult fit = linear_pairing(*datum.base, geo, datum.wind);
		CHECK(fit.c0 == doctest::Approx(x0.dot(e)).epsilon(1e-10));
		CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-10));
		CHECK(fit.max_abs_residual < 1e-10);
	}
	SUBCASE("killing wind, constant pairing") {
		auto datum = rotation_datum();
		const GeodesicSolution geo =
		    integrate_geodesic(*datum.base, vec2(0.1, 0.2), vec2(1.0, 0.0), -0.3, 0.3);
		const LinearPairingResult fit = linear_pairing(*datum.base, geo, datum.wind);
		CHECK(std::abs(fit.slope) < 1e-9);
		CHECK(fit.max_abs_residual < 1e-9);
	}
}

TEST_CASE("key identity: squared lengths of flow-pushed orthogonal vectors") {
	const std::vector<double> grid = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
	SUBCASE("deformed disk along a ray") {
		auto datum = funk_datum();
		const Vector e = vec2(std::cos(0.4), std::sin(0.4));
		const GeodesicSolution geo = base_ray(datum, e);
		const KeyIdentityResult res = verify_key_identity(datum, geo, vec2(-0.2, 1.0), grid);
		CHECK(res.max_relative_residual < 1e-5);
		CHECK(res.max_orthogonality < 1e-5);
	}
	SUBCASE("killing rotation: factor constant in t") {
		auto datum = rotation_datum();
		const GeodesicSolution geo =
		    integrate_geodesic(*datum.base, vec2(0.2, -0.1), vec2(0.6, 0.8), -0.1, 0.45);
		const KeyIdentityResult res = verify_key_identity(datum, geo, vec2(1.0, 0.3), grid);
		CHECK(res.max_relative_residual < 1e-5);
		CHECK(res.max_orthogonality < 1e-5);
	}
}

TEST_CASE("flag shift: residual tables") {
	SUBCASE("deformed disk: curvature drops by c squared") {
		auto datum = funk_datum();
		Rng rng(29);
		std::vector<FlagInput> flags;
		for (int k = 0; k < 40; ++k)
			flags.push_back({rng.ball_point(Vector::Zero(2), 0.45), rng.direction(2),
			                 rng.direction(2)});
		const ResidualReport rep = verify_flag_shift(datum, flags);
		CHECK(rep.residuals.size() >= 35);
		CHECK(rep.max_residual < 1e-4);
	}
	SUBCASE("killing wind on the sphere chart: curvature unchanged") {
		auto datum =
		    make_navigation(oracles::sphere_chart(2, 0.9), VectorFieldSpec::rotation(2, 0.5));
		Rng rng(31);
		std::vector<FlagInput> flags;
		for (int k = 0; k < 12; ++k)
			flags.push_back({rng.ball_point(Vector::Zero(2), 0.5), rng.direction(2),
			                 rng.direction(2)});
		const ResidualReport rep = verify_flag_shift(datum, flags);
		CHECK(rep.residuals.size() >= 10);
		CHECK(rep.max_residual < 1e-4);
	}
	SUBCASE("zero wind: nothing shifts") {
		auto datum =
		    make_navigation(ChartedFinslerMetric::euclidean(2, 0.9), VectorFieldSpec::zero(2));
		std::vector<FlagInput> flags = {{vec2(0.2, 0.1), vec2(0.9, 0.1), vec2(0.0, 1.0)},
		                                {vec2(-0.3, 0.2), vec2(0.3, -0.8), vec2(1.0, 0.4)}};
		const ResidualReport rep = verify_flag_shift(datum, flags);
		CHECK(rep.max_residual < 1e-5);
	}
}

TEST_CASE("s shift: residual tables") {
	SUBCASE("deformed disk: rate drops by (n+1)/2") {
		auto datum = funk_datum();
		Rng rng(37);
		std::vector<std::pair<Vector, Vector>> points;
		for (int k = 0; k < 6; ++k)
			points.emplace_back(rng.ball_point(Vector::Zero(2), 0.4), rng.direction(2));
		const ResidualReport rep = verify_s_shift(datum, points);
		CHECK(rep.n_skipped == 0);
		CHECK(rep.max_residual < 1e-5);
	}
	SUBCASE("killing translation wind: rate unchanged") {
		auto datum = make_navigation(ChartedFinslerMetric::euclidean(2, 0.9),
		                             VectorFieldSpec::translation(vec2(0.3, -0.2)));
		std::vector<std::pair<Vector, Vector>> points = {
		    {vec2(0.0, 0.0), vec2(1.0, 0.0)},
		    {vec2(0.3, 0.1), vec2(-0.4, 0.9)},
		    {vec2(-0.2, 0.25), vec2(0.7, 0.7)}};
		const ResidualReport rep = verify_s_shift(datum, points);
		CHECK(rep.n_skipped == 0);
		CHECK(rep.max_residual < 1e-6);
	}
}

TEST_CASE("locally symmetric probe: curvature profiles along transported geodesics") {
	SUBCASE("deformed disk: constant -1/4") {
		auto datum = funk_datum();
		const Vector e = vec2(1.0, 0.0);
		const GeodesicSolution moved = transport_geodesic(datum, base_ray(datum, e), 0.0, 0.4);
		const CurvatureProfile prof =
		    locally_symmetric_probe(datum, moved, {0.0, 0.1, 0.2, 0.3});
		for (const CurvatureRange& r : prof.range) {
			CHECK(r.k_min == doctest::Approx(-0.25).epsilon(4e-3));
			CHECK(r.k_max == doctest::Approx(-0.25).epsilon(4e-3));
		}
	}
	SUBCASE("killing wind on the sphere chart: constant +1") {
		auto datum =
		    make_navigation(oracles::sphere_chart(2, 0.9), VectorFieldSpec::rotation(2, 0.5));
		const Vector x0 = vec2(0.1, 0.0);
		const Vector e = vec2(0.98, 0.2) / datum.base->value(x0, vec2(0.98, 0.2));
		const GeodesicSolution geo = integrate_geodesic(*datum.base, x0, e, -0.1, 0.45);
		const GeodesicSolution moved = transport_geodesic(datum, geo, 0.0, 0.35);
		const CurvatureProfile prof = locally_symmetric_probe(datum, moved, {0.0, 0.15, 0.3});
		for (const CurvatureRange& r : prof.range) {
			CHECK(r.k_min == doctest::Approx(1.0).epsilon(1e-4));
			CHECK(r.k_max == doctest::Approx(1.0).epsilon(1e-4));
		}
	}
}

TEST_CASE("transport windows: misuse is reported") {
	auto datum = funk_datum();
	const GeodesicSolution geo = base_ray(datum, vec2(1.0, 0.0));
	CHECK_THROWS_WITH_AS(transport_geodesic(datum, geo, 0.1, 0.4),
	                     doctest::Contains("contain t = 0"), FinslerError);

	const GeodesicSolution stub =
	    integrate_geodesic(*datum.base, Vector::Zero(2), vec2(1.0, 0.0), -0.05, 0.1);
	CHECK_THROWS_WITH_AS(transport_geodesic(datum, stub, 0.0, 0.4),
	                     doctest::Contains("extend base geodesic"), FinslerError);
}
