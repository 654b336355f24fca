#include "finsler/geodesics.hpp"
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

NavigationDatum funk_datum(int n = 2) {
	return make_navigation(ChartedFinslerMetric::euclidean(n, 0.9), VectorFieldSpec::radial(n));
}

} // namespace

TEST_CASE("spray: euclidean space is flat") {
	auto eucl = ChartedFinslerMetric::euclidean(2);
	Rng rng(3);
	for (int k = 0; k < 20; ++k) {
		const Vector x = rng.ball_point(Vector::Zero(2), 0.8);
		const Vector y = rng.vector(2, -2.0, 2.0);
		CHECK(spray(eucl, x, y).norm() < 1e-9);
	}
	CHECK(spray(eucl, vec2(0.1, 0.2), Vector::Zero(2)).norm() == 0.0);
}

TEST_CASE("spray: conformal surface closed form") {
	auto m = oracles::conformal_surface();
	Rng rng(5);
	for (int k = 0; k < 30; ++k) {
		const Vector x = rng.ball_point(Vector::Zero(2), 1.0);
		const Vector y = rng.vector(2, -1.5, 1.5);
		if (y.norm() < 0.1) continue;
		CHECK((spray(m, x, y) - oracles::conformal_surface_spray(x, y)).norm() < 1e-8);
	}
}

TEST_CASE("spray jet: conformal jets and homogeneity") {
	auto m = oracles::conformal_surface();
	const Vector x = vec2(0.2, -0.3);
	const Vector y = vec2(0.7, 0.4);
	const SprayJet jet = spray_jet(m, x, y);

	// Hand jets of G = ((y1^2 - y2^2)/2, y1 y2): x-independent, linear rows.
	Matrix dGy(2, 2);
	dGy << y[0], -y[1], y[1], y[0];
	CHECK(jet.dG_dx.norm() < 1e-7);
	CHECK((jet.dG_dy - dGy).norm() < 1e-7);

	// The connection contracts back to the spray: N(x, y) y = 2 G(x, y).
	CHECK((jet.dG_dy * y - 2.0 * jet.G).norm() < 1e-8);

	// Positive 2-homogeneity of G itself.
	CHECK((spray(m, x, 3.0 * y) - 9.0 * spray(m, x, y)).norm() < 1e-7);
}

TEST_CASE("geodesics: straight lines in euclidean space") {
	auto eucl = ChartedFinslerMetric::euclidean(2, 2.0);
	const Vector x0 = vec2(0.1, -0.2), v0 = vec2(0.4, 0.3);
	const GeodesicSolution geo = integrate_geodesic(eucl, x0, v0, -1.0, 1.5);
	CHECK(!geo.exited_forward);
	CHECK(!geo.exited_backward);
	CHECK(geo.speed_drift < 1e-11);
	for (double tt : {-0.9, -0.25, 0.0, 0.6, 1.5}) {
		CHECK((geo.position(tt) - (x0 + tt * v0)).norm() < 1e-10);
		CHECK((geo.velocity(tt) - v0).norm() < 1e-10);
	}
}

TEST_CASE("geodesics: sphere chart rays through the origin") {
	auto sph = oracles::sphere_chart();
	Vector e = vec2(std::cos(0.7), std::sin(0.7));
	const GeodesicSolution geo = integrate_geodesic(sph, Vector::Zero(2), 0.5 * e, -1.2, 1.2);
	CHECK(geo.speed_drift < 1e-10); // unit speed: F(0, e/2) = 1
	for (double tt : {-1.1, -0.5, 0.3, 0.8, 1.2}) {
		const Vector expected = std::tan(0.5 * tt) * e;
		CHECK((geo.position(tt) - expected).norm() < 1e-9);
		const Vector vel = (0.5 / std::pow(std::cos(0.5 * tt), 2)) * e;
		CHECK((geo.velocity(tt) - vel).norm() < 1e-8);
	}
}

TEST_CASE("geodesics: dense output matches a direct shot") {
	auto m = oracles::conformal_surface();
	const Vector x0 = vec2(-0.1, 0.2), v0 = vec2(0.5, -0.3);
	const GeodesicSolution geo = integrate_geodesic(m, x0, v0, 0.0, 0.9);
	// 0.37 falls strictly between nodes; a second solve makes it an endpoint.
	const GeodesicSolution direct = integrate_geodesic(m, x0, v0, 0.0, 0.37);
	CHECK((geo.position(0.37) - direct.position(0.37)).norm() < 1e-10);
	CHECK((geo.velocity(0.37) - direct.velocity(0.37)).norm() < 1e-9);
}

TEST_CASE("geodesics: chart exit is flagged, not fatal") {
	auto eucl = ChartedFinslerMetric::euclidean(2, 0.5);
	const GeodesicSolution geo =
	    integrate_geodesic(eucl, Vector::Zero(2), vec2(1.0, 0.0), -2.0, 2.0);
	CHECK(geo.exited_forward);
	CHECK(geo.exited_backward);
	CHECK(geo.t_max() < 0.51);
	CHECK(geo.t_min() > -0.51);
	CHECK(geo.t_max() > 0.45);
	CHECK(geo.note.find("stopped") != std::string::npos);
	CHECK(geo.position(geo.t_max()).allFinite());
	CHECK_THROWS_WITH_AS(geo.position(1.0), doctest::Contains("outside covered span"),
	                     FinslerError);
}

TEST_CASE("covariant derivative reduces to the plain one in flat space") {
	auto eucl = ChartedFinslerMetric::euclidean(2);
	const Vector D =
	    covariant_derivative(eucl, vec2(0.1, 0.1), vec2(1.0, 0.0), vec2(0.3, 0.4), vec2(-0.2, 0.7));
	CHECK((D - vec2(-0.2, 0.7)).norm() < 1e-9);
}

TEST_CASE("parallel transport preserves inner products") {
	auto sph = oracles::sphere_chart();
	const Vector x0 = vec2(0.1, -0.2), v0 = vec2(0.45, 0.2);
	const GeodesicSolution geo = integrate_geodesic(sph, x0, v0, 0.0, 0.8);
	const Vector U0 = vec2(0.3, 0.5), W0 = vec2(-0.4, 0.1);
	const Vector U1 = parallel_transport(sph, geo, U0, 0.0, 0.8);
	const Vector W1 = parallel_transport(sph, geo, W0, 0.0, 0.8);
	const double before = sph.inner(x0, v0, U0, W0);
	const double after = sph.inner(geo.position(0.8), geo.velocity(0.8), U1, W1);
	CHECK(std::abs(after - before) < 1e-9);
	// Round trip returns the original vector.
	const Vector back = parallel_transport(sph, geo, U1, 0.8, 0.0);
	CHECK((back - U0).norm() < 1e-9);
}

TEST_CASE("jacobi: flat fields are affine in t") {
	auto eucl = ChartedFinslerMetric::euclidean(2, 2.0);
	const GeodesicSolution geo =
	    integrate_geodesic(eucl, Vector::Zero(2), vec2(0.6, 0.1), -1.0, 1.0);
	const Vector J0 = vec2(0.2, -0.3), DJ0 = vec2(0.5, 0.4);
	const JacobiSolution jac = integrate_jacobi(eucl, geo, J0, DJ0, -1.0, 1.0);
	for (double tt : {-0.8, -0.3, 0.4, 1.0})
		CHECK((jac.value(tt) - (J0 + tt * DJ0)).norm() < 1e-9);
	CHECK(jac.orthogonality_drift < 1e-10);
}

TEST_CASE("jacobi: sphere fields oscillate at the curvature frequency") {
	auto sph = oracles::sphere_chart();
	const Vector v0 = vec2(0.5, 0.0); // unit speed at the origin
	const GeodesicSolution geo = integrate_geodesic(sph, Vector::Zero(2), v0, 0.0, 1.2);

	auto glen = [&](const JacobiSolution& jac, double tt) {
		const Vector Jt = jac.value(tt);
		return std::sqrt(sph.inner(geo.position(tt), geo.velocity(tt), Jt, Jt));
	};

	SUBCASE("cosine branch: J(0) unit, DJ(0) = 0") {
		const JacobiSolution jac =
		    integrate_jacobi(sph, geo, vec2(0.0, 0.5), Vector::Zero(2), 0.0, 1.2);
		for (double tt : {0.2, 0.5, 0.9, 1.2})
			CHECK(std::abs(glen(jac, tt) - std::cos(tt)) < 1e-7);
		CHECK(jac.orthogonality_drift < 1e-8);
	}
	SUBCASE("sine branch: J(0) = 0, DJ(0) unit") {
		const JacobiSolution jac =
		    integrate_jacobi(sph, geo, Vector::Zero(2), vec2(0.0, 0.5), 0.0, 1.2);
		for (double tt : {0.2, 0.5, 0.9, 1.2})
			CHECK(std::abs(glen(jac, tt) - std::sin(tt)) < 1e-7);
	}
}

TEST_CASE("jacobi matches the geodesic variation it linearizes") {
	auto m = oracles::conformal_surface();
	const GeodesicSolution geo =
	    integrate_geodesic(m, vec2(-0.1, 0.15), vec2(0.45, -0.25), -0.5, 0.8);
	const double worst = jacobi_variation_mismatch(m, geo, vec2(0.3, -0.2), vec2(0.1, 0.4),
	                                               {-0.4, -0.2, 0.3, 0.6, 0.8});
	CHECK(worst < 1e-5);
}

TEST_CASE("riemann operator: algebraic identities") {
	SUBCASE("flat space: zero") {
		auto eucl = ChartedFinslerMetric::euclidean(2);
		CHECK(riemann_operator(eucl, vec2(0.2, 0.1), vec2(0.8, -0.4)).norm() < 1e-8);
	}
	SUBCASE("sphere: kills the base direction, g-self-adjoint") {
		auto sph = oracles::sphere_chart();
		const Vector x = vec2(0.3, 0.1), y = vec2(0.7, -0.5);
		const Matrix R = riemann_operator(sph, x, y);
		CHECK((R * y).norm() < 1e-6);
		const Matrix gR = sph.tensor(x, y) * R;
		CHECK((gR - gR.transpose()).norm() < 5e-6 * gR.norm());
	}
	SUBCASE("deformed disk: same identities on a genuinely finslerian metric") {
		auto deformed = navigated_metric(funk_datum());
		const Vector x = vec2(0.25, -0.1), y = vec2(0.8, 0.35);
		const Matrix R = riemann_operator(deformed, x, y);
		CHECK((R * y).norm() < 1e-5);
		const Matrix gR = deformed.tensor(x, y) * R;
		CHECK((gR - gR.transpose()).norm() < 1e-4 * gR.norm());
	}
}

TEST_CASE("flag curvature: constant-curvature references") {
	SUBCASE("euclidean: zero") {
		auto eucl = ChartedFinslerMetric::euclidean(2);
		CHECK(std::abs(flag_curvature(eucl, vec2(0.2, -0.1), vec2(0.9, 0.2), vec2(0.1, 1.0))) <
		      1e-8);
	}
	SUBCASE("conformal surface: flat (harmonic conformal factor)") {
		auto m = oracles::conformal_surface();
		CHECK(std::abs(flag_curvature(m, vec2(0.3, 0.2), vec2(0.6, -0.3), vec2(0.4, 0.8))) < 1e-6);
	}
	SUBCASE("sphere: one, in dimensions 2 and 3") {
		auto s2 = oracles::sphere_chart(2);
		Rng rng(11);
		for (int k = 0; k < 5; ++k) {
			const Vector x = rng.ball_point(Vector::Zero(2), 0.5);
			const Vector y = rng.direction(2);
			const Vector u = rng.direction(2);
			if (std::abs(u.dot(y)) > 0.95) continue;
			CHECK(flag_curvature(s2, x, y, u) == doctest::Approx(1.0).epsilon(1e-5));
		}
		auto s3 = oracles::sphere_chart(3);
		Vector x3(3), y3(3);
		x3 << 0.2, -0.1, 0.3;
		y3 << 0.5, 0.6, -0.2;
		const CurvatureRange range = flag_curvature_range(s3, x3, y3);
		CHECK(range.k_min == doctest::Approx(1.0).epsilon(1e-5));
		CHECK(range.k_max == doctest::Approx(1.0).epsilon(1e-5));
	}
}

TEST_CASE("flag curvature: deformation shifts flat to -1/4") {
	auto deformed = navigated_metric(funk_datum());
	Rng rng(13);
	for (int k = 0; k < 4; ++k) {
		const Vector x = rng.ball_point(Vector::Zero(2), 0.45);
		const Vector y = rng.direction(2);
		const Vector u = rng.direction(2);
		if (std::abs(u.dot(y)) > 0.9) continue;
		CHECK(flag_curvature(deformed, x, y, u) == doctest::Approx(-0.25).epsilon(4e-4));
	}
	const CurvatureRange range = flag_curvature_range(deformed, vec2(0.3, 0.2), vec2(0.6, -0.4));
	CHECK(range.k_min == doctest::Approx(-0.25).epsilon(4e-4));
	CHECK(range.k_max == doctest::Approx(-0.25).epsilon(4e-4));
}

TEST_CASE("flag curvature: both routes agree") {
	SUBCASE("sphere") {
		auto sph = oracles::sphere_chart();
		const Vector x = vec2(0.2, 0.15), y = vec2(0.7, -0.3), u = vec2(0.2, 0.9);
		const double k_op = flag_curvature(sph, x, y, u);
		const double k_jac = flag_curvature_via_jacobi(sph, x, y, u);
		CHECK(k_jac == doctest::Approx(1.0).epsilon(1e-4));
		CHECK(std::abs(k_op - k_jac) < 1e-4);
	}
	SUBCASE("deformed disk") {
		auto deformed = navigated_metric(funk_datum());
		const Vector x = vec2(0.2, -0.1), y = vec2(0.8, 0.3), u = vec2(-0.1, 0.9);
		const double k_op = flag_curvature(deformed, x, y, u);
		const double k_jac = flag_curvature_via_jacobi(deformed, x, y, u);
		CHECK(k_jac == doctest::Approx(-0.25).epsilon(4e-4));
		CHECK(std::abs(k_op - k_jac) < 1e-4);
	}
}

TEST_CASE("s-curvature: riemannian metrics have none") {
	auto sph = oracles::sphere_chart();
	CHECK(std::abs(s_curvature(sph, vec2(0.2, 0.1), vec2(0.5, -0.2))) < 1e-8);
	auto eucl = ChartedFinslerMetric::euclidean(2);
	CHECK(std::abs(s_curvature(eucl, vec2(0.0, 0.0), vec2(1.0, 0.0))) < 1e-10);
}

TEST_CASE("s-curvature: deformed disk rate matches the dimension shift") {
	// Unit vectors of the deformation are base-unit vectors shifted by the
	// wind; the rate is (n+1) times the dilation constant -1/2.
	SUBCASE("dimension 2") {
		auto deformed = navigated_metric(funk_datum(2));
		const Vector x = vec2(0.2, 0.1);
		for (double th : {0.3, 2.1}) {
			const Vector ytilde = vec2(std::cos(th), std::sin(th)) + x;
			CHECK(s_curvature(deformed, x, ytilde) == doctest::Approx(-1.5).epsilon(1e-6));
		}
	}
	SUBCASE("dimension 3") {
		auto deformed = navigated_metric(funk_datum(3));
		Vector x(3), e(3);
		x << 0.15, -0.1, 0.2;
		e << 0.6, 0.64, 0.48;
		const Vector ytilde = e / e.norm() + x;
		CHECK(s_curvature(deformed, x, ytilde) == doctest::Approx(-2.0).epsilon(1e-6));
	}
}
