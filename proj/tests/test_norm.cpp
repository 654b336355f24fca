#include "finsler/norm.hpp"
#include "finsler/util.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace finsler;

namespace {

Matrix I2() { return Matrix::Identity(2, 2); }

Vector vec2(double a, double b) {
	Vector v(2);
	v << a, b;
	return v;
}

MinkowskiNormSpec randers_half() { return MinkowskiNormSpec::randers(I2(), vec2(0.5, 0.0)); }

// The same randers norm exposed as a bare evaluator, to exercise the
// finite-difference derivative path against the closed forms.
MinkowskiNormSpec randers_half_as_custom() {
	return MinkowskiNormSpec::custom(
	    2, [](const Vector& y) { return y.norm() + 0.5 * y[0]; });
}

} // namespace

TEST_CASE("norm values: frozen points") {
	auto quad = MinkowskiNormSpec::quadratic(I2());
	CHECK(quad.value(vec2(3.0, 4.0)) == doctest::Approx(5.0).epsilon(1e-14));

	auto rand = randers_half();
	CHECK(rand.value(vec2(1.0, 0.0)) == doctest::Approx(1.5).epsilon(1e-14));
	CHECK(rand.value(vec2(-1.0, 0.0)) == doctest::Approx(0.5).epsilon(1e-14));

	CHECK(quad.value(Vector::Zero(2)) == 0.0);
	CHECK(rand.value(Vector::Zero(2)) == 0.0);
	CHECK(randers_half_as_custom().value(Vector::Zero(2)) == 0.0);
}

TEST_CASE("norm values: positive homogeneity over random directions") {
	Rng rng(11);
	auto quad = MinkowskiNormSpec::quadratic((Matrix(2, 2) << 2.0, 0.3, 0.3, 1.0).finished());
	auto rand = randers_half();
	auto cust = randers_half_as_custom();
	for (int k = 0; k < 1000; ++k) {
		const Vector y = rng.vector(2, -2.0, 2.0);
		if (y.norm() < 1e-3) continue;
		const double lam = rng.uniform(0.1, 5.0);
		for (const auto* n : {&quad, &rand, &cust}) {
			const double lhs = n->value(lam * y);
			const double rhs = lam * n->value(y);
			CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, rhs));
		}
	}
}

TEST_CASE("fundamental tensor: quadratic kind returns A exactly") {
	Matrix A(2, 2);
	A << 2.0, 0.5, 0.5, 3.0;
	auto n = MinkowskiNormSpec::quadratic(A);
	CHECK((n.tensor_matrix(vec2(1.0, 1.0)) - A).norm() == 0.0);
}

TEST_CASE("fundamental tensor: randers closed form vs finite differences") {
	auto n = randers_half();
	auto L = [&](const Vector& y) {
		const double f = n.value(y);
		return f * f;
	};
	for (const Vector& y : {vec2(0.0, 1.0), vec2(1.0, 0.0), vec2(0.7, -0.4)}) {
		const Matrix g = n.tensor_matrix(y);
		const Matrix g_fd = 0.5 * oracles::fd_hessian(L, y, 1.2e-4 * std::max(1.0, y.norm()));
		CHECK((g - g_fd).norm() / g.norm() < 1e-6);
	}
}

TEST_CASE("fundamental tensor: custom kind differencing matches known answers") {
	auto abs_norm = MinkowskiNormSpec::custom(2, [](const Vector& y) { return y.norm(); });
	const Matrix g = abs_norm.tensor_matrix(vec2(1.0, 0.0));
	CHECK((g - I2()).norm() < 1e-6);

	// Cross-kind: custom evaluator of a quadratic norm vs the exact matrix.
	Matrix A(2, 2);
	A << 2.0, 0.4, 0.4, 1.5;
	auto quad_as_custom = MinkowskiNormSpec::custom(
	    2, [A](const Vector& y) { return std::sqrt(y.dot(A * y)); });
	auto quad = MinkowskiNormSpec::quadratic(A);
	Rng rng(17);
	for (int k = 0; k < 50; ++k) {
		const Vector y = rng.direction(2) * rng.uniform(0.5, 2.0);
		CHECK(std::abs(quad_as_custom.value(y) - quad.value(y)) < 1e-12);
		const Matrix diff = quad_as_custom.tensor_matrix(y) - A;
		CHECK(diff.norm() / A.norm() < 1e-6);
	}
}

TEST_CASE("fundamental tensor: Euler identity g_y(y,y) = F(y)^2") {
	Rng rng(23);
	auto rand = randers_half();
	auto cust = randers_half_as_custom();
	for (int k = 0; k < 200; ++k) {
		const Vector y = rng.direction(2) * rng.uniform(0.3, 3.0);
		for (const auto* n : {&rand, &cust}) {
			const double F = n->value(y);
			CHECK(std::abs(n->inner(y, y, y) - F * F) < 1e-7 * F * F);
		}
	}
}

TEST_CASE("inner product: frozen randers value and symmetry") {
	auto n = randers_half();
	const Vector y = vec2(1.0, 0.0);
	CHECK(n.inner(y, y, y) == doctest::Approx(2.25).epsilon(1e-12));

	Rng rng(31);
	for (int k = 0; k < 100; ++k) {
		const Vector base = rng.direction(2);
		const Vector u = rng.vector(2, -1.0, 1.0);
		const Vector v = rng.vector(2, -1.0, 1.0);
		CHECK(std::abs(n.inner(base, u, v) - n.inner(base, v, u)) < 1e-12);
	}
}

TEST_CASE("gradient: closed forms vs finite differences") {
	auto n = randers_half();
	Rng rng(41);
	for (int k = 0; k < 50; ++k) {
		const Vector y = rng.direction(2) * rng.uniform(0.4, 2.0);
		const Vector g = n.gradient(y);
		Vector fd(2);
		const double h = 1e-6;
		for (int i = 0; i < 2; ++i) {
			Vector a = y, b = y;
			a[i] += h;
			b[i] -= h;
			fd[i] = (n.value(a) - n.value(b)) / (2.0 * h);
		}
		CHECK((g - fd).norm() < 1e-8);
		// Homogeneity degree 0 of the gradient.
		CHECK((n.gradient(3.0 * y) - g).norm() < 1e-9);
	}
}

TEST_CASE("orthogonal complement basis") {
	auto quad = MinkowskiNormSpec::quadratic(I2());
	const auto basis = quad.orthogonal_complement_basis(vec2(1.0, 0.0));
	REQUIRE(basis.size() == 1);
	CHECK(std::abs(std::abs(basis[0][1]) - 1.0) < 1e-14);
	CHECK(std::abs(basis[0][0]) < 1e-14);

	Matrix D(2, 2);
	D << 1.0, 0.0, 0.0, 4.0;
	auto diag = MinkowskiNormSpec::quadratic(D);
	const auto dbasis = diag.orthogonal_complement_basis(vec2(1.0, 0.0));
	REQUIRE(dbasis.size() == 1);
	CHECK(std::abs(std::abs(dbasis[0][1]) - 0.5) < 1e-14); // g-unit: 4*(1/2)^2 = 1

	// Randers case: orthogonality and normalization up to roundoff.
	auto rand = randers_half();
	Rng rng(53);
	for (int k = 0; k < 50; ++k) {
		const Vector y = rng.direction(2) * rng.uniform(0.5, 2.0);
		const auto obasis = rand.orthogonal_complement_basis(y);
		REQUIRE(obasis.size() == 1);
		CHECK(std::abs(rand.inner(y, obasis[0], y)) < 1e-10 * rand.value(y));
		CHECK(std::abs(rand.inner(y, obasis[0], obasis[0]) - 1.0) < 1e-10);
	}

	// Dimension 3, anisotropic: g-orthonormality of both vectors.
	Matrix A3(3, 3);
	A3 << 2.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.5;
	auto n3 = MinkowskiNormSpec::quadratic(A3);
	Vector y3(3);
	y3 << 0.5, -1.0, 0.25;
	const auto b3 = n3.orthogonal_complement_basis(y3);
	REQUIRE(b3.size() == 2);
	for (const auto& u : b3) CHECK(std::abs(n3.inner(y3, u, y3)) < 1e-10 * n3.value(y3));
	CHECK(std::abs(n3.inner(y3, b3[0], b3[1])) < 1e-10);
}

TEST_CASE("degenerate inputs are rejected") {
	// Drift of Euclidean length exactly 1: unit ball touches the boundary of
	// strong convexity.
	CHECK_THROWS_AS(MinkowskiNormSpec::randers(I2(), vec2(1.0, 0.0)), FinslerError);

	// Quartic norm: smooth and convex but not strongly convex at the axes.
	auto quartic = MinkowskiNormSpec::custom(2, [](const Vector& y) {
		return std::pow(y[0] * y[0] * y[0] * y[0] + y[1] * y[1] * y[1] * y[1], 0.25);
	});
	CHECK_THROWS_AS(quartic.fundamental_tensor(vec2(1.0, 0.0)), FinslerError);

	// Evaluator returning garbage.
	auto bad = MinkowskiNormSpec::custom(2, [](const Vector&) { return std::nan(""); });
	CHECK_THROWS_AS(bad.value(vec2(1.0, 0.0)), FinslerError);

	// Tensor at (numerically) vanishing y.
	auto quad = MinkowskiNormSpec::quadratic(I2());
	CHECK_THROWS_AS(quad.fundamental_tensor(vec2(1e-13, 0.0)), FinslerError);
}
