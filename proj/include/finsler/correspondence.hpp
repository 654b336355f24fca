#pragma once

#include "finsler/geodesics.hpp"
#include "finsler/navigation.hpp"

#include <utility>
#include <vector>

namespace finsler {

// Transport maps between the geometry of a base metric F and the geometry
// of its wind deformation F~, for winds that dilate F at a constant rate c
// (Killing winds are the c = 0 case of the same code path). The mechanism:
// run the base geodesic in a warped time, then push it through the wind
// flow Psi_t.

/// The time warp s(t) = (e^{2ct} - 1) / (2c). Below |c| = 1e-8 the closed
/// form switches to its series so that c -> 0 degrades continuously to
/// s = t; s(0) = 0 and s'(0) = 1 on both branches.
struct TimeWarp {
	double c = 0.0;

	double map(double t) const;     // s(t)
	double inverse(double s) const; // t with map(t) = s
	double rate(double t) const;    // s'(t) = e^{2ct}
};

/// Affine fit of the wind/velocity pairing p(t) = <V(gamma(t)), gamma'(t)>
/// (inner product with reference gamma'). Along a unit-speed geodesic of F
/// a dilation-c wind gives exactly p(t) = c0 - 2ct; the intercept c0 feeds
/// the squared-length identity below.
struct LinearPairingResult {
	double c0 = 0.0;
	double slope = 0.0;
	double max_abs_residual = 0.0;
};
LinearPairingResult linear_pairing(const ChartedFinslerMetric& m, const GeodesicSolution& geo,
                                   const VectorFieldSpec& V);

/// Dilation constant used by the transport maps: the wind's stored
/// measurement when present, otherwise a fresh fit near the chart center.
/// Throws when the fit says the wind is not homothetic, since every
/// identity downstream silently fails with a wrong c.
double measured_dilation(const NavigationDatum& datum, const StepPolicy& steps = default_steps());

/// Pushes a unit-F-speed geodesic of the base metric to a unit-speed
/// geodesic of the deformed metric,
///   gamma~(t) = Psi_t(gamma(s(t))),
/// sampled at the warped node times of `geo` plus the exact span endpoints
/// (the span must contain 0). Node velocities combine the flow tangent map
/// with the wind term,
///   gamma~'(t) = s'(t) (Psi_t)_* gamma'(s(t)) + V(gamma~(t)),
/// and node accelerations close the table with the deformed spray, so the
/// dense output interpolates a deformed-metric geodesic. Throws "extend
/// base geodesic" if the warped span leaves the base solution.
GeodesicSolution transport_geodesic(const NavigationDatum& datum, const GeodesicSolution& geo,
                                    double t_from, double t_to,
                                    const StepPolicy& steps = default_steps());

/// Geodesic-equation defect |d/dt gamma~'(t) + 2 G~(gamma~, gamma~')| of the
/// transported curve at an interior time t, with d/dt measured by central
/// differences of the transport formula itself (never of the interpolant,
/// which assumes the conclusion).
double transported_geodesic_residual(const NavigationDatum& datum, const GeodesicSolution& geo,
                                     double t, const StepPolicy& steps = default_steps());

/// Pushes a Jacobi field along `geo` to one along the transported geodesic,
///   J~(t) = (Psi_t)_* J(s(t)),
/// sampled like transport_geodesic. The field must be g-orthogonal to the
/// velocity along `geo` (value and covariant derivative at 0 both
/// orthogonal): tangential Jacobi parts do not transport. Derivative nodes difference the
/// transport formula; second-derivative nodes close the table with the
/// deformed linearization jets. orthogonality_drift reports the deviation
/// of g~(J~, gamma~') from its affine-in-t prediction, which doubles as the
/// check that flow pushforward preserves orthogonality to the velocity.
JacobiSolution transport_jacobi(const NavigationDatum& datum, const GeodesicSolution& geo,
                                const JacobiSolution& jac, double t_from, double t_to,
                                const StepPolicy& steps = default_steps());

/// The squared-length law for flow-pushed orthogonal vectors: with
/// c0 = linear_pairing(...).c0 along a unit-speed base geodesic,
///   <(Psi_t)_* v, (Psi_t)_* v>~ at gamma~'(t)
///     = e^{-2ct} / (c0 + 1) * <v, v> at gamma'(s(t)).
/// At each grid time the probe vector is v projected orthogonal to the
/// base velocity. Returns the worst relative residual and the worst
/// (normalized) pairing of the pushed vector with gamma~', which the law
/// claims stays zero.
struct KeyIdentityResult {
	double max_relative_residual = 0.0;
	double max_orthogonality = 0.0;
};
KeyIdentityResult verify_key_identity(const NavigationDatum& datum, const GeodesicSolution& geo,
                                      const Vector& v, const std::vector<double>& t_grid,
                                      const StepPolicy& steps = default_steps());

/// One flag for the curvature comparison: pole y and edge u at x. The
/// comparison always pairs the base flag (y, u) with the deformed flag
/// (y/F + V, u): pole shifted along the wind, edge fixed.
struct FlagInput {
	Vector x, y, u;
};

struct ResidualReport {
	std::vector<double> residuals; // one per non-skipped input, input order
	int n_skipped = 0;             // degenerate inputs (edge parallel to pole)
	double max_residual = 0.0;
};

/// Residuals |K~(x, y/F + V, u) - K(x, y, u) + c^2| of the flag-curvature
/// shift, one per flag; degenerate flags are skipped and counted. The edge
/// is first projected orthogonal to the pole, which changes neither flag
/// plane but keeps the curvature quotient away from its degenerate locus.
ResidualReport verify_flag_shift(const NavigationDatum& datum, const std::vector<FlagInput>& flags,
                                 const StepPolicy& steps = default_steps());

/// Residuals |S~(x, y/F + V) - S(x, y) - (n+1) c| of the S-curvature shift
/// at the given (x, y) points.
ResidualReport verify_s_shift(const NavigationDatum& datum,
                              const std::vector<std::pair<Vector, Vector>>& points,
                              long density_budget = 200000,
                              const StepPolicy& steps = default_steps());

/// Flag-curvature range of the deformed metric along a transported
/// geodesic, one (k_min, k_max) pair per grid time. A flat base must give
/// the constant profile -c^2; a curved base with c != 0 would drift like
/// lambda e^{4ct} - c^2, which is what rules locally symmetric deformed
/// metrics out away from the Killing case.
struct CurvatureProfile {
	std::vector<double> t;
	std::vector<CurvatureRange> range;
};
CurvatureProfile locally_symmetric_probe(const NavigationDatum& datum,
                                         const GeodesicSolution& transported,
                                         const std::vector<double>& t_grid,
                                         const StepPolicy& steps = default_steps());

} // namespace finsler
