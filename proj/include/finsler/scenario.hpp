#pragma once

#include "finsler/correspondence.hpp"
#include "finsler/isoparametric.hpp"
#include "finsler/navigation.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace finsler {

// Scenario-driven verification: named metric/wind setups, a config format
// for custom ones, and the suite runners behind the command-line front end.

/// Thrown by the config parser and scenario builder; messages carry the
/// offending line or field.
struct ConfigError : FinslerError {
	using FinslerError::FinslerError;
};

/// A fully specified verification scenario. Defaults match the built-in
/// "funk-disk" sizes; see docs/scenario-format.md for the file schema.
struct ScenarioConfig {
	std::string name = "custom";

	// [metric] kind = euclidean | sphere (round metric in the ball chart)
	std::string metric_kind = "euclidean";
	int dim = 2;
	double chart_radius = 0.9;

	// [wind] kind = zero | radial | rotation | translation
	std::string wind_kind = "zero";
	double rotation_rate = 0.7;              // rotation only
	Vector translation;                      // translation only
	std::optional<double> declared_dilation; // gate against the measured value

	// [region] sampling ball and the navigation admissibility margin
	Vector region_center; // defaults to the chart center
	double region_radius = 0.45;
	double margin = 0.05;

	// [samples]
	int flags = 100;
	int points = 20;
	int levels = 3;
	int geodesics = 10;
	std::uint64_t seed = 1;

	// [suites] run = ... (empty means every suite, canonical order)
	std::vector<std::string> suites;
	// [tolerances] suite-name = value overrides
	std::map<std::string, double> tolerance_overrides;
};

/// The ten suite names in report order.
const std::vector<std::string>& canonical_suites();

/// Default residual tolerance of a suite (before overrides).
double default_tolerance(const std::string& suite);

/// Parses the scenario text format (sections, key = value, # comments).
/// Throws ConfigError naming the line and field on any problem; unknown
/// sections and keys are rejected.
ScenarioConfig parse_scenario_config(const std::string& text);

bool is_builtin_scenario(const std::string& name);
ScenarioConfig builtin_scenario(const std::string& name); // throws ConfigError
/// Built-in name, otherwise a config file path.
ScenarioConfig load_scenario(const std::string& name_or_path);

/// One verified statement with its worst residual over the sampled inputs.
struct SuiteResult {
	std::string suite;
	std::string statement; // the relation this suite checks, in words
	int n_samples = 0;
	double max_residual = 0.0;
	double tolerance = 0.0;
	bool pass = false;
	std::string note; // nonempty when the suite aborted early
	std::vector<std::pair<std::string, double>> details;
	std::vector<std::string> csv_rows; // per-sample data, header per suite
};

struct ScenarioReport {
	std::string scenario;
	std::uint64_t seed = 0;
	double measured_dilation = 0.0;
	std::optional<double> declared_dilation;
	std::vector<SuiteResult> suites;
	bool pass = false;
};

struct RunOptions {
	std::vector<std::string> suites;   // overrides the config selection
	std::optional<std::uint64_t> seed; // overrides the config seed
	int jobs = 1;                      // max suites in flight
};

/// Runs the selected suites and returns the assembled report (deterministic
/// given config and seed, independent of jobs). Throws ConfigError for
/// unusable configs, including a declared dilation that disagrees with the
/// measured one by more than 1e-6.
ScenarioReport run_scenario(const ScenarioConfig& config, const RunOptions& opt = {});

/// Deterministic JSON serialization of a report (byte-stable per seed).
std::string report_json(const ScenarioReport& report);

/// Column header of a suite's CSV rows.
std::string suite_csv_header(const std::string& suite);

/// Writes report.json and/or `<scenario>-<suite>.csv` under dir (created if
/// missing); returns the paths written.
std::vector<std::string> write_report_files(const ScenarioReport& report, const std::string& dir,
                                            bool json, bool csv);

/// Row of the `list` table: built-in scenarios with expected outcomes.
struct ScenarioInfo {
	std::string name;
	std::string base;
	std::string wind;
	std::string dilation;
	std::string curvature;   // expected deformed flag curvature
	std::string s_curvature; // expected deformed S-curvature
	std::string note;        // where the expectation comes from
};
std::vector<ScenarioInfo> scenario_table();

/// CSV dump of a deformed-metric geodesic (kind "geodesic") or of a geodesic
/// with an orthogonal Jacobi field along it (kind "jacobi"), integrated from
/// the region center over [0, t1].
std::string export_curve_csv(const ScenarioConfig& config, const std::string& kind, double t1,
                             int samples);

} // namespace finsler
