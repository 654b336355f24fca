#include "finsler/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

int cmd_verify(const std::string& target, const finsler::RunOptions& opt, const std::string& outdir,
               bool json, bool csv) {
	const finsler::ScenarioConfig cfg = finsler::load_scenario(target);
	const finsler::ScenarioReport report = finsler::run_scenario(cfg, opt);

	for (const auto& s : report.suites) {
		std::cout << (s.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(14) << s.suite
		          << " max residual " << std::scientific << std::setprecision(3) << s.max_residual
		          << " (tolerance " << s.tolerance << ", " << s.n_samples << " samples)";
		if (!s.note.empty()) std::cout << "  [" << s.note << "]";
		std::cout << "\n";
	}
	std::cout << (report.pass ? "PASS" : "FAIL") << "  " << report.scenario
	          << "  (dilation c = " << std::defaultfloat << std::setprecision(9)
	          << report.measured_dilation + 0.0 << ")\n";

	for (const auto& path : finsler::write_report_files(report, outdir, json, csv))
		std::cout << "wrote " << path << "\n";
	return report.pass ? 0 : 1;
}

int cmd_list() {
	std::cout << std::left << std::setw(17) << "scenario" << std::setw(31) << "base metric"
	          << std::setw(24) << "wind" << std::setw(9) << "c" << std::setw(11) << "curvature"
	          << "S-curvature\n";
	for (const auto& row : finsler::scenario_table()) {
		std::cout << std::left << std::setw(17) << row.name << std::setw(31) << row.base
		          << std::setw(24) << row.wind << std::setw(9) << row.dilation << std::setw(11)
		          << row.curvature << row.s_curvature << "\n"
		          << std::setw(17) << "" << row.note << "\n";
	}
	std::cout << "\nsuites (canonical order): ";
	const auto& names = finsler::canonical_suites();
	for (std::size_t i = 0; i < names.size(); ++i)
		std::cout << names[i] << (i + 1 < names.size() ? ", " : "\n");
	return 0;
}

int cmd_export(const std::string& target, const std::string& kind, double t1, int samples,
               const std::string& out) {
	const finsler::ScenarioConfig cfg = finsler::load_scenario(target);
	const std::string csv = finsler::export_curve_csv(cfg, kind, t1, samples);
	if (out.empty() || out == "-") {
		std::cout << csv;
	} else {
		std::ofstream f(out, std::ios::binary);
		if (!f) throw finsler::ConfigError("cannot write '" + out + "'");
		f << csv;
		std::cout << "wrote " << out << "\n";
	}
	return 0;
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"Zermelo navigation verifier: checks the homothetic-wind correspondences "
	             "between a Finsler metric and its navigation deformation"};
	app.require_subcommand(1);

	// verify
	std::string target = "funk-disk";
	finsler::RunOptions opt;
	std::string outdir = "out";
	bool json = false, csv = false;
	long long seed = -1;
	auto* verify = app.add_subcommand("verify", "run verification suites for a scenario");
	verify->add_option("scenario", target, "built-in scenario name or config file path");
	verify->add_option("--suite", opt.suites, "suite subset to run (repeatable)");
	verify->add_option("--seed", seed, "override the scenario seed");
	verify->add_option("--jobs", opt.jobs, "max suites in flight")->check(CLI::Range(1, 64));
	verify->add_option("--out", outdir, "output directory (default: out)");
	verify->add_flag("--json", json, "write report.json only");
	verify->add_flag("--csv", csv, "write per-suite CSV files only");

	// list
	auto* list = app.add_subcommand("list", "show built-in scenarios and expected outcomes");

	// export-curve
	std::string kind = "geodesic", curve_out;
	double t1 = 0.4;
	int samples = 81;
	auto* exp = app.add_subcommand("export-curve", "dump a deformed geodesic or Jacobi field as CSV");
	exp->add_option("scenario", target, "built-in scenario name or config file path");
	exp->add_option("--kind", kind, "geodesic | jacobi");
	exp->add_option("--t1", t1, "integration span [0, t1]");
	exp->add_option("--samples", samples, "number of CSV rows");
	exp->add_option("--out", curve_out, "output file ('-' for stdout)");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		return app.exit(e) == 0 ? 0 : 2;
	}

	try {
		if (seed >= 0) opt.seed = static_cast<std::uint64_t>(seed);
		if (verify->parsed()) return cmd_verify(target, opt, outdir, json, csv);
		if (list->parsed()) return cmd_list();
		if (exp->parsed()) return cmd_export(target, kind, t1, samples, curve_out);
	} catch (const finsler::ConfigError& e) {
		std::cerr << "config error: " << e.what() << "\n";
		return 2;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 0;
}
