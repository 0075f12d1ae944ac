// homog: corrector tensors, single solves, ε-sweep studies and operator checks.
//
// Exit codes: 0 all checks pass, 1 runtime error, 2 rate check failed,
// 3 inconclusive.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "homog/checks.hpp"
#include "homog/study.hpp"

namespace {

using homog::json;

homog::StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw homog::Error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return homog::parse_config(ss.str());
}

template <int Dim>
int cmd_tensor(const homog::StudyConfig& c, int divisions) {
  const auto field = homog::make_coefficient<Dim>(c.coefficient);
  const auto corr = homog::solve_correctors(field, homog::unit_mesh<Dim>(divisions), c.cell_cg_tolerance);
  const auto t = homog::homogenized_tensor(field, corr);
  json rows = json::array();
  for (int i = 0; i < Dim; ++i) rows.push_back(std::vector<double>(t.matrix[i].begin(), t.matrix[i].end()));
  json out{{"tensor", rows},
           {"cell_divisions", divisions},
           {"coefficient", c.coefficient},
           {"ellipticity", {{"lower", t.ellipticity.lower}, {"upper", t.ellipticity.upper}}}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

template <int Dim>
int cmd_solve(const homog::StudyConfig& c, int periods, int m, const std::string& out_base) {
  homog::ProblemInstance<Dim> inst{homog::make_domain<Dim>(c.domain), homog::make_coefficient<Dim>(c.coefficient),
                                   homog::make_rhs<Dim>(c.rhs), c.bc, periods};
  homog::SolveInfo info;
  const auto u = homog::solve_fine(inst, m, c.cg_tolerance, &info);
  const auto dump = homog::make_dump("fine_eps_1_" + std::to_string(periods), u);
  const std::filesystem::path base(out_base);
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  homog::write_field(base, dump);
  std::cout << json{{"epsilon", 1.0 / periods},
                    {"points_per_period", m},
                    {"dofs", info.dofs},
                    {"iterations", info.iterations},
                    {"relative_residual", info.relative_residual},
                    {"output", base.string() + ".bin"}}
                   .dump(2)
            << '\n';
  return 0;
}

void print_study_summary(const homog::StudyResult& s) {
  std::cout << homog::ErrorReport::csv_header() << '\n';
  for (const auto& r : s.runs) std::cout << r.report.csv_row() << '\n';
  for (const auto& r : s.rates) {
    std::cout << r.name << ": " << r.status;
    if (r.fit) std::cout << " slope=" << r.fit->slope << " r2=" << r.fit->r_squared;
    std::cout << '\n';
  }
  if (s.richardson) std::cout << "richardson: " << (s.richardson->pass ? "pass" : "fail") << '\n';
  for (const auto& w : s.warnings) std::cout << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic homogenization: correctors, fine/homogenized solves and error-rate studies"};
  app.require_subcommand(1);

  std::string config_path;
  int cell_divisions = 0;
  auto* tensor = app.add_subcommand("tensor", "Print the homogenized tensor as JSON");
  tensor->add_option("--config", config_path, "Study config (JSON)")->required()->check(CLI::ExistingFile);
  tensor->add_option("--divisions", cell_divisions, "Cell mesh divisions (default: config cell_divisions)");

  std::string epsilon_text;
  int m = 0;
  std::string out_base = "solution";
  auto* solve = app.add_subcommand("solve", "Solve the oscillating problem at one ε and dump the field");
  solve->add_option("--config", config_path, "Study config (JSON)")->required()->check(CLI::ExistingFile);
  solve->add_option("--epsilon", epsilon_text, "ε as 1/N")->required();
  solve->add_option("--points-per-period", m, "Fine elements per period (default: config)");
  solve->add_option("--out", out_base, "Output path without extension");

  std::string out_dir;
  int workers = 0;
  auto* study = app.add_subcommand("study", "Run the ε sweep and write errors.csv, rates.json, study.json");
  study->add_option("--config", config_path, "Study config (JSON)")->required()->check(CLI::ExistingFile);
  study->add_option("--out", out_dir, "Output directory")->required();
  study->add_option("--workers", workers, "Worker threads (default: config)");

  homog::CheckParams params;
  auto* checks = app.add_subcommand("check-operators", "Run the unfolding operator residual checks");
  checks->add_option("--points-per-period", params.points_per_period, "Fine elements per ε-period");
  checks->add_option("--y-resolution", params.y_resolution, "Y-grid resolution for unfolding");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*tensor) {
      const auto c = load_config(config_path);
      const int d = cell_divisions > 0 ? cell_divisions : c.cell_divisions;
      return c.dim == 1 ? cmd_tensor<1>(c, d) : cmd_tensor<2>(c, d);
    }
    if (*solve) {
      const auto c = load_config(config_path);
      const int periods = homog::parse_periods(epsilon_text);
      const int mm = m > 0 ? m : c.points_per_period;
      return c.dim == 1 ? cmd_solve<1>(c, periods, mm, out_base) : cmd_solve<2>(c, periods, mm, out_base);
    }
    if (*study) {
      auto c = load_config(config_path);
      if (workers > 0) c.workers = workers;
      const auto result = homog::run_study(c);
      homog::write_study(result, out_dir);
      print_study_summary(result);
      return result.exit_code();
    }
    if (*checks) {
      const auto report = homog::run_operator_checks(params);
      std::cout << report.to_json().dump(2) << '\n';
      return report.pass() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
