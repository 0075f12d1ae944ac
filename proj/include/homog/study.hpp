#ifndef HOMOG_STUDY_HPP
#define HOMOG_STUDY_HPP

// ε-sweep orchestration: correctors and tensor once, then one independent
// job per ε (fine solve, reconstruction, error report), rate fits in fixed ε
// order, and CSV/JSON persistence.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "homog/cell.hpp"
#include "homog/config.hpp"
#include "homog/metrics.hpp"
#include "homog/solve.hpp"

namespace homog {

/// Errors below this measure solver noise and are left out of rate fits.
inline constexpr double below_tolerance = 1e-11;

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to slot i; the first failure by index is rethrown.
template <class F>
void parallel_for(std::size_t count, int workers, F&& fn) {
  std::vector<std::exception_ptr> errors(count);
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct EpsilonRun {
  int periods = 0;
  int points_per_period = 0;
  ErrorReport report;
  SolveInfo fine_info;
  SolveInfo homogenized_info;
  double seconds = 0.0;
};

struct FunctionalRate {
  std::string name;
  /// pass | fail | inconclusive | unchecked
  std::string status = "unchecked";
  std::optional<RateFit> fit;
  std::optional<RateExpectation> expected;
  int excluded_points = 0;
  /// Errors strictly decrease with ε across the fitted points.
  bool monotone = false;
};

struct RichardsonResult {
  int periods = 0;
  int points_per_period = 0;
  int refined_points_per_period = 0;
  double tolerance = 0.0;
  ErrorReport coarse;
  ErrorReport refined;
  std::map<std::string, double> relative_difference;
  bool pass = false;
};

struct FieldDump {
  std::string name;
  int dim = 0;
  std::vector<double> origin;
  std::vector<double> extent;
  std::vector<int> divisions;
  Shape shape = Shape::box;
  std::vector<double> values;
};

struct StudyResult {
  StudyConfig config;
  std::string config_hash;
  std::vector<std::vector<double>> tensor;
  Ellipticity ellipticity;
  std::vector<EpsilonRun> runs;
  std::vector<FunctionalRate> rates;
  std::optional<RichardsonResult> richardson;
  std::vector<std::string> warnings;
  std::vector<FieldDump> fields;
  double total_seconds = 0.0;

  /// 0 pass, 2 a rate or Richardson check failed, 3 inconclusive.
  int exit_code() const {
    bool inconclusive = false;
    for (const auto& r : rates) {
      if (r.status == "fail") return 2;
      if (r.status == "inconclusive") inconclusive = true;
    }
    if (richardson && !richardson->pass) return 2;
    return inconclusive ? 3 : 0;
  }

  const FunctionalRate& rate(const std::string& name) const {
    for (const auto& r : rates)
      if (r.name == name) return r;
    throw Error("no rate recorded for '" + name + "'");
  }
};

inline json report_json(const ErrorReport& r) {
  return json{{"epsilon", r.epsilon},       {"e_l2", r.e_l2},
              {"e_h1_corr", r.e_h1_corr},   {"e_weighted", r.e_weighted},
              {"e_interior", r.e_interior}, {"e_layer", r.e_layer},
              {"interior_margin", r.interior_margin}, {"interior_margin_ok", r.interior_margin_ok},
              {"max_rho", r.max_rho}};
}

inline json rate_json(const FunctionalRate& r) {
  json j{{"status", r.status}, {"excluded_points", r.excluded_points}, {"monotone", r.monotone}};
  if (r.fit) {
    j["slope"] = r.fit->slope;
    j["intercept"] = r.fit->intercept;
    j["r_squared"] = r.fit->r_squared;
    j["points"] = r.fit->points;
  }
  if (r.expected) j["expected"] = *r.expected;
  j["pass"] = r.status == "pass";
  return j;
}

/// Everything except runtimes; bitwise-reproducible for a given config.
inline json study_payload(const StudyResult& s) {
  json runs = json::array();
  for (const auto& r : s.runs)
    runs.push_back({{"periods", r.periods},
                    {"points_per_period", r.points_per_period},
                    {"report", report_json(r.report)},
                    {"fine_iterations", r.fine_info.iterations},
                    {"fine_residual", r.fine_info.relative_residual},
                    {"homogenized_iterations", r.homogenized_info.iterations},
                    {"dofs", r.fine_info.dofs}});
  json rates = json::object();
  for (const auto& r : s.rates) rates[r.name] = rate_json(r);
  json j{{"config", to_json_value(s.config)},
         {"config_hash", s.config_hash},
         {"tensor", s.tensor},
         {"ellipticity", {{"lower", s.ellipticity.lower}, {"upper", s.ellipticity.upper}}},
         {"runs", runs},
         {"rates", rates},
         {"warnings", s.warnings},
         {"tolerances", {{"cg", s.config.cg_tolerance}, {"cell_cg", s.config.cell_cg_tolerance}, {"below_tolerance", below_tolerance}}},
         {"exit_code", s.exit_code()}};
  if (s.richardson) {
    const auto& r = *s.richardson;
    j["richardson"] = {{"periods", r.periods},
                       {"points_per_period", r.points_per_period},
                       {"refined_points_per_period", r.refined_points_per_period},
                       {"tolerance", r.tolerance},
                       {"coarse", report_json(r.coarse)},
                       {"refined", report_json(r.refined)},
                       {"relative_difference", r.relative_difference},
                       {"pass", r.pass}};
  }
  return j;
}

inline json study_json(const StudyResult& s) {
  json j = study_payload(s);
  json times = json::array();
  for (const auto& r : s.runs) times.push_back(r.seconds);
  j["runtimes"] = {{"total_seconds", s.total_seconds}, {"per_epsilon_seconds", times}};
  return j;
}

/// Fits each functional over its above-tolerance points and compares with
/// the configured expectation.
inline std::vector<FunctionalRate> fit_rates(const std::vector<ErrorReport>& reports,
                                             const std::map<std::string, RateExpectation>& expected) {
  std::vector<FunctionalRate> out;
  for (const char* name : functional_names) {
    FunctionalRate r;
    r.name = name;
    std::vector<std::pair<double, double>> pts;
    for (const auto& rep : reports) {
      const double v = functional_value(rep, name);
      if (v >= below_tolerance) pts.emplace_back(rep.epsilon, v);
      else ++r.excluded_points;
    }
    if (auto it = expected.find(name); it != expected.end()) r.expected = it->second;
    if (pts.size() < 3) {
      r.status = r.expected ? "inconclusive" : "unchecked";
    } else {
      r.fit = fit_rate(pts);
      r.monotone = true;
      for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i].second < pts[i - 1].second)) r.monotone = false;
      if (r.expected) r.status = r.expected->check(r.fit->slope) ? "pass" : "fail";
    }
    out.push_back(std::move(r));
  }
  return out;
}

template <int Dim>
FieldDump make_dump(const std::string& name, const ScalarField<Dim>& f) {
  FieldDump d;
  d.name = name;
  d.dim = Dim;
  const auto& m = f.mesh();
  for (int k = 0; k < Dim; ++k) {
    d.origin.push_back(m.origin()[k]);
    d.extent.push_back(m.extent()[k]);
    d.divisions.push_back(m.divisions()[k]);
  }
  d.shape = m.shape();
  d.values = f.values();
  return d;
}

namespace detail {

template <int Dim>
Box<Dim> interior_box(const StudyConfig& c) {
  Box<Dim> b;
  for (int k = 0; k < Dim; ++k) {
    b.lower[k] = c.interior_lower[k];
    b.upper[k] = c.interior_upper[k];
  }
  return b;
}

template <int Dim>
StudyResult run_study_impl(const StudyConfig& config) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  StudyResult result;
  result.config = config;
  result.config_hash = config_hash(config);

  const auto field = make_coefficient<Dim>(config.coefficient);
  const auto rhs = make_rhs<Dim>(config.rhs);
  const auto domain = make_domain<Dim>(config.domain);
  const auto box = interior_box<Dim>(config);
  const double tol = config.cg_tolerance;
  const double cell_tol = config.cell_cg_tolerance;

  // Tensor from the configured cell resolution; correctors for the
  // reconstruction must match the fine mesh, one set per m in use.
  const auto tensor_correctors = solve_correctors(field, unit_mesh<Dim>(config.cell_divisions), cell_tol);
  const auto tensor = homogenized_tensor(field, tensor_correctors);
  result.ellipticity = tensor_correctors.ellipticity;
  for (int i = 0; i < Dim; ++i) result.tensor.emplace_back(tensor.matrix[i].begin(), tensor.matrix[i].end());

  std::map<int, CorrectorSet<Dim>> correctors;
  const auto correctors_for = [&](int m) {
    if (correctors.count(m)) return;
    correctors.emplace(m, m == config.cell_divisions ? tensor_correctors
                                                     : solve_correctors(field, unit_mesh<Dim>(m), cell_tol));
  };

  struct Job {
    int periods;
    int m;
  };
  std::vector<Job> jobs;
  for (int n : config.epsilons) jobs.push_back({n, config.points_per_period});
  if (config.richardson) jobs.push_back({config.richardson->epsilon, config.richardson->refined_points_per_period});
  for (const auto& j : jobs) correctors_for(j.m);

  // Φ depends only on the fine mesh, so jobs sharing divisions share Φ.
  std::vector<int> phi_keys;
  for (const auto& j : jobs) {
    const int d = j.periods * j.m;
    if (std::find(phi_keys.begin(), phi_keys.end(), d) == phi_keys.end()) phi_keys.push_back(d);
  }
  std::vector<std::optional<ScalarField<Dim>>> phi(phi_keys.size());
  std::vector<SolveInfo> phi_info(phi_keys.size());
  parallel_for(phi_keys.size(), config.workers, [&](std::size_t i) {
    try {
      const auto mesh = fine_mesh(domain, phi_keys[i], 1);
      phi[i] = solve_homogenized(tensor, rhs, config.bc, mesh, tol, &phi_info[i]);
    } catch (const std::exception& e) {
      throw Error("homogenized solve on " + std::to_string(phi_keys[i]) + " divisions: " + e.what());
    }
  });

  std::vector<EpsilonRun> runs(jobs.size());
  std::vector<std::optional<ScalarField<Dim>>> fine_fields(jobs.size());
  parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
    const auto t0 = clock::now();
    const auto& job = jobs[i];
    try {
      ProblemInstance<Dim> inst{domain, field, rhs, config.bc, job.periods};
      EpsilonRun run;
      run.periods = job.periods;
      run.points_per_period = job.m;
      auto fine = solve_fine(inst, job.m, tol, &run.fine_info);
      const auto k = static_cast<std::size_t>(
          std::find(phi_keys.begin(), phi_keys.end(), job.periods * job.m) - phi_keys.begin());
      run.homogenized_info = phi_info[k];
      const CellIndexMap<Dim> map(fine.mesh(), inst.epsilon());
      const auto recon = reconstruct(*phi[k], correctors.at(job.m), map);
      run.report = error_report(fine, recon, box);
      if (run.report.e_weighted > run.report.max_rho * run.report.e_h1_corr * (1.0 + 1e-12) + 1e-300)
        throw Error("norm consistency violated: e_weighted exceeds max ρ · e_h1_corr");
      if (config.dump_fields) fine_fields[i] = std::move(fine);
      run.seconds = std::chrono::duration<double>(clock::now() - t0).count();
      runs[i] = run;
    } catch (const std::exception& e) {
      throw Error("ε = 1/" + std::to_string(job.periods) + " (m = " + std::to_string(job.m) + "): " + e.what());
    }
  });

  const std::size_t main_count = config.epsilons.size();
  std::vector<ErrorReport> reports;
  for (std::size_t i = 0; i < main_count; ++i) {
    result.runs.push_back(runs[i]);
    reports.push_back(runs[i].report);
    if (!runs[i].report.interior_margin_ok)
      result.warnings.push_back("ε = 1/" + std::to_string(runs[i].periods) + ": interior box margin " +
                                format_number(runs[i].report.interior_margin) + " is below 4√n·ε");
  }
  result.rates = fit_rates(reports, config.expected_rates);

  if (config.richardson) {
    RichardsonResult r;
    r.periods = config.richardson->epsilon;
    r.points_per_period = config.points_per_period;
    r.refined_points_per_period = config.richardson->refined_points_per_period;
    r.tolerance = config.richardson->tolerance;
    r.refined = runs.back().report;
    for (std::size_t i = 0; i < main_count; ++i)
      if (runs[i].periods == r.periods) r.coarse = runs[i].report;
    r.pass = true;
    for (const char* name : functional_names) {
      const double a = functional_value(r.coarse, name);
      const double b = functional_value(r.refined, name);
      const double scale = std::max(std::abs(a), std::abs(b));
      // Two below-tolerance values agree trivially.
      const double diff = scale < below_tolerance ? 0.0 : std::abs(a - b) / scale;
      r.relative_difference[name] = diff;
      if (!(diff < r.tolerance)) r.pass = false;
    }
    result.richardson = r;
  }

  if (config.dump_fields) {
    for (std::size_t i = 0; i < main_count; ++i) {
      const std::string tag = "eps_1_" + std::to_string(jobs[i].periods);
      result.fields.push_back(make_dump("fine_" + tag, *fine_fields[i]));
      const auto k = static_cast<std::size_t>(
          std::find(phi_keys.begin(), phi_keys.end(), jobs[i].periods * jobs[i].m) - phi_keys.begin());
      result.fields.push_back(make_dump("homogenized_" + tag, *phi[k]));
    }
  }
  result.total_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return result;
}

}  // namespace detail

inline StudyResult run_study(const StudyConfig& config) {
  validate(config);
  return config.dim == 1 ? detail::run_study_impl<1>(config) : detail::run_study_impl<2>(config);
}

// ----------------------------------------------------------------------------
//                                Persistence
// ----------------------------------------------------------------------------

inline json field_sidecar(const FieldDump& d) {
  return json{{"name", d.name},
              {"dim", d.dim},
              {"shape", to_string(d.shape)},
              {"origin", d.origin},
              {"extent", d.extent},
              {"divisions", d.divisions},
              {"count", d.values.size()},
              {"dtype", "float64"},
              {"endianness", "little"},
              {"ordering", "lexicographic nodes, first axis fastest; inactive nodes hold 0"}};
}

/// Raw float64 values at `base`.bin plus a `base`.json sidecar.
inline void write_field(const std::filesystem::path& base, const FieldDump& d) {
  static_assert(sizeof(double) == 8);
  const std::uint16_t probe = 1;
  if (*reinterpret_cast<const unsigned char*>(&probe) != 1)
    throw Error("field dumps are written on little-endian hosts only");
  auto bin = base;
  bin += ".bin";
  std::ofstream out(bin, std::ios::binary);
  out.write(reinterpret_cast<const char*>(d.values.data()),
            static_cast<std::streamsize>(d.values.size() * sizeof(double)));
  if (!out) throw Error("cannot write " + bin.string());
  auto side = base;
  side += ".json";
  std::ofstream js(side);
  js << field_sidecar(d).dump(2) << '\n';
  if (!js) throw Error("cannot write " + side.string());
}

inline void write_study(const StudyResult& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "errors.csv");
    csv << ErrorReport::csv_header() << '\n';
    for (const auto& r : s.runs) csv << r.report.csv_row() << '\n';
    if (!csv) throw Error("cannot write errors.csv");
  }
  {
    json rates = json::object();
    for (const auto& r : s.rates) rates[r.name] = rate_json(r);
    std::ofstream out(dir / "rates.json");
    out << rates.dump(2) << '\n';
    if (!out) throw Error("cannot write rates.json");
  }
  {
    std::ofstream out(dir / "study.json");
    out << study_json(s).dump(2) << '\n';
    if (!out) throw Error("cannot write study.json");
  }
  if (!s.fields.empty()) {
    std::filesystem::create_directories(dir / "fields");
    for (const auto& f : s.fields) write_field(dir / "fields" / f.name, f);
  }
}

}  // namespace homog

#endif  // HOMOG_STUDY_HPP
