#ifndef HOMOG_CONFIG_HPP
#define HOMOG_CONFIG_HPP

// Study configuration: JSON schema, validation and conversion to the typed
// problem objects. Axes in JSON are 1-based (axis 1 is x₁).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homog/coeff.hpp"
#include "homog/metrics.hpp"
#include "homog/solve.hpp"

namespace homog {

using json = nlohmann::json;

struct CoefficientSpec {
  std::string kind = "scalar_cosine";
  int axis = 1;
  double alpha = 1.0;
  double beta = 1.0;
  double fraction = 0.5;
  double a0 = 2.0;
  double a1 = 1.0;
  /// constant: n×n rows.
  std::vector<std::vector<double>> matrix;
  /// grid_table: k and k^n matrices, first axis fastest.
  int k = 1;
  std::vector<std::vector<std::vector<double>>> cells;

  bool operator==(const CoefficientSpec&) const = default;
};

struct RhsSpec {
  /// constant_one | sine_product | cosine_product | table
  std::string name = "constant_one";
  /// table: nodal values on a uniform grid with `divisions` elements per axis
  /// over the domain's bounding box, lexicographic (first axis fastest).
  int divisions = 0;
  std::vector<double> values;

  bool operator==(const RhsSpec&) const = default;
};

/// Either |slope − target| ≤ tolerance, or slope ∈ [min, max].
struct RateExpectation {
  std::optional<double> target;
  double tolerance = 0.0;
  std::optional<double> min;
  std::optional<double> max;

  bool check(double slope) const {
    if (target) return std::abs(slope - *target) <= tolerance;
    return slope >= min.value_or(-std::numeric_limits<double>::infinity()) && slope <= max.value_or(std::numeric_limits<double>::infinity());
  }

  bool operator==(const RateExpectation&) const = default;
};

struct RichardsonSpec {
  int epsilon = 16;
  int refined_points_per_period = 64;
  double tolerance = 0.15;

  bool operator==(const RichardsonSpec&) const = default;
};

struct StudyConfig {
  int dim = 2;
  Shape domain = Shape::box;
  CoefficientSpec coefficient;
  BoundaryKind bc = BoundaryKind::dirichlet_full;
  RhsSpec rhs;
  /// ε = 1/N for each N, N strictly increasing.
  std::vector<int> epsilons{4, 8, 16, 32};
  int points_per_period = 16;
  int cell_divisions = 64;
  std::vector<double> interior_lower{0.25, 0.25};
  std::vector<double> interior_upper{0.75, 0.75};
  std::map<std::string, RateExpectation> expected_rates;
  std::optional<RichardsonSpec> richardson;
  long long max_fine_nodes = 4'500'000;
  int workers = 1;
  double cg_tolerance = 1e-10;
  /// Corrector solves; fine 1D cell meshes cannot reach 1e-10 in double.
  double cell_cg_tolerance = 1e-10;
  bool dump_fields = false;

  bool operator==(const StudyConfig&) const = default;
};

/// Targets from the regularity of the domain: convex ⇒ s = 1; l_shape gets
/// interval checks because s ∈ (1/2, 1) is not known a priori.
inline std::map<std::string, RateExpectation> default_expected_rates(int dim, Shape shape) {
  std::map<std::string, RateExpectation> r;
  if (dim == 1) {
    for (const char* name : functional_names) r[name] = RateExpectation{1.0, 0.1, {}, {}};
    r["e_h1_corr"] = RateExpectation{1.0, 0.15, {}, {}};
    r["e_layer"] = RateExpectation{0.5, 0.1, {}, {}};
    return r;
  }
  if (shape == Shape::l_shape) {
    r["e_l2"] = RateExpectation{{}, 0.0, 0.5, 1.05};
    r["e_h1_corr"] = RateExpectation{{}, 0.0, 0.25, 0.6};
    return r;
  }
  r["e_l2"] = RateExpectation{1.0, 0.25, {}, {}};
  r["e_weighted"] = RateExpectation{1.0, 0.25, {}, {}};
  r["e_interior"] = RateExpectation{1.0, 0.25, {}, {}};
  r["e_h1_corr"] = RateExpectation{0.5, 0.2, {}, {}};
  r["e_layer"] = RateExpectation{0.5, 0.2, {}, {}};
  return r;
}

// ----------------------------------------------------------------------------
//                                JSON mapping
// ----------------------------------------------------------------------------

inline void to_json(json& j, const CoefficientSpec& c) {
  j = json{{"kind", c.kind}};
  if (c.kind == "constant") {
    j["matrix"] = c.matrix;
  } else if (c.kind == "laminate") {
    j["axis"] = c.axis;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["fraction"] = c.fraction;
  } else if (c.kind == "checkerboard") {
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
  } else if (c.kind == "scalar_cosine") {
    j["a0"] = c.a0;
    j["a1"] = c.a1;
    j["axis"] = c.axis;
  } else if (c.kind == "grid_table") {
    j["k"] = c.k;
    j["cells"] = c.cells;
  }
}

inline void from_json(const json& j, CoefficientSpec& c) {
  c = CoefficientSpec{};
  c.kind = j.at("kind").get<std::string>();
  if (c.kind == "constant") {
    c.matrix = j.at("matrix").get<std::vector<std::vector<double>>>();
  } else if (c.kind == "laminate") {
    c.axis = j.value("axis", 1);
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.fraction = j.value("fraction", 0.5);
  } else if (c.kind == "checkerboard") {
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
  } else if (c.kind == "scalar_cosine") {
    c.a0 = j.value("a0", 2.0);
    c.a1 = j.value("a1", 1.0);
    c.axis = j.value("axis", 1);
  } else if (c.kind == "grid_table") {
    c.k = j.at("k").get<int>();
    c.cells = j.at("cells").get<std::vector<std::vector<std::vector<double>>>>();
  } else {
    throw Error("unknown coefficient kind '" + c.kind + "'");
  }
}

inline void to_json(json& j, const RhsSpec& r) {
  if (r.name != "table") {
    j = r.name;
    return;
  }
  j = json{{"name", r.name}, {"divisions", r.divisions}, {"values", r.values}};
}

inline void from_json(const json& j, RhsSpec& r) {
  r = RhsSpec{};
  if (j.is_string()) {
    r.name = j.get<std::string>();
  } else {
    r.name = j.at("name").get<std::string>();
    if (r.name == "table") {
      r.divisions = j.at("divisions").get<int>();
      r.values = j.at("values").get<std::vector<double>>();
    }
  }
}

inline void to_json(json& j, const RateExpectation& e) {
  j = json::object();
  if (e.target) {
    j["target"] = *e.target;
    j["tolerance"] = e.tolerance;
  }
  if (e.min) j["min"] = *e.min;
  if (e.max) j["max"] = *e.max;
}

inline void from_json(const json& j, RateExpectation& e) {
  e = RateExpectation{};
  if (j.contains("target")) {
    e.target = j.at("target").get<double>();
    e.tolerance = j.at("tolerance").get<double>();
  }
  if (j.contains("min")) e.min = j.at("min").get<double>();
  if (j.contains("max")) e.max = j.at("max").get<double>();
  if (!e.target && !e.min && !e.max) throw Error("rate expectation needs target/tolerance or min/max");
}

inline void to_json(json& j, const RichardsonSpec& r) {
  j = json{{"epsilon", r.epsilon},
           {"refined_points_per_period", r.refined_points_per_period},
           {"tolerance", r.tolerance}};
}

inline void from_json(const json& j, RichardsonSpec& r) {
  r = RichardsonSpec{};
  r.epsilon = j.at("epsilon").get<int>();
  r.refined_points_per_period = j.at("refined_points_per_period").get<int>();
  r.tolerance = j.value("tolerance", 0.15);
}

inline json to_json_value(const StudyConfig& c) {
  json j{{"dim", c.dim},
         {"domain", to_string(c.domain)},
         {"coefficient", c.coefficient},
         {"bc", to_string(c.bc)},
         {"rhs", c.rhs},
         {"epsilons", c.epsilons},
         {"points_per_period", c.points_per_period},
         {"cell_divisions", c.cell_divisions},
         {"interior_box", {{"lower", c.interior_lower}, {"upper", c.interior_upper}}},
         {"expected_rates", c.expected_rates},
         {"max_fine_nodes", c.max_fine_nodes},
         {"workers", c.workers},
         {"cg_tolerance", c.cg_tolerance},
         {"cell_cg_tolerance", c.cell_cg_tolerance},
         {"dump_fields", c.dump_fields}};
  if (c.richardson) j["richardson"] = *c.richardson;
  return j;
}

inline void validate(const StudyConfig& c);

/// Missing optional keys take the defaults above; expected_rates defaults to
/// the domain-derived targets.
inline StudyConfig parse_config(const json& j) {
  static const std::vector<std::string> known{
      "dim", "domain", "coefficient", "bc", "rhs", "epsilons", "points_per_period", "cell_divisions",
      "interior_box", "expected_rates", "richardson", "max_fine_nodes", "workers", "cg_tolerance",
      "cell_cg_tolerance",       "dump_fields"};
  if (!j.is_object()) throw Error("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error("unknown config key '" + key + "'");
  StudyConfig c;
  try {
    c.dim = j.at("dim").get<int>();
    c.domain = shape_from_string(j.value("domain", std::string("box")));
    c.coefficient = j.at("coefficient").get<CoefficientSpec>();
    c.bc = boundary_from_string(j.value("bc", std::string("dirichlet_full")));
    if (j.contains("rhs")) c.rhs = j.at("rhs").get<RhsSpec>();
    c.epsilons = j.at("epsilons").get<std::vector<int>>();
    c.points_per_period = j.value("points_per_period", 16);
    c.cell_divisions = j.value("cell_divisions", 64);
    if (j.contains("interior_box")) {
      c.interior_lower = j.at("interior_box").at("lower").get<std::vector<double>>();
      c.interior_upper = j.at("interior_box").at("upper").get<std::vector<double>>();
    } else {
      c.interior_lower.assign(static_cast<std::size_t>(c.dim), 0.25);
      c.interior_upper.assign(static_cast<std::size_t>(c.dim), 0.75);
    }
    c.expected_rates = j.contains("expected_rates")
                           ? j.at("expected_rates").get<std::map<std::string, RateExpectation>>()
                           : default_expected_rates(c.dim, c.domain);
    if (j.contains("richardson")) c.richardson = j.at("richardson").get<RichardsonSpec>();
    c.max_fine_nodes = j.value("max_fine_nodes", c.max_fine_nodes);
    c.workers = j.value("workers", 1);
    c.cg_tolerance = j.value("cg_tolerance", 1e-10);
    c.cell_cg_tolerance = j.value("cell_cg_tolerance", 1e-10);
    c.dump_fields = j.value("dump_fields", false);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  validate(c);
  return c;
}

inline StudyConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// N from "1/N", "N" or a decimal equal to 1/N.
inline int parse_periods(const std::string& text) {
  int n = 0;
  try {
    std::size_t used = 0;
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
      if (text.substr(0, slash) != "1") throw Error("epsilon must be written 1/N");
      n = std::stoi(text.substr(slash + 1), &used);
      used += slash + 1;
    } else if (text.find('.') == std::string::npos) {
      n = std::stoi(text, &used);
    } else {
      const double eps = std::stod(text, &used);
      const double inv = 1.0 / eps;
      if (!(eps > 0.0) || std::abs(inv - std::round(inv)) > 1e-9)
        throw AlignmentError("epsilon " + text + " is not of the form 1/N");
      n = static_cast<int>(std::lround(inv));
    }
    if (used != text.size()) throw Error("trailing characters in epsilon '" + text + "'");
  } catch (const std::logic_error&) {
    throw Error("cannot parse epsilon '" + text + "'");
  }
  if (n < 1) throw Error("epsilon must be 1/N with N ≥ 1");
  return n;
}

/// 64-bit FNV-1a of the canonical serialization.
inline std::string config_hash(const StudyConfig& c) {
  const std::string s = to_json_value(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

// ----------------------------------------------------------------------------
//                           Conversion and checks
// ----------------------------------------------------------------------------

template <int Dim>
Mat<Dim> matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.size() != static_cast<std::size_t>(Dim)) throw Error("matrix must have n rows");
  Mat<Dim> m{};
  for (int i = 0; i < Dim; ++i) {
    if (rows[i].size() != static_cast<std::size_t>(Dim)) throw Error("matrix must have n columns");
    for (int j = 0; j < Dim; ++j) m[i][j] = rows[i][j];
  }
  return m;
}

template <int Dim>
CoefficientField<Dim> make_coefficient(const CoefficientSpec& s) {
  const auto axis = [&] {
    if (s.axis < 1 || s.axis > Dim) throw Error("coefficient axis must lie in 1.." + std::to_string(Dim));
    return s.axis - 1;
  };
  if (s.kind == "constant") return CoefficientField<Dim>::constant(matrix_from_rows<Dim>(s.matrix));
  if (s.kind == "laminate") return CoefficientField<Dim>::laminate(axis(), s.alpha, s.beta, s.fraction);
  if (s.kind == "checkerboard") return CoefficientField<Dim>::checkerboard(s.alpha, s.beta);
  if (s.kind == "scalar_cosine") return CoefficientField<Dim>::scalar_cosine(s.a0, s.a1, axis());
  if (s.kind == "grid_table") {
    std::vector<Mat<Dim>> cells;
    for (const auto& m : s.cells) cells.push_back(matrix_from_rows<Dim>(m));
    return CoefficientField<Dim>::grid_table(s.k, std::move(cells));
  }
  throw Error("unknown coefficient kind '" + s.kind + "'");
}

template <int Dim>
Domain<Dim> make_domain(Shape shape) {
  Domain<Dim> d;
  d.shape = shape;
  return d;
}

template <int Dim>
Source<Dim> make_rhs(const RhsSpec& r) {
  using Fn = std::function<double(const Vec<Dim>&)>;
  if (r.name == "constant_one") return Fn([](const Vec<Dim>&) { return 1.0; });
  if (r.name == "sine_product")
    return Fn([](const Vec<Dim>& x) {
      double v = 1.0;
      for (int k = 0; k < Dim; ++k) v *= std::sin(std::numbers::pi * x[k]);
      return v;
    });
  if (r.name == "cosine_product")
    return Fn([](const Vec<Dim>& x) {
      double v = 1.0;
      for (int k = 0; k < Dim; ++k) v *= std::cos(std::numbers::pi * x[k]);
      return v;
    });
  if (r.name == "table") {
    if (r.divisions < 1) throw Error("rhs table needs positive divisions");
    auto mesh = unit_mesh<Dim>(r.divisions);
    if (r.values.size() != mesh.node_count())
      throw Error("rhs table needs (divisions+1)^n values, got " + std::to_string(r.values.size()));
    return ScalarField<Dim>(mesh, r.values);
  }
  throw Error("unknown rhs '" + r.name + "'");
}

inline void validate(const StudyConfig& c) {
  if (c.dim != 1 && c.dim != 2) throw Error("dim must be 1 or 2");
  if (c.domain == Shape::l_shape && c.dim != 2) throw Error("l_shape domain requires dim 2");
  if (c.epsilons.size() < 3) throw Error("at least 3 epsilons are needed for rate fitting");
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    if (c.epsilons[i] < 1) throw Error("epsilons are given as positive integers N (ε = 1/N)");
    if (i > 0 && c.epsilons[i] <= c.epsilons[i - 1]) throw Error("epsilons must be strictly decreasing");
    if (c.domain == Shape::l_shape && c.epsilons[i] % 2 != 0)
      throw AlignmentError("l_shape needs even N so the reentrant corner is ε-aligned");
  }
  if (c.points_per_period < 4) throw Error("points_per_period must be at least 4");
  if (c.cell_divisions < 1) throw Error("cell_divisions must be positive");
  if (c.workers < 1) throw Error("workers must be positive");
  if (!(c.cg_tolerance > 0.0 && c.cg_tolerance < 1.0)) throw Error("cg_tolerance must lie in (0, 1)");
  if (!(c.cell_cg_tolerance > 0.0 && c.cell_cg_tolerance < 1.0))
    throw Error("cell_cg_tolerance must lie in (0, 1)");
  if (c.interior_lower.size() != static_cast<std::size_t>(c.dim) ||
      c.interior_upper.size() != static_cast<std::size_t>(c.dim))
    throw Error("interior_box corners must have dim entries");
  for (int k = 0; k < c.dim; ++k)
    if (!(c.interior_lower[k] < c.interior_upper[k])) throw Error("interior_box is empty");
  for (const auto& [name, _] : c.expected_rates) functional_value(ErrorReport{}, name);
  if (c.richardson) {
    if (std::find(c.epsilons.begin(), c.epsilons.end(), c.richardson->epsilon) == c.epsilons.end())
      throw Error("richardson epsilon must be one of the study epsilons");
    if (c.richardson->refined_points_per_period <= c.points_per_period)
      throw Error("richardson refined_points_per_period must exceed points_per_period");
  }
  const auto nodes = [&](long long per_axis) {
    long long n = 1;
    for (int k = 0; k < c.dim; ++k) n *= per_axis + 1;
    return n;
  };
  long long largest = nodes(static_cast<long long>(c.epsilons.back()) * c.points_per_period);
  if (c.richardson)
    largest = std::max(largest, nodes(static_cast<long long>(c.richardson->epsilon) *
                                      c.richardson->refined_points_per_period));
  if (largest > c.max_fine_nodes)
    throw Error("finest mesh has " + std::to_string(largest) + " nodes, above max_fine_nodes = " +
                std::to_string(c.max_fine_nodes));
  if (c.bc == BoundaryKind::neumann_full && c.rhs.name == "constant_one")
    throw Error("neumann_full requires a zero-mean rhs");
  if (c.dim == 1) {
    validate_ellipticity(make_coefficient<1>(c.coefficient));
    make_rhs<1>(c.rhs);
  } else {
    validate_ellipticity(make_coefficient<2>(c.coefficient));
    make_rhs<2>(c.rhs);
  }
}

}  // namespace homog

#endif  // HOMOG_CONFIG_HPP
