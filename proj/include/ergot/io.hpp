#pragma once

// Problem files (JSON) and report serialization.
//
// A problem file looks like
//
//   {
//     "version": 1,
//     "space": ["a0", "a1", "a2", "b0", "b1", "b2"],     // or a point count
//     "metric": [[...], ...],                              // and/or "cost"
//     "action": {"g": "(0 1 2)(3 4 5)"},                   // or "kernel": [[...]]
//     "marginals": {"mu": [...], "nu": {"weights": [0.25, 0.75]}},
//     "p": 1,
//     "restriction": "invariance",  // none | invariance | stationarity | {"subgroup": [[g, h], ...]}
//     "tolerance": {"verify": 1e-8}
//   }
//
// Permutations are cycle-notation strings or one-line arrays. Component
// weights are taken over the extreme points of the marginal simplex in their
// canonical order.

#include "ergot/ergot.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ergot::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Input error carrying the offending field path.
inline Error input_error(const std::string& path, const std::string& why) {
  return Error(ErrorKind::InvalidInput, path.empty() ? why : why + " at " + path);
}

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

struct Problem {
  int version = kFormatVersion;
  FiniteSpace space;
  std::optional<GroundMetric> metric;
  std::optional<CostMatrix> cost;
  std::optional<GroupAction> action;
  std::optional<StochKernel> kernel;
  std::optional<Measure> mu;
  std::optional<Measure> nu;
  double p = 1.0;
  std::string restriction_kind = "none";
  std::vector<std::pair<Permutation, Permutation>> subgroup_pairs;
  std::optional<double> verify_tol;
  /// Set when the stationarity restriction had to use the ergodic
  /// projection of a non-ergodic kernel.
  bool kernel_projected = false;

  SimplexSpec simplex() const {
    if (action) return SimplexSpec::invariant(*action);
    if (kernel) return SimplexSpec::stationary(*kernel);
    return SimplexSpec::full(space);
  }

  /// Cost used by solve/verify: the explicit cost, else metric^p.
  std::optional<CostMatrix> effective_cost() const {
    if (cost) return cost;
    if (metric) return powered_cost(*metric, p);
    return std::nullopt;
  }

  LinearRestriction restriction() {
    if (restriction_kind == "none") return unconstrained_restriction(space, space);
    if (restriction_kind == "invariance") {
      if (!action) throw input_error("restriction", "invariance restriction needs an action");
      return invariance_restriction(*action);
    }
    if (restriction_kind == "subgroup") {
      if (!action) throw input_error("restriction", "subgroup restriction needs an action");
      return subgroup_restriction(*action, subgroup_pairs);
    }
    if (!kernel) throw input_error("restriction", "stationarity restriction needs a kernel");
    if (check_ergodic_kernel(*kernel).ok) return stationarity_restriction(*kernel, *kernel);
    kernel_projected = true;
    const StochKernel erg = ergodic_projection_kernel(*kernel);
    return stationarity_restriction(erg, erg);
  }
};

namespace detail {

inline std::string type_name(const Json& j) { return j.type_name(); }

inline double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw input_error(path, "expected a number, got " + type_name(j));
  return j.get<double>();
}

inline Vector as_vector(const Json& j, const std::string& path, std::optional<std::size_t> len = std::nullopt) {
  if (!j.is_array()) throw input_error(path, "expected an array, got " + type_name(j));
  if (len && j.size() != *len)
    throw input_error(path, "expected " + std::to_string(*len) + " entries, got " + std::to_string(j.size()));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = as_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Matrix as_matrix(const Json& j, const std::string& path, std::size_t rows, std::size_t cols) {
  if (!j.is_array()) throw input_error(path, "expected an array of rows, got " + type_name(j));
  if (j.size() != rows)
    throw input_error(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    m.row(static_cast<Eigen::Index>(i)) = as_vector(j[i], path + "[" + std::to_string(i) + "]", cols).transpose();
  return m;
}

inline Permutation as_permutation(const Json& j, const std::string& path, std::size_t n, std::string label) {
  if (j.is_string()) {
    try {
      return parse_cycles(j.get<std::string>(), n, std::move(label));
    } catch (const Error& e) {
      throw input_error(path, e.what());
    }
  }
  if (!j.is_array()) throw input_error(path, "expected cycle notation or a one-line array, got " + type_name(j));
  if (j.size() != n) throw input_error(path, "one-line permutation needs " + std::to_string(n) + " entries");
  Permutation g{std::move(label), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_number_unsigned()) throw input_error(p, "expected a point index");
    g.image[i] = j[i].get<std::size_t>();
  }
  if (!g.is_bijection()) throw input_error(path, "not a bijection");
  return g;
}

inline Measure as_marginal(const Json& j, const std::string& path, const Problem& prob) {
  if (j.is_object()) {
    if (!j.contains("weights")) throw input_error(path, "component form needs a 'weights' array");
    const Boundary b = boundary(prob.simplex());
    const Vector w = as_vector(j["weights"], path + ".weights", b.extremes.size());
    Measure m{prob.space, Vector::Zero(static_cast<Eigen::Index>(prob.space.size()))};
    for (std::size_t a = 0; a < b.extremes.size(); ++a) m.w += w(static_cast<Eigen::Index>(a)) * b.extremes[a].w;
    if (auto v = validate(Measure{component_space(b.extremes.size()), w}); !v.empty())
      throw input_error(path + ".weights", v.front());
    return m;
  }
  Measure m{prob.space, as_vector(j, path, prob.space.size())};
  if (auto v = validate(m); !v.empty()) throw input_error(path, v.front());
  return m;
}

}  // namespace detail

inline Problem parse_problem(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorKind::InvalidInput,
                "JSON syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
  if (!doc.is_object()) throw input_error("", "problem file must be a JSON object");

  static const std::vector<std::string> known{"version", "space",       "metric", "cost",     "action", "kernel",
                                              "marginals", "p", "restriction", "tolerance", "comment"};
  for (const auto& [key, _] : doc.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw input_error(key, "unknown field");

  Problem prob;
  if (!doc.contains("version")) throw input_error("version", "missing field");
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kFormatVersion)
    throw input_error("version", "unsupported version (expected " + std::to_string(kFormatVersion) + ")");

  if (!doc.contains("space")) throw input_error("space", "missing field");
  const Json& sp = doc["space"];
  if (sp.is_number_unsigned()) {
    prob.space = FiniteSpace::indexed(sp.get<std::size_t>());
  } else if (sp.is_array()) {
    for (std::size_t i = 0; i < sp.size(); ++i) {
      if (!sp[i].is_string()) throw input_error("space[" + std::to_string(i) + "]", "expected a label string");
      prob.space.labels.push_back(sp[i].get<std::string>());
    }
  } else {
    throw input_error("space", "expected a label array or a point count");
  }
  if (auto v = validate(prob.space); !v.empty()) throw input_error("space", v.front());
  const std::size_t n = prob.space.size();

  if (doc.contains("metric")) {
    prob.metric = GroundMetric{prob.space, detail::as_matrix(doc["metric"], "metric", n, n)};
    if (auto v = validate(*prob.metric); !v.empty()) throw input_error("metric", v.front());
  }
  if (doc.contains("cost")) {
    prob.cost = CostMatrix{prob.space, prob.space, detail::as_matrix(doc["cost"], "cost", n, n)};
    if (auto v = validate(*prob.cost); !v.empty()) throw input_error("cost", v.front());
  }
  if (doc.contains("action") && doc.contains("kernel"))
    throw input_error("action", "give either an action or a kernel, not both");
  if (doc.contains("action")) {
    const Json& a = doc["action"];
    if (!a.is_object()) throw input_error("action", "expected an object of named permutations");
    GroupAction act{prob.space, {}};
    for (const auto& [name, perm] : a.items())
      act.generators.push_back(detail::as_permutation(perm, "action." + name, n, name));
    prob.action = std::move(act);
  }
  if (doc.contains("kernel")) {
    prob.kernel = StochKernel{prob.space, detail::as_matrix(doc["kernel"], "kernel", n, n)};
    if (auto v = validate(*prob.kernel); !v.empty()) throw input_error("kernel", v.front());
  }
  if (doc.contains("p")) {
    prob.p = detail::as_number(doc["p"], "p");
    if (!(prob.p >= 1.0)) throw input_error("p", "exponent must be >= 1");
  }
  if (doc.contains("restriction")) {
    const Json& r = doc["restriction"];
    if (r.is_string()) {
      prob.restriction_kind = r.get<std::string>();
      if (prob.restriction_kind != "none" && prob.restriction_kind != "invariance" &&
          prob.restriction_kind != "stationarity")
        throw input_error("restriction", "unknown restriction '" + prob.restriction_kind + "'");
    } else if (r.is_object() && r.contains("subgroup")) {
      prob.restriction_kind = "subgroup";
      const Json& pairs = r["subgroup"];
      if (!pairs.is_array()) throw input_error("restriction.subgroup", "expected an array of [g, h] pairs");
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string path = "restriction.subgroup[" + std::to_string(i) + "]";
        if (!pairs[i].is_array() || pairs[i].size() != 2) throw input_error(path, "expected a [g, h] pair");
        prob.subgroup_pairs.emplace_back(detail::as_permutation(pairs[i][0], path + "[0]", n, ""),
                                         detail::as_permutation(pairs[i][1], path + "[1]", n, ""));
        auto& [g, h] = prob.subgroup_pairs.back();
        g.label = format_cycles(g);
        h.label = format_cycles(h);
      }
    } else {
      throw input_error("restriction", "expected a restriction name or {\"subgroup\": [...]}");
    }
  }
  if (doc.contains("tolerance")) {
    const Json& t = doc["tolerance"];
    if (!t.is_object()) throw input_error("tolerance", "expected an object");
    for (const auto& [key, val] : t.items()) {
      if (key != "verify") throw input_error("tolerance." + key, "unknown tolerance");
      prob.verify_tol = detail::as_number(val, "tolerance.verify");
    }
  }
  if (doc.contains("marginals")) {
    const Json& m = doc["marginals"];
    if (!m.is_object()) throw input_error("marginals", "expected an object with 'mu' and 'nu'");
    for (const auto& [key, _] : m.items())
      if (key != "mu" && key != "nu") throw input_error("marginals." + key, "unknown marginal");
    if (m.contains("mu")) prob.mu = detail::as_marginal(m["mu"], "marginals.mu", prob);
    if (m.contains("nu")) prob.nu = detail::as_marginal(m["nu"], "marginals.nu", prob);
  }
  return prob;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// Serialization

/// +inf and NaN serialize as null.
inline Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(real(v(i)));
  return j;
}

inline Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json(Vector(m.row(i).transpose())));
  return j;
}

inline Json to_json(const TransportPlan& t) {
  return Json{{"rows", t.row_space.labels}, {"cols", t.col_space.labels}, {"p", to_json(t.p)}};
}

inline Json to_json(const CheckReport& r) {
  return Json{{"check", r.check}, {"passed", r.passed}, {"notes", r.notes}, {"failures", r.failures}};
}

inline Json to_json(const AxiomReport& r) {
  return Json{{"triples", r.triples},
              {"max_self_distance", real(r.max_self_distance)},
              {"max_asymmetry", real(r.max_asymmetry)},
              {"max_triangle_excess", real(r.max_triangle_excess)},
              {"min_separation", real(r.min_separation)},
              {"passed", r.passed},
              {"failures", r.failures}};
}

inline Json to_json(const ErgodicDecomposition& d, const FiniteSpace& space) {
  Json comps = Json::array();
  for (std::size_t a = 0; a < d.components.size(); ++a)
    comps.push_back(Json{{"class", d.component_class[a]},
                         {"weight", real(d.weights(static_cast<Eigen::Index>(a)))},
                         {"measure", to_json(d.components[a].w)}});
  Json classes = Json::object();
  for (std::size_t x = 0; x < space.size(); ++x)
    classes[space.labels[x]] = d.class_of[x] < 0 ? Json(nullptr) : Json(d.class_of[x]);
  return Json{{"components", comps}, {"class_map", classes}};
}

inline Json to_json(const DecompositionReport& r) {
  return Json{{"lhs", real(r.lhs)},
              {"rhs", real(r.rhs)},
              {"gap", real(r.gap)},
              {"lhs_status", to_string(r.lhs_status)},
              {"outer_status", to_string(r.outer_status)},
              {"row_classes", r.row_classes},
              {"col_classes", r.col_classes},
              {"mu_weights", to_json(r.mu_weights)},
              {"nu_weights", to_json(r.nu_weights)},
              {"inner_table", to_json(r.inner_table)},
              {"outer_plan", to_json(r.outer_plan.p)},
              {"plan_components", r.plan_components},
              {"qopt_slack", real(r.qopt_slack)},
              {"atoms_finer_than_rectangles", r.atoms_finer_than_rectangles}};
}

/// CSV of a matrix as (row, col, value) triples with a header line.
inline std::string matrix_csv(const Matrix& m, const std::vector<std::string>& rows,
                              const std::vector<std::string>& cols, const std::string& value_name) {
  std::string out = "row,col," + value_name + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out += rows[static_cast<std::size_t>(i)] + "," + cols[static_cast<std::size_t>(j)] + "," +
             (std::isfinite(m(i, j)) ? Json(m(i, j)).dump() : std::string("inf")) + "\n";
  return out;
}

}  // namespace ergot::io
