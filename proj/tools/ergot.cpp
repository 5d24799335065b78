// ergot command-line tool: solve, decompose, verify, metric, check.

#include "ergot/io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

using namespace ergot;
using io::Json;
using io::real;
using io::to_json;

constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kInputError = 1, kMathFailure = 2, kInternal = 3 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch:
    case ErrorKind::InvalidInput:
    case ErrorKind::ProjectionNotFull:
    case ErrorKind::MissingProductStructure:
      return kInputError;
    case ErrorKind::NotInSimplex:
    case ErrorKind::TransientMass:
    case ErrorKind::NotFeasible:
    case ErrorKind::NotGeometric:
    case ErrorKind::MarginalMismatch:
      return kMathFailure;
    default:
      return kInternal;
  }
}

struct Options {
  std::string file;
  std::string out;
  std::string format = "json";
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::optional<double> p;
  std::string random;
  std::vector<std::string> checks;
  std::size_t samples = 20;
};

/// --tol, else the file's tolerance block, else ERGOT_TOL, else the default.
double resolve_tol(const Options& o, const std::optional<double>& file_tol) {
  if (o.tol) return *o.tol;
  if (file_tol) return *file_tol;
  if (const char* env = std::getenv("ERGOT_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v >= 0.0))
      throw Error(ErrorKind::InvalidInput, std::string("ERGOT_TOL is not a non-negative number: '") + env + "'");
    return v;
  }
  return kTheoremTol;
}

struct Context {
  std::string command;
  Options opt;
  std::string input_bytes;

  std::string digest() const {
    std::string key = command + "\n" + input_bytes + "\n";
    if (opt.p) key += "p=" + Json(*opt.p).dump() + "\n";
    if (opt.tol) key += "tol=" + Json(*opt.tol).dump() + "\n";
    if (opt.seed) key += "seed=" + std::to_string(*opt.seed) + "\n";
    if (!opt.random.empty()) key += "random=" + opt.random + "\n";
    for (const auto& c : opt.checks) key += "check=" + c + "\n";
    key += "samples=" + std::to_string(opt.samples) + "\n";
    return io::fnv1a_hex(key);
  }
};

void emit(const std::string& text, const Options& o) {
  if (o.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidInput, "cannot write '" + o.out + "'");
  f << text;
}

void emit_report(const Context& ctx, Json results) {
  Json doc{{"command", ctx.command},
           {"version", kToolVersion},
           {"inputs_digest", ctx.digest()},
           {"results", std::move(results)}};
  emit(doc.dump(2) + "\n", ctx.opt);
}

void require_json_format(const Context& ctx) {
  if (ctx.opt.format != "json")
    throw Error(ErrorKind::InvalidInput, "--format csv is only available for solve and metric");
}

io::Problem load(Context& ctx) {
  if (ctx.opt.file.empty()) throw Error(ErrorKind::InvalidInput, "no problem file given");
  ctx.input_bytes = io::read_file(ctx.opt.file);
  io::Problem prob = io::parse_problem(ctx.input_bytes);
  if (ctx.opt.p) {
    if (!(*ctx.opt.p >= 1.0)) throw Error(ErrorKind::InvalidInput, "--p must be >= 1");
    prob.p = *ctx.opt.p;
  }
  return prob;
}

const Measure& need(const std::optional<Measure>& m, const char* name) {
  if (!m) throw io::input_error(std::string("marginals.") + name, "missing field");
  return *m;
}

CostMatrix need_cost(const io::Problem& prob) {
  auto c = prob.effective_cost();
  if (!c) throw io::input_error("cost", "problem needs a cost or a metric");
  return *c;
}

const GroundMetric& need_metric(const io::Problem& prob) {
  if (!prob.metric) throw io::input_error("metric", "missing field");
  return *prob.metric;
}

Json restriction_json(const io::Problem& prob, const LinearRestriction& r) {
  Json labels = Json::array();
  for (const auto& c : r.omega.omegas) labels.push_back(c.label);
  Json j{{"kind", prob.restriction_kind}, {"constraints", r.omega.size()}, {"labels", labels}};
  if (prob.kernel_projected) j["note"] = "kernel is not ergodic; its ergodic projection was used";
  return j;
}

/// Boundary points plus the file's marginals, used as check samples.
std::vector<Measure> sample_members(const io::Problem& prob, std::size_t extra, std::uint64_t seed) {
  const Boundary b = boundary(prob.simplex());
  std::vector<Measure> out = b.extremes;
  if (prob.mu) out.push_back(*prob.mu);
  if (prob.nu) out.push_back(*prob.nu);
  Rng rng(seed);
  for (std::size_t i = 0; i < extra; ++i) out.push_back(random_member(b, rng, 0.2));
  return out;
}

// ---------------------------------------------------------------------------

int cmd_solve(Context& ctx) {
  io::Problem prob = load(ctx);
  const Measure& mu = need(prob.mu, "mu");
  const Measure& nu = need(prob.nu, "nu");
  const CostMatrix cost = need_cost(prob);
  const LinearRestriction r = prob.restriction();
  const OtResult res = solve_constrained_ot(mu, nu, cost, r);
  const bool ok = res.status == OtStatus::Optimal;

  if (ctx.opt.format == "csv") {
    if (!ok) {
      std::cerr << "ergot: no restricted plan exists (Infeasible)\n";
      return kMathFailure;
    }
    emit(io::matrix_csv(res.plan.p, prob.space.labels, prob.space.labels, "mass"), ctx.opt);
    return kOk;
  }
  Json results{{"status", to_string(res.status)}, {"value", real(res.value)}};
  if (!prob.cost && prob.metric) {
    results["p"] = prob.p;
    results["distance"] = real(ok ? root_of(res.value, prob.p) : kInfinity);
  }
  results["plan"] = ok ? to_json(res.plan) : Json(nullptr);
  results["max_constraint_violation"] = ok ? real(max_violation(r.omega, res.plan.p)) : Json(nullptr);
  results["restriction"] = restriction_json(prob, r);
  emit_report(ctx, std::move(results));
  return ok ? kOk : kMathFailure;
}

Json measure_report(const Measure& m, const SimplexSpec& spec) {
  const ErgodicDecomposition dec = decompose_measure(m, spec);
  Json j = to_json(dec, m.space);
  const Measure back = barycenter(dec);
  const double err = (back.w - m.w).cwiseAbs().maxCoeff();
  j["barycenter_error"] = real(err);
  j["round_trip"] = err <= kMassTol;
  return j;
}

int cmd_decompose(Context& ctx) {
  require_json_format(ctx);
  io::Problem prob = load(ctx);
  const SimplexSpec spec = prob.simplex();
  if (!prob.mu && !prob.nu) throw io::input_error("marginals", "nothing to decompose");

  Json results = Json::object();
  results["simplex"] = spec.name();
  if (prob.kernel) {
    const StationaryDecomposition sd = stationary_components(*prob.kernel);
    Json classes = Json::array();
    for (const auto& c : sd.classes) classes.push_back(c);
    Json transient = Json::array();
    for (std::size_t x = 0; x < prob.space.size(); ++x)
      if (sd.class_of[x] < 0) transient.push_back(prob.space.labels[x]);
    results["recurrent_classes"] = classes;
    results["transient"] = transient;
  } else if (prob.action) {
    Json orbits = Json::array();
    for (const auto& o : orbit_decompose(*prob.action).orbits) orbits.push_back(o);
    results["orbits"] = orbits;
  }
  bool round_trip = true;
  Json measures = Json::object();
  for (const auto& [name, m] : {std::pair{"mu", &prob.mu}, std::pair{"nu", &prob.nu}}) {
    if (!*m) continue;
    Json rep = measure_report(**m, spec);
    round_trip = round_trip && rep["round_trip"].get<bool>();
    measures[name] = std::move(rep);
  }
  results["measures"] = measures;

  // With both marginals and a cost, also split the optimal restricted plan.
  const auto cost = prob.effective_cost();
  if (prob.mu && prob.nu && cost) {
    const LinearRestriction r = prob.restriction();
    const OtResult res = solve_constrained_ot(*prob.mu, *prob.nu, *cost, r);
    if (res.status == OtStatus::Optimal) {
      const PlanDecomposition pd = decompose_plan(res.plan, r);
      Matrix rebuilt = Matrix::Zero(res.plan.p.rows(), res.plan.p.cols());
      Json comps = Json::array();
      for (std::size_t a = 0; a < pd.components.size(); ++a) {
        const double w = pd.weights(static_cast<Eigen::Index>(a));
        rebuilt += w * pd.components[a].p;
        comps.push_back(Json{{"atom", pd.component_atom[a]},
                             {"weight", real(w)},
                             {"marginal_classes", {pd.marginal_class[a].first, pd.marginal_class[a].second}},
                             {"plan", to_json(pd.components[a].p)}});
      }
      const double err = (rebuilt - res.plan.p).cwiseAbs().maxCoeff();
      results["plan"] = Json{{"value", real(res.value)},
                             {"components", comps},
                             {"reconstruction_error", real(err)},
                             {"round_trip", err <= kMassTol}};
      round_trip = round_trip && err <= kMassTol;
    } else {
      results["plan"] = Json{{"status", to_string(res.status)}};
    }
  }
  results["round_trip"] = round_trip;
  emit_report(ctx, std::move(results));
  return round_trip ? kOk : kInternal;
}

Json decomposition_entry(const DecompositionReport& rep, double tol) {
  Json j = to_json(rep);
  j["passed"] = rep.lhs_status == rep.outer_status && rep.gap <= tol;
  return j;
}

/// Runs the named structural checks; returns the report and whether all passed.
std::pair<Json, bool> run_checks(const io::Problem& prob, const LinearRestriction& r,
                                 const std::vector<std::string>& names, std::uint64_t seed,
                                 std::size_t extra) {
  const std::vector<Measure> members = sample_members(prob, extra, seed);
  Json out = Json::object();
  bool all = true;
  for (const auto& name : names) {
    CheckReport rep;
    if (name == "geometric") {
      rep = check_geometric(r, members);
      Json items = Json::object();
      for (const char* item : {"diagonal", "product", "transpose"}) {
        Json fails = Json::array();
        const std::string prefix = std::string(item) + ":";
        for (const auto& f : rep.failures)
          if (f.rfind(prefix, 0) == 0) fails.push_back(f);
        items[item] = Json{{"passed", fails.empty()}, {"failures", fails}};
      }
      Json j = to_json(rep);
      j["items"] = items;
      out[name] = j;
      all = all && rep.passed;
      continue;
    }
    if (name == "weak-regularity") {
      std::vector<std::pair<Measure, Measure>> pairs;
      for (std::size_t i = 0; i < members.size(); ++i)
        pairs.emplace_back(members[i], members[(i + 1) % members.size()]);
      rep = check_weak_regularity(r, pairs);
    } else if (name == "coherency") {
      std::vector<TransportPlan> plans;
      Rng rng(seed ^ 0x5bd1e995ULL);
      const auto n = static_cast<Eigen::Index>(prob.space.size());
      for (std::size_t i = 0; i + 1 < members.size(); ++i) {
        CostMatrix c{prob.space, prob.space, Matrix(n, n)};
        for (Eigen::Index a = 0; a < n; ++a)
          for (Eigen::Index b = 0; b < n; ++b) c.c(a, b) = rng.uniform();
        const OtResult res = solve_constrained_ot(members[i], members[i + 1], c, r);
        if (res.status == OtStatus::Optimal) plans.push_back(res.plan);
      }
      rep = check_coherency(r, plans);
    } else if (name == "decomposability") {
      rep = check_ergodic_decomposability(r);
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown check '" + name +
                                               "' (expected geometric, weak-regularity, coherency, decomposability)");
    }
    out[name] = to_json(rep);
    all = all && rep.passed;
  }
  return {out, all};
}

int verify_random(Context& ctx) {
  RandomSpec rs = parse_random_spec(ctx.opt.random);
  if (ctx.opt.seed) rs.base.seed = *ctx.opt.seed;
  const double tol = resolve_tol(ctx.opt, std::nullopt);

  std::vector<Json> entries(rs.count);
  std::vector<double> gaps(rs.count, 0.0);
  std::vector<char> passed(rs.count, 0);
  std::vector<std::string> errors(rs.count);
  auto run = [&](std::size_t i) {
    try {
      InstanceSpec s = rs.base;
      s.seed = instance_seed(rs.base.seed, i);
      const Instance inst = generate_instance(s);
      const DecompositionReport rep = verify_decomposition(inst.mu, inst.nu, inst.cost, inst.restriction);
      gaps[i] = rep.gap;
      passed[i] = rep.lhs_status == rep.outer_status && rep.gap <= tol;
      entries[i] = Json{{"index", i},
                        {"seed", s.seed},
                        {"lhs", real(rep.lhs)},
                        {"rhs", real(rep.rhs)},
                        {"gap", real(rep.gap)},
                        {"plan_components", rep.plan_components},
                        {"passed", static_cast<bool>(passed[i])}};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(ctx.opt.jobs, static_cast<unsigned>(rs.count)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < rs.count; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < rs.count; i += jobs) run(i);
      });
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < rs.count; ++i)
    if (!errors[i].empty()) throw Error(ErrorKind::Internal, "instance " + std::to_string(i) + ": " + errors[i]);

  double max_gap = 0.0;
  bool all = true;
  for (std::size_t i = 0; i < rs.count; ++i) {
    max_gap = std::max(max_gap, gaps[i]);
    all = all && passed[i];
  }
  Json results{{"random", ctx.opt.random},
               {"seed", rs.base.seed},
               {"count", rs.count},
               {"tolerance", tol},
               {"instances", entries},
               {"max_gap", max_gap},
               {"passed", all}};
  emit_report(ctx, std::move(results));
  return all ? kOk : kMathFailure;
}

int cmd_verify(Context& ctx) {
  require_json_format(ctx);
  if (!ctx.opt.random.empty()) {
    if (!ctx.opt.file.empty()) throw Error(ErrorKind::InvalidInput, "give either a problem file or --random");
    return verify_random(ctx);
  }
  io::Problem prob = load(ctx);
  const double tol = resolve_tol(ctx.opt, prob.verify_tol);
  const LinearRestriction r = prob.restriction();
  Json results{{"tolerance", tol}, {"restriction", restriction_json(prob, r)}};
  bool all = true;
  if (prob.mu && prob.nu) {
    const DecompositionReport rep = verify_decomposition(*prob.mu, *prob.nu, need_cost(prob), r);
    Json j = decomposition_entry(rep, tol);
    all = all && j["passed"].get<bool>();
    results["decomposition"] = j;
  }
  if (!ctx.opt.checks.empty()) {
    auto [checks, ok] = run_checks(prob, r, ctx.opt.checks, ctx.opt.seed.value_or(0), ctx.opt.samples);
    results["checks"] = checks;
    all = all && ok;
  }
  if (!results.contains("decomposition") && !results.contains("checks"))
    throw io::input_error("marginals", "verify needs both marginals or a --check");
  results["passed"] = all;
  emit_report(ctx, std::move(results));
  return all ? kOk : kMathFailure;
}

int cmd_metric(Context& ctx) {
  io::Problem prob = load(ctx);
  const GroundMetric& d = need_metric(prob);
  const LinearRestriction r = prob.restriction();
  const SimplexSpec spec = prob.simplex();
  const BoundaryMetricMatrix bm = boundary_metric(spec, d, prob.p, r);

  if (ctx.opt.format == "csv") {
    std::vector<std::string> names = component_space(bm.components.size()).labels;
    emit(io::matrix_csv(bm.dbar, names, names, "distance"), ctx.opt);
    return kOk;
  }
  const double tol = resolve_tol(ctx.opt, prob.verify_tol);
  Json comps = Json::array();
  for (const auto& m : bm.components) comps.push_back(to_json(m.w));
  Json results{{"p", prob.p}, {"tolerance", tol}, {"components", comps}, {"boundary_metric", to_json(bm.dbar)}};
  bool ok = true;
  if (prob.mu && prob.nu) {
    const double w = wasserstein(*prob.mu, *prob.nu, d, prob.p, r);
    const double l = lifted_metric(*prob.mu, *prob.nu, bm, spec, prob.p);
    const double gap = w == l ? 0.0 : std::abs(w - l);
    ok = gap <= tol;
    results["restricted"] = real(w);
    results["lifted"] = real(l);
    results["gap"] = real(gap);
  }
  // Axioms over random members of the simplex.
  const std::vector<Measure> members = sample_members(prob, ctx.opt.samples, ctx.opt.seed.value_or(0));
  std::vector<std::array<Measure, 3>> triples;
  for (std::size_t i = 0; i + 2 < members.size(); ++i) triples.push_back({members[i], members[i + 1], members[i + 2]});
  const AxiomReport ax =
      check_metric_axioms([&](const Measure& a, const Measure& b) { return wasserstein(a, b, d, prob.p, r); }, triples);
  results["axioms"] = to_json(ax);
  ok = ok && ax.passed;
  results["passed"] = ok;
  emit_report(ctx, std::move(results));
  return ok ? kOk : kMathFailure;
}

int cmd_check(Context& ctx) {
  require_json_format(ctx);
  io::Problem prob = load(ctx);
  const LinearRestriction r = prob.restriction();
  std::vector<std::string> names = ctx.opt.checks;
  if (names.empty()) names = {"weak-regularity", "geometric", "coherency", "decomposability"};
  if (r.x_space().size() != r.y_space().size()) names.erase(std::remove(names.begin(), names.end(), "geometric"), names.end());
  auto [checks, ok] = run_checks(prob, r, names, ctx.opt.seed.value_or(0), ctx.opt.samples);
  Json results{{"restriction", restriction_json(prob, r)}, {"checks", checks}};
  if (prob.kernel) {
    const KernelCheck kc = check_ergodic_kernel(*prob.kernel);
    results["kernel"] = Json{{"ergodic", kc.ok}, {"offending_rows", kc.offending}, {"details", kc.details}};
  }
  results["passed"] = ok;
  emit_report(ctx, std::move(results));
  return ok ? kOk : kMathFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergot: constrained optimal transport and ergodic decompositions"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub, bool file_required) {
    auto* f = sub->add_option("file", opt.file, "Problem file (JSON)");
    if (file_required) f->required();
    sub->add_option("--out", opt.out, "Write the report to PATH instead of stdout");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--tol", opt.tol, "Pass/fail tolerance (default 1e-8, or ERGOT_TOL)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", opt.seed, "Seed for sampled instances and members");
    sub->add_option("--jobs", opt.jobs, "Worker threads for instance verification")->check(CLI::PositiveNumber);
    sub->add_option("--p", opt.p, "Wasserstein exponent (overrides the file)");
  };
  auto* solve = app.add_subcommand("solve", "Solve the restricted transport problem");
  add_common(solve, true);
  auto* decompose = app.add_subcommand("decompose", "Ergodic decomposition of the marginals and optimal plan");
  add_common(decompose, true);
  auto* verify = app.add_subcommand("verify", "Check the cost decomposition on a file or random instances");
  add_common(verify, false);
  verify->add_option("--random", opt.random, "Random instances, e.g. perm:n=6,cycles=3+3,count=50,seed=7");
  verify->add_option("--check", opt.checks, "Also run structural checks (geometric, weak-regularity, ...)");
  verify->add_option("--samples", opt.samples, "Random simplex members used by checks");
  auto* metric = app.add_subcommand("metric", "Boundary metric and restricted Wasserstein distance");
  add_common(metric, true);
  metric->add_option("--samples", opt.samples, "Random simplex members used by the axiom check");
  auto* check = app.add_subcommand("check", "Structural checks on the restriction");
  add_common(check, true);
  check->add_option("--check", opt.checks, "Checks to run (default: all)");
  check->add_option("--samples", opt.samples, "Random simplex members used by checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  Context ctx{app.get_subcommands().front()->get_name(), opt, {}};
  try {
    if (ctx.command == "solve") return cmd_solve(ctx);
    if (ctx.command == "decompose") return cmd_decompose(ctx);
    if (ctx.command == "verify") return cmd_verify(ctx);
    if (ctx.command == "metric") return cmd_metric(ctx);
    return cmd_check(ctx);
  } catch (const Error& e) {
    std::cerr << "ergot: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "ergot: internal error: " << e.what() << "\n";
    return kInternal;
  }
}
