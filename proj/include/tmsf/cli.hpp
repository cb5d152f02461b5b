#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tmsf/io.hpp"
#include "tmsf/tmsf.hpp"

namespace tmsf::cli {

using io::Json;

enum ExitCode : int { ok = 0, precondition_failed = 2, parse_failed = 3, invariant_failed = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return parse_failed;
    case ErrorKind::invariant:
    case ErrorKind::non_convergence: return invariant_failed;
    default: return precondition_failed;
  }
}

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"classify", "pressure", "rpf",    "reduce",
                                          "mixing",   "variational", "induce", "subsystems"};
  return c;
}

struct JobSpec {
  std::string command;
  std::string shift_file;
  std::optional<std::string> potential_file;
  Json params = Json::object();
  std::optional<std::string> output;
  std::string format = "json";  // or "table"
};

inline JobSpec parse_job(const Json& j) {
  io::detail::check_keys(j, "job", {"command", "shift_file"}, {"potential_file", "params", "output", "format"});
  JobSpec job;
  job.command = io::detail::get_string(j["command"], "job.command");
  job.shift_file = io::detail::get_string(j["shift_file"], "job.shift_file");
  if (j.contains("potential_file")) job.potential_file = io::detail::get_string(j["potential_file"], "job.potential_file");
  if (j.contains("params")) {
    if (!j["params"].is_object()) io::detail::fail("job.params", "expected an object");
    job.params = j["params"];
  }
  if (j.contains("output")) job.output = io::detail::get_string(j["output"], "job.output");
  if (j.contains("format")) job.format = io::detail::get_string(j["format"], "job.format");
  return job;
}

// Relative paths in a job file are taken relative to the job file's directory.
inline void resolve_paths(JobSpec& job, const std::filesystem::path& base) {
  auto fix = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  fix(job.shift_file);
  if (job.potential_file) fix(*job.potential_file);
  if (job.output) fix(*job.output);
  for (const char* key : {"measure_file", "schedule_file"})
    if (job.params.contains(key) && job.params[key].is_string()) {
      auto v = job.params[key].get<std::string>();
      fix(v);
      job.params[key] = v;
    }
}

namespace detail {

// Typed, range-checked access to the command parameters; every key must be
// consumed, so typos surface as parse errors.
class Params {
 public:
  Params(const Json& j, std::string command) : j_(j), command_(std::move(command)) {
    if (!j_.is_object()) io::detail::fail("params", "expected an object");
  }

  std::size_t count(const char* key, std::size_t def, std::size_t lo, std::size_t hi) {
    std::size_t v = def;
    if (const Json* x = take(key)) v = io::detail::get_count(*x, where(key));
    if (v < lo || v > hi)
      io::detail::fail(where(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    effective_[key] = v;
    return v;
  }

  double real(const char* key, double def, double lo, double hi) {
    double v = def;
    if (const Json* x = take(key)) v = io::detail::get_real(*x, where(key));
    if (!(v > lo && v <= hi)) io::detail::fail(where(key), "must lie in (" + num(lo) + ", " + num(hi) + "]");
    effective_[key] = v;
    return v;
  }

  bool flag(const char* key, bool def) {
    bool v = def;
    if (const Json* x = take(key)) {
      if (!x->is_boolean()) io::detail::fail(where(key), "expected true or false");
      v = x->get<bool>();
    }
    effective_[key] = v;
    return v;
  }

  std::optional<std::string> text(const char* key) {
    const Json* x = take(key);
    if (!x) return std::nullopt;
    effective_[key] = io::detail::get_string(*x, where(key));
    return x->get<std::string>();
  }

  std::string choice(const char* key, std::initializer_list<const char*> options) {
    auto v = text(key);
    if (!v) io::detail::fail(where(key), "is required");
    for (const char* o : options)
      if (*v == o) return *v;
    std::string all;
    for (const char* o : options) all += std::string(all.empty() ? "" : ", ") + o;
    io::detail::fail(where(key), "expected one of " + all);
  }

  std::optional<State> state(const char* key, const MarkovShift& shift) {
    auto v = text(key);
    if (!v) return std::nullopt;
    auto s = shift.index_of(*v);
    if (!s) throw Error(ErrorKind::precondition, where(key) + ": unknown state \"" + *v + "\"");
    return s;
  }

  std::optional<std::set<State>> states(const char* key, const MarkovShift& shift) {
    const Json* x = take(key);
    if (!x) return std::nullopt;
    std::set<State> out;
    for (State s : io::detail::get_word(shift, *x, where(key))) out.insert(s);
    effective_[key] = *x;
    return out;
  }

  // Rejects anything not consumed by the command.
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) io::detail::fail("params", "unknown key \"" + k + "\" for command " + command_);
  }

  const Json& effective() const { return effective_; }

 private:
  const Json* take(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_[key] : nullptr;
  }
  std::string where(const char* key) const { return "params." + std::string(key); }
  static std::string num(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
  }

  const Json& j_;
  std::string command_;
  std::set<std::string> used_;
  Json effective_ = Json::object();
};

struct Context {
  std::shared_ptr<const MarkovShift> shift;
  std::optional<Potential> potential;
  Json inputs = Json::object();

  void digest(const std::string& role, const std::string& path) {
    inputs[role] = {{"path", path}, {"sha256", io::sha256_file(path)}};
  }

  const Potential& require_potential(const std::string& command) const {
    if (!potential) throw Error(ErrorKind::precondition, command + " needs a potential file");
    return *potential;
  }
};

inline Json pressure_json(const MarkovShift& shift, const PressureReport& r) {
  return {{"anchor", shift.name(r.anchor)},
          {"estimate", io::number(r.estimate)},
          {"cauchy_gap", io::number(r.cauchy_gap)},
          {"sequence", io::numbers(r.sequence)}};
}

inline Json words_json(const MarkovShift& shift, const std::vector<std::vector<State>>& ws) {
  Json a = Json::array();
  for (const auto& w : ws) a.push_back(io::detail::word_json(shift, w));
  return a;
}

// Measure from params.measure_file, or the equilibrium measure of the potential.
inline CylinderMeasure load_measure(Context& ctx, Params& p, const std::string& command, bool required) {
  auto file = p.text("measure_file");
  if (!file && required) throw Error(ErrorKind::parse, "params.measure_file: is required for " + command);
  if (file) {
    ctx.digest("measure", *file);
    auto spec = io::parse_measure(io::read_file(*file), ctx.shift);
    if (spec.measure) return *spec.measure;
  }
  return gibbs_measure(rpf_solve(ctx.require_potential(command).recentered()));
}

inline Json cmd_classify(Context& ctx, Params& p) {
  const std::size_t horizon = p.count("horizon", 8, 1, 64);
  const std::size_t n_max = p.count("n_max", 60, 1, 10000);
  const auto anchor = p.state("state", *ctx.shift);
  p.finish();
  const MarkovShift& s = *ctx.shift;
  Json r;
  r["states"] = s.names();
  r["sidedness"] = s.sidedness() == Sidedness::one_sided ? "one-sided" : "two-sided";
  if (s.countable_tag()) r["countable"] = *s.countable_tag();
  Json viol = Json::array();
  for (const auto& v : validate(s)) viol.push_back({{"state", v.state}, {"invariant", v.invariant}});
  r["violations"] = viol;
  if (!viol.empty()) return r;
  r["transitive"] = is_transitive(s);
  r["mixing"] = is_mixing(s);
  if (is_transitive(s)) {
    const auto info = period_and_classes(s);
    r["period"] = info.period;
    r["classes"] = words_json(s, info.classes);
  }
  if (!ctx.potential) return r;
  const auto reg = classify_regularity(*ctx.potential, horizon);
  r["regularity"] = {{"left_radius", ctx.potential->left()},
                     {"right_radius", ctx.potential->right()},
                     {"locally_constant", reg.is_locally_constant},
                     {"hoelder", to_string(reg.hoelder)},
                     {"summable", to_string(reg.summable)},
                     {"walters", to_string(reg.walters)},
                     {"first_variation", io::number(reg.first_variation)},
                     {"variations", io::numbers(reg.var_sequence)},
                     {"summable_total", io::number(reg.summable_total)},
                     {"walters_bound", io::numbers(reg.walters_bound)}};
  if (is_mixing(s)) {
    const auto rec = classify_recurrence(ctx.potential->recentered(), anchor.value_or(0), n_max);
    r["recurrence"] = {{"mode", to_string(rec.mode)},
                       {"anchor", s.name(anchor.value_or(0))},
                       {"lambda", io::number(rec.lambda)},
                       {"sum_z", io::number(rec.z_partial.back())},
                       {"sum_n_z_star", io::number(rec.z_star_moment.back())}};
  }
  return r;
}

inline Json cmd_pressure(Context& ctx, Params& p) {
  const std::size_t n_max = p.count("n_max", 30, 1, 10000);
  const auto anchor = p.state("state", *ctx.shift);
  p.finish();
  const auto& pot = ctx.require_potential("pressure");
  const auto r = gurevich_pressure(pot.recentered(), anchor.value_or(0), n_max);
  return pressure_json(*ctx.shift, r);
}

inline Json cmd_rpf(Context& ctx, Params& p) {
  const double tol = p.real("tol", 1e-12, 0.0, 1e-2);
  const std::size_t max_iter = p.count("max_iter", 200000, 1, 100000000);
  p.finish();
  const auto& pot = ctx.require_potential("rpf");
  if (!pot.one_sided()) throw Error(ErrorKind::precondition, "rpf: potential must be one-sided; reduce it first");
  const auto r = rpf_solve(pot, tol, max_iter);
  return {{"lambda", io::number(r.lambda)},
          {"log_lambda", io::number(std::log(r.lambda))},
          {"memory", r.memory},
          {"residual", io::number(r.residual)},
          {"nu_residual", io::number(r.nu_residual)},
          {"iterations", r.iterations},
          {"cylinders", words_json(*ctx.shift, r.blocks.words())},
          {"h", io::numbers(r.h)},
          {"nu", io::numbers(r.nu)}};
}

inline Json cmd_reduce(Context& ctx, Params& p) {
  const std::string method = p.choice("method", {"sinai", "coelho-quas"});
  const std::size_t depth = p.count("depth", 8, 1, 64);
  const std::size_t period = p.count("verify_period", 6, 0, 16);
  const bool check = p.flag("pressure_check", false);
  const std::size_t n_max = p.count("n_max", 30, 1, 10000);
  const auto anchor = p.state("state", *ctx.shift);
  p.finish();
  const auto& pot = ctx.require_potential("reduce");
  const ReductionResult red = method == "sinai" ? sinai_reduce(pot, depth) : coelho_quas_reduce(pot);
  Json r;
  r["reduced"] = io::reduction_json(red);
  if (period > 0) {
    const auto v = verify_coboundary(pot, red, period);
    r["verification"] = {{"max_period", period},
                         {"max_defect", io::number(v.max_defect)},
                         {"orbits_checked", v.orbits_checked},
                         {"within_tolerance", v.within_tolerance},
                         {"worst_orbit", io::detail::word_json(*ctx.shift, v.worst_orbit)}};
    if (!v.within_tolerance)
      throw Error(ErrorKind::invariant, "periodic-orbit sums preserved by the reduction: defect " +
                                            std::to_string(v.max_defect) + " on orbit " +
                                            ctx.shift->render(v.worst_orbit));
  }
  if (check) {
    const State a = anchor.value_or(0);
    const auto before = gurevich_pressure(pot.recentered(), a, n_max);
    const auto after = gurevich_pressure(red.one_sided, a, n_max);
    const double delta = std::abs(before.estimate - after.estimate);
    // both estimates are (1/n) log Z_n at the same n, and periodic sums differ
    // by at most n * truncation_error
    const double tol = red.truncation_error + 1e-9;
    r["pressure_check"] = {{"input", pressure_json(*ctx.shift, before)},
                           {"reduced", pressure_json(*ctx.shift, after)},
                           {"difference", io::number(delta)},
                           {"tolerance", io::number(tol)}};
    if (!(delta <= tol))
      throw Error(ErrorKind::invariant, "pressure invariance under reduction: |dP| = " + std::to_string(delta) +
                                            " exceeds " + std::to_string(tol));
  }
  return r;
}

inline Json cmd_mixing(Context& ctx, Params& p) {
  const std::size_t k_max = p.count("k_max", 8, 1, 256);
  const std::size_t n_max = p.count("n_max", 2, 0, 64);
  const std::size_t max_len = p.count("max_len", 4, 1, 32);
  const std::size_t cap = p.count("cap", default_enumeration_cap, 1, std::size_t{1} << 24);
  auto star = p.states("s_star", *ctx.shift);
  const auto mu = load_measure(ctx, p, "mixing", false);
  p.finish();
  if (!star) {
    star.emplace();
    for (State s = 0; s < ctx.shift->size(); ++s) star->insert(s);
  }
  const auto rep = mixing_report(mu, k_max, n_max, *star, max_len, cap);
  Json beta = Json::array(), coarse = Json::array();
  for (std::size_t k = 1; k <= k_max; ++k)
    for (std::size_t n = 0; n <= n_max; ++n) {
      beta.push_back({{"k", k}, {"n", n}, {"beta", io::number(rep.beta[k - 1][n])}});
      if (!rep.beta_coarse.empty())
        coarse.push_back({{"k", k}, {"n", n}, {"beta", io::number(rep.beta_coarse[k - 1][n])}});
    }
  Json dec = Json::array();
  for (bool b : rep.strictly_decreasing) dec.push_back(b);
  Json r;
  r["measure_kind"] = to_string(mu.kind());
  r["beta"] = beta;
  if (!coarse.empty()) r["beta_coarse"] = coarse;
  r["relative_deviation"] = io::numbers(rep.relative_deviation);
  r["strictly_decreasing_in_k"] = dec;
  r["rho_hat"] = rep.rho_hat ? io::number(*rep.rho_hat) : Json(nullptr);
  r["quasi_independence"] = {{"s_star", io::detail::word_json(*ctx.shift, std::vector<State>(star->begin(), star->end()))},
                             {"max_len", max_len},
                             {"c_star", io::number(rep.quasi.c_star)},
                             {"witness", {io::detail::word_json(*ctx.shift, rep.quasi.witness_left),
                                          io::detail::word_json(*ctx.shift, rep.quasi.witness_right)}},
                             {"pairs_tested", rep.quasi.pairs_tested},
                             {"violations", rep.quasi.violations}};
  r["range"] = "conclusions hold for k <= " + std::to_string(k_max) + ", n <= " + std::to_string(n_max) +
               " and cylinder lengths <= " + std::to_string(max_len) + " only";
  if (mu.kind() == MeasureKind::gibbs && !rep.quasi.violations.empty())
    throw Error(ErrorKind::invariant, "quasi-independence of the equilibrium measure: " + rep.quasi.violations[0]);
  return r;
}

inline Json cmd_variational(Context& ctx, Params& p) {
  const auto mu = load_measure(ctx, p, "variational", true);
  p.finish();
  const auto pot = ctx.require_potential("variational").recentered();
  const auto rpf = rpf_solve(pot);
  const double ent = entropy(mu);
  const double value = pressure_functional(mu, pot);
  const double pressure = std::log(rpf.lambda);
  const double tol = 1e-8;
  if (value > pressure + tol)
    throw Error(ErrorKind::invariant, "variational principle: h + integral = " + std::to_string(value) +
                                          " exceeds log lambda = " + std::to_string(pressure));
  return {{"measure_kind", to_string(mu.kind())},
          {"entropy", io::number(ent)},
          {"integral", io::number(value - ent)},
          {"value", io::number(value)},
          {"pressure", io::number(pressure)},
          {"gap", io::number(pressure - value)},
          {"equilibrium", pressure - value <= tol}};
}

inline Json cmd_induce(Context& ctx, Params& p) {
  const auto a = p.state("state", *ctx.shift);
  if (!a) throw Error(ErrorKind::parse, "params.state: is required for induce");
  const std::size_t horizon = p.count("horizon", 60, 1, 100000);
  auto mu = std::make_shared<const CylinderMeasure>(load_measure(ctx, p, "induce", false));
  p.finish();
  const auto s = induce(mu, *a, horizon);
  const auto kac = kac_check(s);
  const auto ab = abramov_check(mu, *a, horizon);
  if (s.certified && !kac.ok)
    throw Error(ErrorKind::invariant, "Kac formula: defect " + std::to_string(kac.defect) + " exceeds tail bound " +
                                          std::to_string(kac.tail));
  if (s.certified && !ab.ok)
    throw Error(ErrorKind::invariant, "Abramov formula: defect " + std::to_string(ab.defect) + " exceeds tail bound " +
                                          std::to_string(ab.tail));
  return {{"state", ctx.shift->name(*a)},
          {"mass", io::number(s.mass)},
          {"return_time", io::numbers(s.return_time)},
          {"survival", io::number(s.survival)},
          {"tail_certified", s.certified},
          {"kac", {{"lhs", io::number(kac.lhs)}, {"rhs", io::number(kac.rhs)}, {"tail", io::number(kac.tail)},
                   {"defect", io::number(kac.defect)}, {"ok", kac.ok}}},
          {"abramov", {{"induced_entropy_times_mass", io::number(ab.induced_entropy_times_mass)},
                       {"induced_entropy", io::number(ab.induced_entropy)},
                       {"base_entropy", io::number(ab.base_entropy)},
                       {"tail", io::number(ab.tail)},
                       {"defect", io::number(ab.defect)},
                       {"ok", ab.ok}}}};
}

inline Json cmd_subsystems(Context& ctx, Params& p) {
  auto file = p.text("schedule_file");
  if (!file) throw Error(ErrorKind::parse, "params.schedule_file: is required for subsystems");
  const std::size_t n_max = p.count("n_max", 100, 1, 10000);
  const auto anchor = p.state("state", *ctx.shift);
  p.finish();
  ctx.digest("schedule", *file);
  const auto schedule = io::parse_schedule(io::read_file(*file), *ctx.shift);
  const auto pot = ctx.require_potential("subsystems").recentered();
  const auto r = pressure_via_subsystems(pot, schedule, anchor.value_or(schedule.front().front()), n_max);
  Json reps = Json::array();
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    Json e = {{"states", io::detail::word_json(*ctx.shift, schedule[i])},
              {"estimate", io::number(r.reports[i].estimate)},
              {"cauchy_gap", io::number(r.reports[i].cauchy_gap)}};
    reps.push_back(e);
  }
  return {{"truncations", reps}, {"nondecreasing", r.nondecreasing}, {"within_tolerance", r.within_tolerance}};
}

// Human table: one "path<TAB>value" line per leaf, reals to 6 significant digits.
inline void flatten(const Json& j, const std::string& path, std::ostream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
  } else if (j.is_array()) {
    if (std::all_of(j.begin(), j.end(), [](const Json& x) { return x.is_primitive(); })) {
      out << path;
      for (const auto& x : j) {
        out << '\t';
        flatten(x, "", out);
      }
      if (!path.empty()) out << '\n';
      return;
    }
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
  } else {
    if (!path.empty()) out << path << '\t';
    if (j.is_number_float()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", j.get<double>());
      out << buf;
    } else if (j.is_string()) {
      out << j.get<std::string>();
    } else {
      out << j.dump();
    }
    if (!path.empty()) out << '\n';
  }
}

inline void render_table(const Json& report, std::ostream& out) {
  const Json& r = report["result"];
  if (report["command"] == "mixing") {
    out << "k\tn\tbeta\n";
    for (const auto& row : r["beta"]) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", row["beta"].get<double>());
      out << row["k"].get<std::size_t>() << '\t' << row["n"].get<std::size_t>() << '\t' << buf << '\n';
    }
    out << "# summary\n";
    Json rest = r;
    rest.erase("beta");
    rest.erase("beta_coarse");
    flatten(rest, "", out);
    return;
  }
  flatten(r, "", out);
}

}  // namespace detail

inline Json error_json(ErrorKind kind, const std::string& message) {
  return {{"error", {{"kind", to_string(kind)}, {"message", message}, {"exit_code", exit_code_for(kind)}}}};
}

// Runs one job. The report (or a machine-readable error object) goes to the
// output file if one is set, else to `out`; a one-line diagnostic goes to `err`.
inline int run_job(const JobSpec& job, std::ostream& out, std::ostream& err) {
  auto fail = [&](ErrorKind kind, const std::string& msg) {
    out << error_json(kind, msg).dump(2) << '\n';
    err << "tmsf: " << msg << '\n';
    return exit_code_for(kind);
  };
  try {
    if (std::find(commands().begin(), commands().end(), job.command) == commands().end())
      throw Error(ErrorKind::parse, "unknown command \"" + job.command + "\"");
    if (job.format != "json" && job.format != "table")
      throw Error(ErrorKind::parse, "format must be \"json\" or \"table\"");

    detail::Context ctx;
    ctx.digest("shift", job.shift_file);
    auto shift = io::parse_shift(io::read_file(job.shift_file));
    if (job.command != "classify") io::require_valid(shift);
    ctx.shift = std::make_shared<const MarkovShift>(std::move(shift));
    if (job.potential_file) {
      ctx.digest("potential", *job.potential_file);
      if (validate(*ctx.shift).empty())
        ctx.potential = io::parse_potential(io::read_file(*job.potential_file), ctx.shift);
    }

    detail::Params params(job.params, job.command);
    static const std::map<std::string, Json (*)(detail::Context&, detail::Params&)> table{
        {"classify", detail::cmd_classify}, {"pressure", detail::cmd_pressure},
        {"rpf", detail::cmd_rpf},           {"reduce", detail::cmd_reduce},
        {"mixing", detail::cmd_mixing},     {"variational", detail::cmd_variational},
        {"induce", detail::cmd_induce},     {"subsystems", detail::cmd_subsystems}};
    Json result = table.at(job.command)(ctx, params);

    Json report;
    report["command"] = job.command;
    report["inputs"] = ctx.inputs;
    report["params"] = params.effective();
    report["result"] = std::move(result);

    std::ostringstream text;
    if (job.format == "json")
      text << report.dump(2) << '\n';
    else
      detail::render_table(report, text);
    if (job.output) {
      std::ofstream f(*job.output, std::ios::binary);
      if (!f) throw Error(ErrorKind::precondition, "cannot write \"" + *job.output + "\"");
      f << text.str();
    } else {
      out << text.str();
    }
    return ok;
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ErrorKind::parse, e.what());
  } catch (const std::exception& e) {
    return fail(ErrorKind::invariant, std::string("internal error: ") + e.what());
  }
}

}  // namespace tmsf::cli
