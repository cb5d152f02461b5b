#pragma once

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tmsf/cohomology.hpp"
#include "tmsf/measure.hpp"
#include "tmsf/potential.hpp"
#include "tmsf/shift_space.hpp"

// JSON forms of shifts, potentials, measures, schedules and reduction
// results. Parsing is strict: unknown keys and wrong types are errors.
namespace tmsf::io {

using Json = nlohmann::ordered_json;

// Finite doubles become numbers (shortest round-trip form); infinities and
// NaN become the strings "inf", "-inf", "nan".
inline Json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline Json numbers(std::span<const double> xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::parse, where + ": " + what);
}

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) fail(where, "expected an object");
  std::set<std::string> known;
  for (const char* k : required) {
    known.insert(k);
    if (!j.contains(k)) fail(where, std::string("missing key \"") + k + "\"");
  }
  for (const char* k : optional) known.insert(k);
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) fail(where, "unknown key \"" + k + "\"");
}

inline double get_real(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) fail(where, "number is not finite");
  return x;
}

inline std::size_t get_count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<long long>() < 0))
    fail(where, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline const std::string& get_string(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get_ref<const std::string&>();
}

inline State get_state(const MarkovShift& shift, const Json& j, const std::string& where) {
  const auto& name = get_string(j, where);
  auto s = shift.index_of(name);
  if (!s) fail(where, "unknown state \"" + name + "\"");
  return *s;
}

inline std::vector<State> get_word(const MarkovShift& shift, const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of state names");
  std::vector<State> w;
  for (const auto& x : j) w.push_back(get_state(shift, x, where));
  return w;
}

inline Json word_json(const MarkovShift& shift, std::span<const State> w) {
  Json a = Json::array();
  for (State s : w) a.push_back(shift.name(s));
  return a;
}

}  // namespace detail

inline Json read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse, "cannot open \"" + path + "\"");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path + ": " + e.what());
  }
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse, "cannot open \"" + path + "\"");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::invariant, "sha256: digest context unavailable");
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

// Structure only; see require_valid.
// {"states": [...], "transitions": dense 0/1 rows or [[from, to], ...],
//  "sidedness": "one-sided" | "two-sided", "countable": tag}
inline MarkovShift parse_shift(const Json& j) {
  detail::check_keys(j, "shift", {"states", "transitions"}, {"sidedness", "countable"});
  if (!j["states"].is_array() || j["states"].empty()) detail::fail("shift.states", "expected a nonempty array");
  std::vector<std::string> names;
  for (const auto& s : j["states"]) names.push_back(detail::get_string(s, "shift.states"));
  const std::size_t n = names.size();

  Sidedness side = Sidedness::one_sided;
  if (j.contains("sidedness")) {
    const auto& s = detail::get_string(j["sidedness"], "shift.sidedness");
    if (s == "two-sided")
      side = Sidedness::two_sided;
    else if (s != "one-sided")
      detail::fail("shift.sidedness", "expected \"one-sided\" or \"two-sided\"");
  }
  std::optional<std::string> tag;
  if (j.contains("countable")) tag = detail::get_string(j["countable"], "shift.countable");

  const Json& t = j["transitions"];
  if (!t.is_array()) detail::fail("shift.transitions", "expected an array");
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  const bool sparse = !t.empty() && t[0].is_array() && !t[0].empty() && t[0][0].is_string();
  if (sparse) {
    std::map<std::string, State> index;
    for (State s = 0; s < n; ++s) index[names[s]] = s;
    for (const auto& pair : t) {
      if (!pair.is_array() || pair.size() != 2) detail::fail("shift.transitions", "expected [from, to] pairs");
      State ab[2];
      for (int i = 0; i < 2; ++i) {
        const auto& name = detail::get_string(pair[i], "shift.transitions");
        auto it = index.find(name);
        if (it == index.end()) detail::fail("shift.transitions", "unknown state \"" + name + "\"");
        ab[i] = it->second;
      }
      adj[ab[0]][ab[1]] = true;
    }
  } else {
    if (t.size() != n) detail::fail("shift.transitions", "expected " + std::to_string(n) + " rows");
    for (std::size_t a = 0; a < n; ++a) {
      if (!t[a].is_array() || t[a].size() != n)
        detail::fail("shift.transitions", "row " + std::to_string(a) + " must have " + std::to_string(n) + " entries");
      for (std::size_t b = 0; b < n; ++b) {
        const auto& x = t[a][b];
        if (!x.is_number_integer() || (x.get<long long>() != 0 && x.get<long long>() != 1))
          detail::fail("shift.transitions", "entries must be 0 or 1");
        adj[a][b] = x.get<long long>() == 1;
      }
    }
  }
  return MarkovShift(std::move(names), std::move(adj), side, std::move(tag));
}

// Throws on the first violation reported by validate().
inline void require_valid(const MarkovShift& shift) {
  const auto bad = validate(shift);
  if (bad.empty()) return;
  const bool stranded = bad[0].invariant.find("transition") != std::string::npos;
  throw Error(stranded ? ErrorKind::stranded_state : ErrorKind::parse,
              "shift: state \"" + bad[0].state + "\": " + bad[0].invariant);
}

inline Json shift_json(const MarkovShift& shift) {
  Json j;
  j["states"] = shift.names();
  Json rows = Json::array();
  for (State a = 0; a < shift.size(); ++a) {
    Json r = Json::array();
    for (State b = 0; b < shift.size(); ++b) r.push_back(shift.allowed(a, b) ? 1 : 0);
    rows.push_back(r);
  }
  j["transitions"] = rows;
  j["sidedness"] = shift.sidedness() == Sidedness::one_sided ? "one-sided" : "two-sided";
  if (shift.countable_tag()) j["countable"] = *shift.countable_tag();
  return j;
}

// {"type": "locally_constant", "left_radius", "right_radius",
//  "entries": [[[names...], value], ...], "default": value}
// {"type": "enveloped", "base": {...}, "envelope": {"kind", "C", "theta" | "alpha"}}
inline Potential parse_potential(const Json& j, std::shared_ptr<const MarkovShift> shift) {
  if (!j.is_object() || !j.contains("type")) detail::fail("potential", "missing key \"type\"");
  const auto& type = detail::get_string(j["type"], "potential.type");
  if (type == "enveloped") {
    detail::check_keys(j, "potential", {"type", "base", "envelope"});
    const Json& e = j["envelope"];
    if (!e.is_object() || !e.contains("kind")) detail::fail("potential.envelope", "missing key \"kind\"");
    const auto& kind = detail::get_string(e["kind"], "potential.envelope.kind");
    Envelope env;
    if (kind == "geometric") {
      detail::check_keys(e, "potential.envelope", {"kind", "C", "theta"});
      env = Envelope::geometric(detail::get_real(e["C"], "envelope.C"), detail::get_real(e["theta"], "envelope.theta"));
    } else if (kind == "power") {
      detail::check_keys(e, "potential.envelope", {"kind", "C", "alpha"});
      env = Envelope::power(detail::get_real(e["C"], "envelope.C"), detail::get_real(e["alpha"], "envelope.alpha"));
    } else {
      detail::fail("potential.envelope.kind", "expected \"geometric\" or \"power\"");
    }
    env.check();
    auto base = parse_potential(j["base"], std::move(shift));
    if (base.envelope()) detail::fail("potential.base", "nested envelopes are not allowed");
    return base.with_envelope(env);
  }
  if (type != "locally_constant") detail::fail("potential.type", "expected \"locally_constant\" or \"enveloped\"");
  detail::check_keys(j, "potential", {"type", "left_radius", "right_radius", "entries"}, {"default"});
  const std::size_t left = detail::get_count(j["left_radius"], "potential.left_radius");
  const std::size_t right = detail::get_count(j["right_radius"], "potential.right_radius");
  if (!j["entries"].is_array()) detail::fail("potential.entries", "expected an array");
  std::map<std::vector<State>, double> entries;
  for (const auto& e : j["entries"]) {
    if (!e.is_array() || e.size() != 2) detail::fail("potential.entries", "expected [[names...], value] pairs");
    auto w = detail::get_word(*shift, e[0], "potential.entries");
    const double v = detail::get_real(e[1], "potential.entries");
    if (!entries.emplace(w, v).second)
      detail::fail("potential.entries", "window \"" + shift->render(w) + "\" listed twice");
  }
  std::optional<double> fallback;
  if (j.contains("default")) fallback = detail::get_real(j["default"], "potential.default");
  return Potential::from_entries(std::move(shift), left, right, entries, fallback);
}

inline Json potential_json(const Potential& pot) {
  Json base;
  base["type"] = "locally_constant";
  base["left_radius"] = pot.left();
  base["right_radius"] = pot.right();
  Json entries = Json::array();
  pot.for_each_entry([&](std::span<const State> w, double v) { entries.push_back(Json::array({detail::word_json(pot.shift(), w), v})); });
  base["entries"] = entries;
  if (!pot.envelope()) return base;
  const Envelope& env = *pot.envelope();
  Json e;
  e["kind"] = env.kind == Envelope::Kind::geometric ? "geometric" : "power";
  e["C"] = env.scale;
  e[env.kind == Envelope::Kind::geometric ? "theta" : "alpha"] = env.rate;
  Json j;
  j["type"] = "enveloped";
  j["base"] = base;
  j["envelope"] = e;
  return j;
}

// {"kind": "bernoulli", "probabilities": [...]}
// {"kind": "markov", "order": r, "rows": [{"from": [r names], "next": [...]}, ...]}
// {"kind": "gibbs"}: the equilibrium measure of the job's potential, built by the caller.
struct MeasureSpec {
  bool gibbs = false;
  std::optional<CylinderMeasure> measure;
};

inline MeasureSpec parse_measure(const Json& j, std::shared_ptr<const MarkovShift> shift) {
  if (!j.is_object() || !j.contains("kind")) detail::fail("measure", "missing key \"kind\"");
  const auto& kind = detail::get_string(j["kind"], "measure.kind");
  MeasureSpec out;
  if (kind == "gibbs") {
    detail::check_keys(j, "measure", {"kind"});
    out.gibbs = true;
    return out;
  }
  if (kind == "bernoulli") {
    detail::check_keys(j, "measure", {"kind", "probabilities"});
    if (!j["probabilities"].is_array()) detail::fail("measure.probabilities", "expected an array");
    std::vector<double> p;
    for (const auto& x : j["probabilities"]) p.push_back(detail::get_real(x, "measure.probabilities"));
    out.measure = CylinderMeasure::bernoulli(std::move(shift), p);
    return out;
  }
  if (kind != "markov") detail::fail("measure.kind", "expected \"bernoulli\", \"markov\" or \"gibbs\"");
  detail::check_keys(j, "measure", {"kind", "order", "rows"});
  const std::size_t order = detail::get_count(j["order"], "measure.order");
  if (order == 0) detail::fail("measure.order", "must be at least 1");
  if (!j["rows"].is_array()) detail::fail("measure.rows", "expected an array");
  BlockSpace blocks(*shift, order);
  std::vector<Vector> rows(blocks.size());
  std::vector<bool> seen(blocks.size(), false);
  for (const auto& r : j["rows"]) {
    detail::check_keys(r, "measure.rows", {"from", "next"});
    const auto w = detail::get_word(*shift, r["from"], "measure.rows.from");
    const std::size_t v = w.size() == order ? blocks.index(w) : BlockSpace::none;
    if (v == BlockSpace::none)
      detail::fail("measure.rows.from", "\"" + shift->render(w) + "\" is not an admissible word of length " + std::to_string(order));
    if (seen[v]) detail::fail("measure.rows.from", "\"" + shift->render(w) + "\" listed twice");
    seen[v] = true;
    if (!r["next"].is_array()) detail::fail("measure.rows.next", "expected an array");
    for (const auto& x : r["next"]) rows[v].push_back(detail::get_real(x, "measure.rows.next"));
  }
  for (std::size_t v = 0; v < blocks.size(); ++v)
    if (!seen[v]) detail::fail("measure.rows", "missing row for \"" + shift->render(blocks.word(v)) + "\"");
  out.measure = CylinderMeasure::markov(std::move(shift), order, rows);
  return out;
}

// {"truncations": [[names...], ...]}
inline std::vector<std::vector<State>> parse_schedule(const Json& j, const MarkovShift& shift) {
  detail::check_keys(j, "schedule", {"truncations"});
  if (!j["truncations"].is_array() || j["truncations"].empty())
    detail::fail("schedule.truncations", "expected a nonempty array");
  std::vector<std::vector<State>> out;
  for (const auto& t : j["truncations"]) {
    auto w = detail::get_word(shift, t, "schedule.truncations");
    std::sort(w.begin(), w.end());
    if (std::adjacent_find(w.begin(), w.end()) != w.end()) detail::fail("schedule.truncations", "repeated state");
    out.push_back(std::move(w));
  }
  return out;
}

// Potential specification plus a "metadata" block.
inline Json reduction_json(const ReductionResult& r) {
  Json j = potential_json(r.one_sided);
  Json m;
  m["method"] = to_string(r.method);
  m["transfer_bound"] = number(r.transfer_bound);
  m["truncation_error"] = number(r.truncation_error);
  Json anchors = Json::object();
  for (const auto& [a, cyc] : r.anchors) anchors[r.one_sided.shift().name(a)] = detail::word_json(r.one_sided.shift(), cyc);
  m["anchors"] = anchors;
  m["depth"] = r.depth;
  if (r.method == ReductionMethod::coelho_quas) {
    m["first_level"] = r.first_level;
    Json sched = Json::array();
    for (const auto& l : r.schedule) sched.push_back({{"level", l.level}, {"n", l.n}, {"h_sup", number(l.h_sup)}});
    m["schedule"] = sched;
    m["variation_bound"] = number(r.variation_bound);
  }
  j["metadata"] = m;
  return j;
}

inline ReductionResult parse_reduction(const Json& j, std::shared_ptr<const MarkovShift> shift) {
  if (!j.is_object() || !j.contains("metadata")) detail::fail("reduction", "missing key \"metadata\"");
  Json pot = j;
  pot.erase("metadata");
  ReductionResult r;
  r.one_sided = parse_potential(pot, shift);
  const Json& m = j["metadata"];
  detail::check_keys(m, "reduction.metadata", {"method", "transfer_bound", "truncation_error", "anchors", "depth"},
                     {"first_level", "schedule", "variation_bound"});
  const auto& method = detail::get_string(m["method"], "metadata.method");
  if (method == "sinai")
    r.method = ReductionMethod::sinai;
  else if (method == "coelho-quas")
    r.method = ReductionMethod::coelho_quas;
  else
    detail::fail("metadata.method", "expected \"sinai\" or \"coelho-quas\"");
  auto real_or_inf = [](const Json& x, const std::string& where) {
    if (x.is_string() && x.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    return detail::get_real(x, where);
  };
  r.transfer_bound = real_or_inf(m["transfer_bound"], "metadata.transfer_bound");
  r.truncation_error = real_or_inf(m["truncation_error"], "metadata.truncation_error");
  r.depth = detail::get_count(m["depth"], "metadata.depth");
  if (!m["anchors"].is_object()) detail::fail("metadata.anchors", "expected an object");
  for (const auto& [name, cyc] : m["anchors"].items())
    r.anchors[detail::get_state(*shift, Json(name), "metadata.anchors")] = detail::get_word(*shift, cyc, "metadata.anchors");
  if (m.contains("first_level")) {
    if (!m["first_level"].is_number_integer()) detail::fail("metadata.first_level", "expected an integer");
    r.first_level = m["first_level"].get<int>();
  }
  if (m.contains("schedule")) {
    if (!m["schedule"].is_array()) detail::fail("metadata.schedule", "expected an array");
    for (const auto& l : m["schedule"]) {
      detail::check_keys(l, "metadata.schedule", {"level", "n", "h_sup"});
      if (!l["level"].is_number_integer()) detail::fail("metadata.schedule.level", "expected an integer");
      r.schedule.push_back({l["level"].get<int>(), detail::get_count(l["n"], "metadata.schedule.n"),
                            detail::get_real(l["h_sup"], "metadata.schedule.h_sup")});
    }
  }
  if (m.contains("variation_bound")) r.variation_bound = real_or_inf(m["variation_bound"], "metadata.variation_bound");
  return r;
}

}  // namespace tmsf::io
