#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmsf/error.hpp"
#include "tmsf/linalg.hpp"
#include "tmsf/measure.hpp"
#include "tmsf/potential.hpp"
#include "tmsf/shift_space.hpp"

namespace tmsf {

namespace detail {

inline void require_one_sided(const Potential& pot, const char* who) {
  if (!pot.one_sided())
    throw Error(ErrorKind::precondition,
                std::string(who) + ": potential must be one-sided (left_radius 0); reduce it first");
}

}  // namespace detail

// Exact transfer matrix of a one-sided locally constant potential on
// d-blocks, d = max(right radius, 1): W(v, u) = exp phi(v . u_last).
struct TransferMatrix {
  BlockSpace blocks;
  Matrix w;
};

inline TransferMatrix transfer_matrix(const Potential& pot) {
  detail::require_one_sided(pot, "transfer_matrix");
  const std::size_t d = std::max<std::size_t>(pot.right(), 1);
  TransferMatrix t{BlockSpace(pot.shift(), d), Matrix()};
  t.w = Matrix(t.blocks.size(), t.blocks.size());
  std::vector<State> buf(d + 1);
  for (std::size_t v = 0; v < t.blocks.size(); ++v)
    for (State b : pot.shift().successors(t.blocks.last(v))) {
      std::copy(t.blocks.word(v).begin(), t.blocks.word(v).end(), buf.begin());
      buf[d] = b;
      t.w(v, t.blocks.next(v, b)) = std::exp(pot.at(std::span<const State>(buf).first(pot.width())));
    }
  return t;
}

// Z_n(phi, a): sum of exp phi_n over periodic points of period n in [a].
inline double partition_sum(const Potential& pot, State a, std::size_t n) {
  detail::require_one_sided(pot, "partition_sum");
  double z = 0.0;
  for_each_cycle(pot.shift(), a, n, [&](std::span<const State> w) {
    z += std::exp(birkhoff_sum(pot, Word{{w.begin(), w.end()}, 0}, n, Boundary::periodic_wrap));
  });
  return z;
}

// Z_n^*(phi, a): the same sum restricted to first returns to [a] at time n.
inline double first_return_sum(const Potential& pot, State a, std::size_t n) {
  detail::require_one_sided(pot, "first_return_sum");
  double z = 0.0;
  for_each_first_return_word(pot.shift(), a, n, [&](std::span<const State> w) {
    z += std::exp(birkhoff_sum(pot, Word{{w.begin(), w.end()}, 0}, n, Boundary::periodic_wrap));
  });
  return z;
}

struct LogPartitionSums {
  std::vector<double> log_z;       // log Z_n, n = 1..n_max (-inf when empty)
  std::vector<double> log_z_star;  // log Z_n^*
};

// Transfer-matrix route to the same sums: Z_n = sum_{v_0 = a} (W^n)_{vv} and
// Z_n^* = sum_{v_0 = a} ((W D)^{n-1} W)_{vv}, D masking blocks starting at a.
// Powers are rescaled so long horizons do not overflow.
inline LogPartitionSums log_partition_sums(const Potential& pot, State a, std::size_t n_max) {
  if (a >= pot.shift().size()) throw Error(ErrorKind::precondition, "partition sums: unknown state");
  const auto t = transfer_matrix(pot);
  const std::size_t n = t.blocks.size();
  Matrix wd = t.w;
  for (std::size_t u = 0; u < n; ++u)
    if (t.blocks.first(u) == a)
      for (std::size_t v = 0; v < n; ++v) wd(v, u) = 0.0;

  auto rescale = [](Matrix& m, double& log_scale) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (double x : m.row(i)) s = std::max(s, x);
    if (s == 0.0) return;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= s;
    log_scale += std::log(s);
  };
  auto log_or_minus_inf = [](double x, double scale) {
    return x > 0.0 ? std::log(x) + scale : -std::numeric_limits<double>::infinity();
  };

  LogPartitionSums out;
  Matrix pw = Matrix::identity(n), taboo = Matrix::identity(n);
  double pw_scale = 0.0, taboo_scale = 0.0;
  for (std::size_t k = 1; k <= n_max; ++k) {
    pw = pw * t.w;
    rescale(pw, pw_scale);
    double z = 0.0, zs = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (t.blocks.first(v) != a) continue;
      z += pw(v, v);
      for (std::size_t u = 0; u < n; ++u) zs += taboo(v, u) * t.w(u, v);
    }
    out.log_z.push_back(log_or_minus_inf(z, pw_scale));
    out.log_z_star.push_back(log_or_minus_inf(zs, taboo_scale));
    taboo = taboo * wd;
    rescale(taboo, taboo_scale);
  }
  return out;
}

struct PressureReport {
  State anchor = 0;
  double estimate = 0.0;
  std::vector<double> sequence;  // (1/n) log Z_n, n = 1..n_max; -inf kept
  double cauchy_gap = 0.0;
};

// Tail estimate for s_n = (1/n) log Z_n. With s_k = P + c/k + o(1/k) the
// quantity |s_k - s_n| k/(n-k) estimates |c|/n = |s_n - P|; the largest one
// over the last quarter, doubled, is reported.
inline double cauchy_gap(std::span<const double> seq) {
  const std::size_t n = seq.size();
  if (n == 0 || !std::isfinite(seq[n - 1])) return std::numeric_limits<double>::infinity();
  const std::size_t lo = (3 * n + 3) / 4;
  double gap = 0.0;
  bool any = false;
  for (std::size_t k = std::max<std::size_t>(lo, 1); k < n; ++k) {
    const double sk = seq[k - 1];
    if (!std::isfinite(sk)) continue;
    any = true;
    gap = std::max(gap, std::abs(sk - seq[n - 1]) * static_cast<double>(k) / static_cast<double>(n - k));
  }
  return any ? 2.0 * gap : std::numeric_limits<double>::infinity();
}

inline PressureReport gurevich_pressure(const Potential& pot, State a, std::size_t n_max) {
  detail::require_one_sided(pot, "gurevich_pressure");
  require_mixing(pot.shift(), "gurevich_pressure");
  if (n_max == 0) throw Error(ErrorKind::precondition, "gurevich_pressure: n_max must be positive");
  const auto sums = log_partition_sums(pot, a, n_max);
  PressureReport r;
  r.anchor = a;
  for (std::size_t n = 1; n <= n_max; ++n) r.sequence.push_back(sums.log_z[n - 1] / static_cast<double>(n));
  auto last = std::find_if(r.sequence.rbegin(), r.sequence.rend(), [](double x) { return std::isfinite(x); });
  if (last == r.sequence.rend())
    throw Error(ErrorKind::precondition, "gurevich_pressure: Z_n vanishes for every n <= " + std::to_string(n_max) +
                                             " at state \"" + pot.shift().name(a) + "\"");
  r.estimate = *last;
  r.cauchy_gap = cauchy_gap(r.sequence);
  return r;
}

struct SubsystemPressure {
  std::vector<PressureReport> reports;
  bool nondecreasing = true;     // raw estimates
  bool within_tolerance = true;  // nondecreasing up to the adjacent cauchy gaps
};

// Pressure of the restrictions to a nested family of mixing sub-systems.
inline SubsystemPressure pressure_via_subsystems(const Potential& pot,
                                                 std::span<const std::vector<State>> schedule, State a,
                                                 std::size_t n_max) {
  require_nested(schedule);
  SubsystemPressure out;
  for (const auto& subset : schedule) {
    if (std::find(subset.begin(), subset.end(), a) == subset.end())
      throw Error(ErrorKind::precondition,
                  "pressure_via_subsystems: truncation does not contain state \"" + pot.shift().name(a) + "\"");
    auto sub = std::make_shared<const MarkovShift>(sub_system(pot.shift(), subset));
    require_mixing(*sub, "pressure_via_subsystems");
    out.reports.push_back(gurevich_pressure(restrict_to(pot, sub), *sub->index_of(pot.shift().name(a)), n_max));
  }
  for (std::size_t i = 0; i + 1 < out.reports.size(); ++i) {
    const auto& p = out.reports[i];
    const auto& q = out.reports[i + 1];
    if (q.estimate < p.estimate) out.nondecreasing = false;
    if (q.estimate < p.estimate - (p.cauchy_gap + q.cauchy_gap)) out.within_tolerance = false;
  }
  return out;
}

// (L f)(u) = sum_{a u admissible} exp phi(a u) f(a u), with f indexed by the
// admissible words of length `depth` in lexicographic order.
inline Vector ruelle_apply(const Potential& pot, std::size_t depth, std::span<const double> f) {
  detail::require_one_sided(pot, "ruelle_apply");
  if (depth == 0 || pot.right() > depth)
    throw Error(ErrorKind::precondition, "ruelle_apply: potential memory " + std::to_string(pot.width()) +
                                             " exceeds vector depth " + std::to_string(depth) + " + 1");
  BlockSpace blocks(pot.shift(), depth);
  if (f.size() != blocks.size())
    throw Error(ErrorKind::precondition, "ruelle_apply: vector has " + std::to_string(f.size()) +
                                             " entries, depth " + std::to_string(depth) + " needs " +
                                             std::to_string(blocks.size()));
  Vector out(blocks.size(), 0.0);
  std::vector<State> y(depth + 1);
  for (std::size_t u = 0; u < blocks.size(); ++u) {
    const auto& x = blocks.word(u);
    std::copy(x.begin(), x.end(), y.begin() + 1);
    for (State a : pot.shift().predecessors(x[0])) {
      y[0] = a;
      const std::size_t v = blocks.index(std::span<const State>(y).first(depth));
      out[u] += std::exp(pot.at(std::span<const State>(y).first(pot.width()))) * f[v];
    }
  }
  return out;
}

// Perron data of the Ruelle operator on memory-cylinders.
struct RpfData {
  std::shared_ptr<const MarkovShift> shift;
  BlockSpace blocks;  // cylinders of length `memory`
  Matrix weights;     // W; L = W^T
  double lambda = 0.0;
  Vector h;           // L h = lambda h
  Vector nu;          // L* nu = lambda nu, sum nu = 1
  std::size_t memory = 1;
  double residual = 0.0;     // |L h - lambda h|_inf / lambda
  double nu_residual = 0.0;  // |L* nu - lambda nu|_inf / lambda
  std::size_t iterations = 0;
};

namespace detail {

// Power iteration x <- M x from the all-ones vector with sup-norm
// normalization; returns (lambda, x, residual, iterations).
struct PowerResult {
  double lambda = 0.0;
  Vector x;
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
};

inline PowerResult power_iterate(const Matrix& m, double tol, std::size_t max_iter) {
  PowerResult r;
  r.x.assign(m.rows(), 1.0);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Vector y = mat_vec(m, r.x);
    const double lam = sup_norm(y);
    if (!(lam > 0.0) || !std::isfinite(lam))
      throw Error(ErrorKind::invariant, "power iteration: operator annihilated the iterate");
    for (double& v : y) v /= lam;
    Vector my = mat_vec(m, y);
    double res = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) res = std::max(res, std::abs(my[i] - lam * y[i]));
    r.lambda = lam;
    r.x = std::move(y);
    r.residual = res / lam;
    r.iterations = it;
    if (r.residual <= tol) break;
  }
  // Rayleigh-free refinement: lambda from the converged eigenvector.
  const Vector mx = mat_vec(m, r.x);
  r.lambda = sup_norm(mx) / sup_norm(r.x);
  return r;
}

}  // namespace detail

inline RpfData rpf_solve(const Potential& pot, double tol = 1e-12, std::size_t max_iter = 200000) {
  detail::require_one_sided(pot, "rpf_solve");
  require_mixing(pot.shift(), "rpf_solve");
  if (!(tol > 0.0)) throw Error(ErrorKind::precondition, "rpf_solve: tolerance must be positive");
  auto t = transfer_matrix(pot);
  RpfData r;
  r.shift = pot.shift_ptr();
  r.memory = t.blocks.length();
  const Matrix lt = t.w.transposed();
  auto hres = detail::power_iterate(lt, tol, max_iter);
  auto nres = detail::power_iterate(t.w, tol, max_iter);
  if (hres.residual > tol || nres.residual > tol)
    throw Error(ErrorKind::non_convergence,
                "rpf_solve: no convergence after " + std::to_string(max_iter) +
                    " iterations; last residual " + std::to_string(std::max(hres.residual, nres.residual)));
  for (double v : hres.x)
    if (!(v > 0.0)) throw Error(ErrorKind::invariant, "rpf_solve: eigenfunction h is not strictly positive");
  for (double v : nres.x)
    if (!(v > 0.0)) throw Error(ErrorKind::invariant, "rpf_solve: eigenmeasure nu is not strictly positive");
  r.lambda = hres.lambda;
  r.nu = nres.x;
  const double nsum = sum(r.nu);
  for (double& v : r.nu) v /= nsum;
  r.h = hres.x;
  const double hn = dot(r.h, r.nu);
  for (double& v : r.h) v /= hn;
  r.iterations = std::max(hres.iterations, nres.iterations);

  const Vector lh = mat_vec(lt, r.h);
  const Vector lnu = mat_vec(t.w, r.nu);
  for (std::size_t i = 0; i < r.h.size(); ++i) {
    r.residual = std::max(r.residual, std::abs(lh[i] - r.lambda * r.h[i]));
    r.nu_residual = std::max(r.nu_residual, std::abs(lnu[i] - r.lambda * r.nu[i]));
  }
  r.residual /= r.lambda * sup_norm(r.h);
  r.nu_residual /= r.lambda * sup_norm(r.nu);
  r.blocks = std::move(t.blocks);
  r.weights = std::move(t.w);
  return r;
}

// dm = h dnu as a chain on memory-cylinders: P_vu = W_vu nu_u / (lambda nu_v).
inline CylinderMeasure gibbs_measure(const RpfData& rpf) {
  const std::size_t n = rpf.blocks.size();
  Matrix p(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    double row = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      p(v, u) = rpf.weights(v, u) * rpf.nu[u] / (rpf.lambda * rpf.nu[v]);
      row += p(v, u);
    }
    if (std::abs(row - 1.0) > 1e-8)
      throw Error(ErrorKind::invariant, "gibbs_measure: transition row sums to " + std::to_string(row));
    for (std::size_t u = 0; u < n; ++u) p(v, u) /= row;
  }
  Vector pi = stationary_vector(p);
  return CylinderMeasure(rpf.shift, MeasureKind::gibbs, rpf.blocks, std::move(pi), std::move(p));
}

// Jacobian of the Gibbs measure: g(v -> u) = W_vu h_v / (lambda h_u), which
// sums to 1 over the preimages of every window u.
inline Matrix gibbs_jacobian(const RpfData& rpf) {
  const std::size_t n = rpf.blocks.size();
  Matrix g(n, n);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t u = 0; u < n; ++u) g(v, u) = rpf.weights(v, u) * rpf.h[v] / (rpf.lambda * rpf.h[u]);
  return g;
}

// h(mu) + int phi dmu.
inline double pressure_functional(const CylinderMeasure& mu, const Potential& pot) {
  detail::require_one_sided(pot, "pressure_functional");
  if (!(mu.shift() == pot.shift()))
    throw Error(ErrorKind::precondition, "pressure_functional: measure and potential live on different shifts");
  double integral = 0.0;
  pot.for_each_entry([&](std::span<const State> w, double v) { integral += v * mu.cylinder(w); });
  return entropy(mu) + integral;
}

enum class RecurrenceMode { positive, null_suspected, transient_suspected, positive_suspected };

inline const char* to_string(RecurrenceMode m) {
  switch (m) {
    case RecurrenceMode::positive: return "positive-recurrent";
    case RecurrenceMode::null_suspected: return "null-recurrent-suspected";
    case RecurrenceMode::transient_suspected: return "transient-suspected";
    case RecurrenceMode::positive_suspected: return "positive-recurrent-suspected";
  }
  return "transient-suspected";
}

struct RecurrenceReport {
  RecurrenceMode mode = RecurrenceMode::positive;
  double lambda = 0.0;
  std::vector<double> z_partial;       // partial sums of lambda^-n Z_n
  std::vector<double> z_star_moment;   // partial sums of n lambda^-n Z_n^*
};

inline RecurrenceReport classify_recurrence(const Potential& pot, State a, std::size_t horizon,
                                            std::optional<double> lambda = std::nullopt) {
  if (horizon == 0) throw Error(ErrorKind::precondition, "classify_recurrence: horizon must be positive");
  RecurrenceReport r;
  r.lambda = lambda ? *lambda : rpf_solve(pot).lambda;
  if (!(r.lambda > 0.0) || !std::isfinite(r.lambda))
    throw Error(ErrorKind::precondition, "classify_recurrence: pressure is not finite");
  const auto sums = log_partition_sums(pot, a, horizon);
  const double ll = std::log(r.lambda);
  double s1 = 0.0, s2 = 0.0;
  std::vector<double> terms;
  for (std::size_t n = 1; n <= horizon; ++n) {
    const double nn = static_cast<double>(n);
    const double t = std::exp(sums.log_z[n - 1] - nn * ll);
    terms.push_back(t);
    s1 += t;
    s2 += nn * std::exp(sums.log_z_star[n - 1] - nn * ll);
    r.z_partial.push_back(s1);
    r.z_star_moment.push_back(s2);
  }
  if (!pot.shift().countable_tag()) {
    r.mode = RecurrenceMode::positive;  // compact shift
    return r;
  }
  // Heuristics on a truncation; never a certificate.
  const double peak = *std::max_element(terms.begin(), terms.end());
  const double half = r.z_star_moment[horizon / 2 > 0 ? horizon / 2 - 1 : 0];
  if (terms.back() < 0.01 * peak)
    r.mode = RecurrenceMode::transient_suspected;
  else if (s2 > 0.0 && (s2 - half) / s2 < 0.01)
    r.mode = RecurrenceMode::positive_suspected;
  else
    r.mode = RecurrenceMode::null_suspected;
  return r;
}

// Induced system on E = [a]: the return-time law mu_E(phi_a = n).
struct InducedSystem {
  std::shared_ptr<const CylinderMeasure> base;
  State state = 0;
  std::size_t horizon = 0;
  double mass = 0.0;                  // mu[a]
  std::vector<double> return_time;    // mu_E(phi_a = n), n = 1..horizon
  double survival = 0.0;              // mu_E(phi_a > horizon)
  std::size_t tail_step = 0;          // k in the tail estimate
  double tail_contraction = 1.0;      // q_k = max row sum of the taboo chain to the k
  double tail_sum = std::numeric_limits<double>::infinity();  // >= sum_{j>=H} mu_E(phi_a > j)
  bool certified = false;
};

namespace detail {

// Taboo chain: transitions into windows ending in a removed.
inline Matrix taboo_matrix(const CylinderMeasure& mu, State a) {
  Matrix q = mu.transition();
  for (std::size_t u = 0; u < q.cols(); ++u)
    if (mu.blocks().last(u) == a)
      for (std::size_t v = 0; v < q.rows(); ++v) q(v, u) = 0.0;
  return q;
}

inline Vector start_on(const CylinderMeasure& mu, State a) {
  Vector alpha(mu.blocks().size(), 0.0);
  for (std::size_t v = 0; v < alpha.size(); ++v)
    if (mu.blocks().last(v) == a) alpha[v] = mu.stationary()[v];
  return alpha;
}

}  // namespace detail

inline InducedSystem induce(std::shared_ptr<const CylinderMeasure> mu, State a, std::size_t horizon) {
  if (a >= mu->shift().size()) throw Error(ErrorKind::precondition, "induce: unknown state");
  InducedSystem s;
  s.base = mu;
  s.state = a;
  s.horizon = horizon;
  const State single[] = {a};
  s.mass = mu->cylinder(single);
  if (!(s.mass > 0.0))
    throw Error(ErrorKind::precondition, "induce: mu[" + mu->shift().name(a) + "] = 0");
  const Matrix& p = mu->transition();
  Vector alpha = detail::start_on(*mu, a);
  for (std::size_t n = 1; n <= horizon; ++n) {
    Vector next = vec_mat(alpha, p);
    double back = 0.0;
    for (std::size_t u = 0; u < next.size(); ++u)
      if (mu->blocks().last(u) == a) {
        back += next[u];
        next[u] = 0.0;
      }
    s.return_time.push_back(back / s.mass);
    alpha = std::move(next);
  }
  s.survival = sum(alpha) / s.mass;

  const Matrix q = detail::taboo_matrix(*mu, a);
  Matrix qk = q;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t k_max = 4 * q.rows() + 4;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double rs = max_row_sum(qk);
    if (rs < 1.0) {
      const double factor = static_cast<double>(k) / (1.0 - rs);
      if (factor < best) {
        best = factor;
        s.tail_step = k;
        s.tail_contraction = rs;
      }
    }
    qk = qk * q;
  }
  if (std::isfinite(best)) {
    s.certified = true;
    s.tail_sum = best * s.survival;
  }
  return s;
}

struct KacReport {
  double lhs = 0.0;   // sum_{n <= H} n mu_E(phi_a = n)
  double tail = 0.0;  // bound on the omitted part
  double rhs = 0.0;   // 1 / mu[a]
  double defect = 0.0;
  bool ok = false;
};

inline KacReport kac_check(const InducedSystem& s) {
  KacReport r;
  for (std::size_t n = 1; n <= s.return_time.size(); ++n) r.lhs += static_cast<double>(n) * s.return_time[n - 1];
  r.tail = static_cast<double>(s.horizon) * s.survival + s.tail_sum;
  r.rhs = 1.0 / s.mass;
  r.defect = std::abs(r.lhs - r.rhs);
  r.ok = s.certified && r.defect <= r.tail + 1e-9;
  return r;
}

struct AbramovReport {
  double induced_entropy_times_mass = 0.0;  // mu(E) h(mu_E, T_E), truncated at the horizon
  double induced_entropy = 0.0;
  double base_entropy = 0.0;
  double tail = 0.0;
  double defect = 0.0;
  bool ok = false;
};

// The induced entropy is the mean information of the return word: the sum of
// -log P over the steps of an excursion from [a], averaged under mu_E.
inline AbramovReport abramov_check(std::shared_ptr<const CylinderMeasure> mu, State a, std::size_t horizon) {
  const InducedSystem s = induce(mu, a, horizon);
  const Matrix& p = mu->transition();
  Vector info(p.rows(), 0.0);
  for (std::size_t v = 0; v < p.rows(); ++v)
    for (std::size_t u = 0; u < p.cols(); ++u)
      if (p(v, u) > 0.0) info[v] -= p(v, u) * std::log(p(v, u));
  const double info_max = sup_norm(info);

  AbramovReport r;
  Vector alpha = detail::start_on(*mu, a);
  for (std::size_t t = 1; t <= horizon; ++t) {
    r.induced_entropy_times_mass += dot(alpha, info);
    Vector next = vec_mat(alpha, p);
    for (std::size_t u = 0; u < next.size(); ++u)
      if (mu->blocks().last(u) == a) next[u] = 0.0;
    alpha = std::move(next);
  }
  r.induced_entropy = r.induced_entropy_times_mass / s.mass;
  r.base_entropy = entropy(*mu);
  r.tail = info_max * s.mass * s.tail_sum;
  if (info_max == 0.0) r.tail = 0.0;
  r.defect = std::abs(r.induced_entropy_times_mass - r.base_entropy);
  r.ok = (s.certified || r.tail == 0.0) && r.defect <= r.tail + 1e-9;
  return r;
}

}  // namespace tmsf
