#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tmsf/error.hpp"
#include "tmsf/linalg.hpp"
#include "tmsf/measure.hpp"
#include "tmsf/shift_space.hpp"

namespace tmsf {

inline constexpr std::size_t default_enumeration_cap = std::size_t{1} << 12;

// Partition of the alphabet: atom_of[s] is the atom containing letter s.
using Partition = std::vector<std::size_t>;

inline Partition natural_partition(const MarkovShift& shift) {
  Partition p(shift.size());
  for (State s = 0; s < shift.size(); ++s) p[s] = s;
  return p;
}

// Letters of S* stay separate, everything else is merged into one atom.
inline Partition coarsened_partition(const MarkovShift& shift, const std::set<State>& s_star) {
  Partition p(shift.size());
  std::size_t next = 0;
  for (State s = 0; s < shift.size(); ++s)
    if (s_star.count(s)) p[s] = next++;
  for (State s = 0; s < shift.size(); ++s)
    if (!s_star.count(s)) p[s] = next;
  return p;
}

namespace detail {

struct BetaScan {
  double beta = 0.0;
  double max_relative_deviation = 0.0;  // over pairs whose boundary letters lie in S*
};

inline std::size_t atom_count(const Partition& part) {
  std::size_t m = 0;
  for (auto a : part) m = std::max(m, a + 1);
  return m;
}

inline void check_cap(std::size_t atoms, std::size_t len, std::size_t cap, const char* who) {
  double need = std::pow(static_cast<double>(atoms), static_cast<double>(len));
  if (need > static_cast<double>(cap))
    throw Error(ErrorKind::cap_exceeded, std::string(who) + ": enumeration needs " + std::to_string(need) +
                                             " cylinders, cap is " + std::to_string(cap));
}

// Exact sum over A in alpha_{-n}^0, B in alpha_k^{k+n} of
// |mu(A & B) - mu(A) mu(B)|, through the window chain: mu(A & B) = a_A P^k c_B.
inline BetaScan beta_scan(const CylinderMeasure& mu, std::size_t k, std::size_t n, const Partition& part,
                          const std::set<State>* s_star, std::size_t cap) {
  if (k == 0) throw Error(ErrorKind::precondition, "weak_bernoulli_coefficient: gap k must be at least 1");
  if (part.size() != mu.shift().size()) throw Error(ErrorKind::precondition, "partition size mismatch");
  const std::size_t atoms = atom_count(part);
  check_cap(atoms, n + 1, cap, "weak_bernoulli_coefficient");
  BetaScan out;
  if (mu.kind() == MeasureKind::bernoulli) return out;  // independent blocks

  const BlockSpace& blocks = mu.blocks();
  const Matrix& p = mu.transition();
  const std::size_t N = blocks.size();
  const Matrix g = power(p, static_cast<unsigned>(k));

  auto filter = [&](Vector& x, std::size_t atom) {
    for (std::size_t v = 0; v < N; ++v)
      if (part[blocks.last(v)] != atom) x[v] = 0.0;
  };
  // atom words in lexicographic order
  std::vector<std::vector<std::size_t>> words;
  {
    std::vector<std::size_t> w(n + 1, 0);
    for (;;) {
      words.push_back(w);
      std::size_t i = n + 1;
      while (i > 0 && ++w[i - 1] == atoms) w[--i] = 0;
      if (i == 0) break;
    }
  }

  struct Side {
    Vector vec;
    double mass;
    bool boundary_in_star;
  };
  std::vector<Side> as, bs;
  for (const auto& w : words) {
    Vector a = mu.stationary();
    filter(a, w[0]);
    for (std::size_t j = 1; j <= n; ++j) {
      a = vec_mat(a, p);
      filter(a, w[j]);
    }
    const double ma = sum(a);
    // c(v) = P(letters at times 0..n fall in the atoms of w | Y_0 = v)
    Vector c(N, 1.0);
    filter(c, w[n]);
    for (std::size_t j = n; j-- > 0;) {
      c = mat_vec(p, c);
      filter(c, w[j]);
    }
    const double mb = dot(mu.stationary(), c);
    auto letter_in_star = [&](std::size_t atom) {
      if (!s_star) return false;
      for (State s : *s_star)
        if (part[s] == atom) return true;
      return false;
    };
    if (ma > 0.0) as.push_back({vec_mat(a, g), ma, letter_in_star(w[n])});
    if (mb > 0.0) bs.push_back({std::move(c), mb, letter_in_star(w[0])});
  }
  for (const auto& A : as)
    for (const auto& B : bs) {
      const double joint = dot(A.vec, B.vec);
      const double prod = A.mass * B.mass;
      out.beta += std::abs(joint - prod);
      if (A.boundary_in_star && B.boundary_in_star)
        out.max_relative_deviation = std::max(out.max_relative_deviation, std::abs(joint / prod - 1.0));
    }
  return out;
}

}  // namespace detail

// beta(k, n) for the partition `part` (natural partition by default).
inline double weak_bernoulli_coefficient(const CylinderMeasure& mu, std::size_t k, std::size_t n,
                                         const std::optional<Partition>& part = std::nullopt,
                                         std::size_t cap = default_enumeration_cap) {
  return detail::beta_scan(mu, k, n, part ? *part : natural_partition(mu.shift()), nullptr, cap).beta;
}

struct QuasiIndependence {
  double c_star = 1.0;
  std::vector<State> witness_left, witness_right;
  std::vector<std::string> violations;
  std::size_t pairs_tested = 0;
};

// Ratios mu[u c]/(mu[u] mu[c]) over admissible concatenations with
// |u|, |c| <= max_len whose last letter of u or first letter of c lies in S*.
inline QuasiIndependence quasi_independence(const CylinderMeasure& mu, const std::set<State>& s_star,
                                            std::size_t max_len, std::size_t cap = default_enumeration_cap) {
  const MarkovShift& shift = mu.shift();
  for (State s : s_star)
    if (s >= shift.size()) throw Error(ErrorKind::precondition, "quasi_independence: S* has an unknown state");
  if (max_len == 0) throw Error(ErrorKind::precondition, "quasi_independence: max_len must be positive");
  std::vector<std::vector<State>> words;
  for (std::size_t len = 1; len <= max_len; ++len) {
    detail::check_cap(shift.size(), len, cap, "quasi_independence");
    for_each_admissible_word(shift, len, [&](std::span<const State> w) { words.emplace_back(w.begin(), w.end()); });
  }
  std::vector<double> mass;
  for (const auto& w : words) mass.push_back(mu.cylinder(w));

  QuasiIndependence out;
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = 0; j < words.size(); ++j) {
      const auto& u = words[i];
      const auto& c = words[j];
      if (!shift.allowed(u.back(), c.front())) continue;
      if (!s_star.count(u.back()) && !s_star.count(c.front())) continue;
      ++out.pairs_tested;
      const double ratio = mu.conditional(u, c) / mass[j];
      if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        out.violations.push_back("[" + shift.render(u) + "] . [" + shift.render(c) + "] ratio " + std::to_string(ratio));
        continue;
      }
      const double dev = std::max(ratio, 1.0 / ratio);
      if (dev > out.c_star || out.witness_left.empty()) {
        out.c_star = std::max(out.c_star, dev);
        out.witness_left = u;
        out.witness_right = c;
      }
    }
  return out;
}

struct MixingReport {
  std::size_t k_max = 0, n_max = 0, max_len = 0;
  std::set<State> s_star;
  // beta[k-1][n] = beta(k, n) for the natural partition
  std::vector<std::vector<double>> beta;
  // same for the partition that merges letters outside S* (empty if S* is everything)
  std::vector<std::vector<double>> beta_coarse;
  std::vector<double> relative_deviation;  // per k at n = n_max
  std::vector<bool> strictly_decreasing;   // per n, in k
  std::optional<double> rho_hat;           // fitted decay of beta(k, n_max)
  QuasiIndependence quasi;
};

inline MixingReport mixing_report(const CylinderMeasure& mu, std::size_t k_max, std::size_t n_max,
                                  const std::set<State>& s_star, std::size_t max_len = 4,
                                  std::size_t cap = default_enumeration_cap) {
  if (k_max == 0) throw Error(ErrorKind::precondition, "mixing_report: k_max must be at least 1");
  MixingReport r;
  r.k_max = k_max;
  r.n_max = n_max;
  r.max_len = max_len;
  r.s_star = s_star;
  const Partition fine = natural_partition(mu.shift());
  const bool coarse = s_star.size() + 1 < mu.shift().size();
  const Partition merged = coarsened_partition(mu.shift(), s_star);
  for (std::size_t k = 1; k <= k_max; ++k) {
    std::vector<double> row, row_c;
    for (std::size_t n = 0; n <= n_max; ++n) {
      const auto scan = detail::beta_scan(mu, k, n, fine, &s_star, cap);
      row.push_back(scan.beta);
      if (n == n_max) r.relative_deviation.push_back(scan.max_relative_deviation);
      if (coarse) row_c.push_back(detail::beta_scan(mu, k, n, merged, nullptr, cap).beta);
    }
    r.beta.push_back(std::move(row));
    if (coarse) r.beta_coarse.push_back(std::move(row_c));
  }
  for (std::size_t n = 0; n <= n_max; ++n) {
    bool dec = true;
    for (std::size_t k = 1; k < k_max; ++k) dec = dec && r.beta[k][n] < r.beta[k - 1][n];
    r.strictly_decreasing.push_back(dec);
  }
  // least squares of log beta(k, n_max) against k
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double b = r.beta[k - 1][n_max];
    if (!(b > 0.0)) continue;
    const double x = static_cast<double>(k), y = std::log(b);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++m;
  }
  if (m >= 2) {
    const double md = static_cast<double>(m);
    const double den = md * sxx - sx * sx;
    if (den != 0.0) r.rho_hat = std::exp((md * sxy - sx * sy) / den);
  }
  r.quasi = quasi_independence(mu, s_star, max_len, cap);
  return r;
}

}  // namespace tmsf
