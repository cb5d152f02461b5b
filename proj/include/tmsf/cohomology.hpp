#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmsf/error.hpp"
#include "tmsf/potential.hpp"
#include "tmsf/shift_space.hpp"

namespace tmsf {

enum class ReductionMethod { sinai, coelho_quas };

inline const char* to_string(ReductionMethod m) {
  return m == ReductionMethod::sinai ? "sinai" : "coelho-quas";
}

// One level of the Coelho-Quas schedule.
struct ScheduleLevel {
  int level = 0;          // i
  std::size_t n = 0;      // n_i
  double h_sup = 0.0;     // sup |h_i|, h_i = f_i - f_{i-1} >= 0
};

// Two-sided potential reduced to a cohomologous one-sided potential: input
// and one_sided o pi differ by a coboundary T - T o shift, T the transfer
// function.
struct ReductionResult {
  Potential one_sided;
  double transfer_bound = 0.0;    // certified sup |T|
  double truncation_error = 0.0;  // certified sup-norm of the per-step defect
  ReductionMethod method = ReductionMethod::sinai;
  // Sinai anchors: state a -> shortest cycle (a, c_1, ..., c_{p-1}); the left
  // tail z^a is its periodic repetition.
  std::map<State, std::vector<State>> anchors;
  std::size_t depth = 0;
  // Coelho-Quas data.
  int first_level = 0;  // i_0
  std::vector<ScheduleLevel> schedule;
  double variation_bound = 0.0;  // certified bound on sum_n var_n(one_sided)
};

namespace detail {

inline std::map<State, std::vector<State>> sinai_anchors(const MarkovShift& shift) {
  std::map<State, std::vector<State>> anchors;
  for (State a = 0; a < shift.size(); ++a) anchors[a] = shortest_cycle(shift, a);
  return anchors;
}

// Two-sided point given by its coordinates 0..k (`right`) and an
// eventually periodic left tail z^{right[0]}.
struct AnchoredPoint {
  std::span<const State> right;
  const std::vector<State>* cycle;  // anchor cycle of right[0]

  State at(long long m) const {
    if (m >= 0) return right[static_cast<std::size_t>(m)];
    const auto p = static_cast<long long>(cycle->size());
    return (*cycle)[static_cast<std::size_t>(((m % p) + p) % p)];
  }
};

// phi_hat at T^i of a two-sided point given as a coordinate accessor.
template <typename Point>
double value_at_shift(const Potential& pot, const Point& x, long long i, std::vector<State>& buf) {
  buf.resize(pot.width());
  const auto L = static_cast<long long>(pot.left());
  for (std::size_t j = 0; j < buf.size(); ++j) buf[j] = x.at(i - L + static_cast<long long>(j));
  return pot.at(buf);
}

inline void require_regular_for(const Potential& input, bool need_summable, const char* who) {
  const auto rep = classify_regularity(input, input.reach());
  if (need_summable && rep.summable != Certainty::yes)
    throw Error(ErrorKind::not_regular, std::string(who) + ": summable-variation certificate is " +
                                            to_string(rep.summable) + "; summable variations are required");
  if (!need_summable && rep.walters != Certainty::yes)
    throw Error(ErrorKind::not_regular,
                std::string(who) + ": Walters certificate is " + to_string(rep.walters) + "; input rejected");
}

}  // namespace detail

// Sinai's construction: h(x) = sum_{i>=0} [phi(T^i x) - phi(T^i xbar)] where
// xbar replaces the left half of x by the anchor tail z^{x_0}. Terms with
// i >= left radius vanish for tables, so depth >= left radius is exact.
inline ReductionResult sinai_reduce(const Potential& input, std::size_t depth) {
  if (depth == 0) throw Error(ErrorKind::precondition, "sinai_reduce: depth must be positive");
  detail::require_regular_for(input, false, "sinai_reduce");
  const MarkovShift& shift = input.shift();
  ReductionResult res;
  res.method = ReductionMethod::sinai;
  res.depth = depth;
  res.anchors = detail::sinai_anchors(shift);

  const std::size_t L = input.left(), R = input.right();
  const std::size_t terms = std::min(depth, L);

  double tail = 0.0;
  if (input.envelope()) {
    tail = input.envelope()->tail_sum(depth);
  } else {
    for (std::size_t i = depth; i < L; ++i) tail += left_variation(input, i);
  }
  res.truncation_error = 2.0 * tail;

  if (L == 0) {
    res.one_sided = input;
    res.transfer_bound = 0.0;
    return res;
  }

  std::vector<State> buf;
  // f(x) = phi(xbar) + H_D(T xbar), evaluated on x_0 .. x_{L+R}.
  auto one_sided = Potential::from_function(input.shift_ptr(), 0, L + R, [&](std::span<const State> x) {
    const detail::AnchoredPoint xbar{x, &res.anchors.at(x[0])};
    const detail::AnchoredPoint ybar{x.subspan(1), &res.anchors.at(x[1])};
    struct Shifted {
      const detail::AnchoredPoint* base;
      State at(long long m) const { return base->at(m + 1); }
    } y{&xbar};
    double v = detail::value_at_shift(input, xbar, 0, buf);
    for (std::size_t i = 0; i < terms; ++i) {
      const auto ii = static_cast<long long>(i);
      v += detail::value_at_shift(input, y, ii, buf) - detail::value_at_shift(input, ybar, ii, buf);
    }
    return v;
  });
  res.one_sided = std::move(one_sided);

  // sup |H_D| over all windows x_{-L} .. x_{L-1+R}, plus the omitted tail.
  double sup_h = 0.0;
  for_each_admissible_word(shift, 2 * L + R, [&](std::span<const State> w) {
    struct Full {
      std::span<const State> w;
      long long L;
      State at(long long m) const { return w[static_cast<std::size_t>(m + L)]; }
    } x{w, static_cast<long long>(L)};
    const detail::AnchoredPoint xbar{w.subspan(L), &res.anchors.at(w[L])};
    double h = 0.0;
    for (std::size_t i = 0; i < terms; ++i) {
      const auto ii = static_cast<long long>(i);
      h += detail::value_at_shift(input, x, ii, buf) - detail::value_at_shift(input, xbar, ii, buf);
    }
    sup_h = std::max(sup_h, std::abs(h));
  });
  res.transfer_bound = sup_h + tail;
  return res;
}

namespace detail {

// Infimum of the table over all windows sharing coordinates -rho..rho with
// the key (radius clipped to the table window).
class RadiusInf {
 public:
  RadiusInf(const Potential& pot, std::size_t rho) {
    rho_left_ = std::min(rho, pot.left());
    rho_right_ = std::min(rho, pot.right());
    pot.for_each_entry([&](std::span<const State> w, double v) {
      std::vector<State> key(w.begin() + static_cast<long>(pot.left() - rho_left_),
                             w.begin() + static_cast<long>(pot.left() + rho_right_ + 1));
      auto [it, fresh] = mins_.try_emplace(std::move(key), v);
      if (!fresh) it->second = std::min(it->second, v);
    });
  }

  // Value at the point whose coordinate 0 sits at word[center].
  double at(std::span<const State> word, std::size_t center) const {
    std::vector<State> key(word.begin() + static_cast<long>(center - rho_left_),
                           word.begin() + static_cast<long>(center + rho_right_ + 1));
    return mins_.at(key);
  }

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [k, v] : mins_) f(k, v);
  }

  std::size_t rho_left() const { return rho_left_; }

 private:
  std::size_t rho_left_ = 0, rho_right_ = 0;
  std::map<std::vector<State>, double> mins_;
};

}  // namespace detail

// Coelho-Quas construction: f_i = inf of f over the symmetric cylinder of
// radius n_i - 1, h_i = f_i - f_{i-1}, g(x) = I_{x_0} + sum_i h_i(T^{n_i-1} x).
inline ReductionResult coelho_quas_reduce(const Potential& input) {
  detail::require_regular_for(input, true, "coelho_quas_reduce");
  ReductionResult res;
  res.method = ReductionMethod::coelho_quas;
  const std::size_t reach = input.reach();
  if (input.envelope() && reach >= 1) res.truncation_error = 2.0 * input.envelope()->tail_sum(reach - 1);

  if (input.one_sided()) {
    // g = f, F = 0 already satisfies the cohomology equation.
    res.one_sided = input;
    return res;
  }

  std::vector<double> var(reach + 1);
  for (std::size_t n = 0; n <= reach; ++n) var[n] = variation(input, n);

  // n_i = smallest n >= 1 with var_n <= 2^-i; it qualifies only when also
  // var_{n-1} > 2^-i (var_0 is the full oscillation).
  auto level_n = [&](int i) -> std::optional<std::size_t> {
    const double eps = std::ldexp(1.0, -i);
    for (std::size_t n = 1; n <= reach; ++n)
      if (var[n] <= eps) {
        if (var[n - 1] > eps) return n;
        return std::nullopt;
      }
    return std::nullopt;
  };

  const detail::RadiusInf base(input, 0);  // I_{x_0}
  if (var[0] == 0.0) {
    res.first_level = 2;
    res.one_sided = Potential::from_function(input.shift_ptr(), 0, 0, [&](std::span<const State> x) {
      return base.at(x, 0);
    });
    return res;
  }

  int first = 0;
  while (!level_n(first)) ++first;  // terminates: var_0 > 0 and var_reach == 0
  res.first_level = std::max(first, 2);

  std::vector<std::size_t> ns;
  for (int i = res.first_level;; ++i) {
    auto n = level_n(i);
    if (!n) throw Error(ErrorKind::invariant, "coelho_quas_reduce: schedule gap at level " + std::to_string(i));
    ns.push_back(*n);
    if (var[*n] == 0.0) break;  // f_i == f from here on, all later h_i vanish
  }

  std::vector<detail::RadiusInf> infs;
  infs.reserve(ns.size());
  for (std::size_t n : ns) infs.emplace_back(input, n - 1);

  const std::size_t n_last = ns.back();
  const std::size_t out_right = 2 * (n_last - 1);
  std::vector<double> h_sup(ns.size(), 0.0);
  res.one_sided = Potential::from_function(input.shift_ptr(), 0, out_right, [&](std::span<const State> y) {
    double g = base.at(y, 0);
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const std::size_t center = ns[k] - 1;
      const double prev = k == 0 ? base.at(y, center) : infs[k - 1].at(y, center);
      const double hk = infs[k].at(y, center) - prev;
      h_sup[k] = std::max(h_sup[k], std::abs(hk));
      g += hk;
    }
    return g;
  });

  res.transfer_bound = 0.0;
  res.variation_bound = 0.0;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const int i = res.first_level + static_cast<int>(k);
    res.schedule.push_back({i, ns[k], h_sup[k]});
    res.transfer_bound += static_cast<double>(ns[k] - 1) * h_sup[k];
    // var_n(h_i o T^{n_i-1}) <= osc(h_i) <= sup h_i; the level estimate
    // 4 * 2^-i covers every level above the first.
    const double per_n = std::max(4.0 * std::ldexp(1.0, -i), h_sup[k]);
    res.variation_bound += 2.0 * static_cast<double>(ns[k]) * per_n;
  }
  // Remaining levels keep n_i = n_last: sum_{i > I} 8 n_last 2^-i.
  const int last = res.first_level + static_cast<int>(ns.size()) - 1;
  res.variation_bound += 8.0 * static_cast<double>(n_last) * std::ldexp(1.0, -last);
  return res;
}

struct CoboundaryReport {
  double max_defect = 0.0;      // max |input_n(w) - output_n(w)|
  std::size_t orbits_checked = 0;
  bool within_tolerance = true;  // defect <= n * truncation_error on every orbit
  std::vector<State> worst_orbit;
};

// Periodic-orbit test of the cohomology equation: coboundaries telescope to
// zero over every periodic orbit.
inline CoboundaryReport verify_coboundary(const Potential& input, const ReductionResult& reduced,
                                          std::size_t max_period) {
  CoboundaryReport rep;
  const MarkovShift& shift = input.shift();
  for (std::size_t n = 1; n <= max_period; ++n)
    for (State a = 0; a < shift.size(); ++a)
      for_each_cycle(shift, a, n, [&](std::span<const State> w) {
        // one representative per orbit: the lexicographically least rotation
        for (std::size_t r = 1; r < n; ++r)
          for (std::size_t j = 0; j < n; ++j) {
            const State rot = w[(r + j) % n];
            if (rot < w[j]) return;
            if (rot > w[j]) break;
          }
        const Word word{{w.begin(), w.end()}, 0};
        const double d = std::abs(birkhoff_sum(input, word, n, Boundary::periodic_wrap) -
                                  birkhoff_sum(reduced.one_sided, word, n, Boundary::periodic_wrap));
        ++rep.orbits_checked;
        if (d > rep.max_defect || rep.worst_orbit.empty()) {
          if (d >= rep.max_defect) rep.worst_orbit = word.letters;
          rep.max_defect = std::max(rep.max_defect, d);
        }
        if (d > static_cast<double>(n) * reduced.truncation_error + 1e-12 * (1.0 + std::abs(d)))
          rep.within_tolerance = false;
      });
  return rep;
}

}  // namespace tmsf
