#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tmsf/error.hpp"
#include "tmsf/shift_space.hpp"

namespace tmsf {

// Declared upper bound V_n >= var_n of the untruncated potential.
struct Envelope {
  enum class Kind { geometric, power };
  Kind kind = Kind::geometric;
  double scale = 0.0;  // C
  double rate = 0.5;   // theta for geometric, alpha for power

  static Envelope geometric(double c, double theta) { return {Kind::geometric, c, theta}; }
  static Envelope power(double c, double alpha) { return {Kind::power, c, alpha}; }

  void check() const {
    if (!(scale >= 0.0) || !std::isfinite(scale))
      throw Error(ErrorKind::parse, "envelope scale must be finite and nonnegative");
    if (kind == Kind::geometric && !(rate > 0.0 && rate < 1.0))
      throw Error(ErrorKind::parse, "geometric envelope needs 0 < theta < 1");
    if (kind == Kind::power && !(rate > 0.0 && std::isfinite(rate)))
      throw Error(ErrorKind::parse, "power envelope needs alpha > 0");
  }

  double at(std::size_t n) const {
    const double x = static_cast<double>(n);
    return kind == Kind::geometric ? scale * std::pow(rate, x) : scale * std::pow(x, -rate);
  }

  bool summable() const { return kind == Kind::geometric || rate > 1.0 || scale == 0.0; }

  // Upper bound for sum_{j>k} V_j; +inf when the series diverges.
  double tail_sum(std::size_t k) const {
    if (scale == 0.0) return 0.0;
    if (kind == Kind::geometric) return scale * std::pow(rate, static_cast<double>(k + 1)) / (1.0 - rate);
    if (rate <= 1.0) return std::numeric_limits<double>::infinity();
    if (k == 0) return scale + scale / (rate - 1.0);
    // sum_{j>k} j^-a <= int_k^inf x^-a dx
    return scale * std::pow(static_cast<double>(k), 1.0 - rate) / (rate - 1.0);
  }

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

// Locally constant potential: phi(x) depends on x_{-left} .. x_{right}.
// One-sided potentials have left == 0.
class Potential {
 public:
  static constexpr std::size_t max_table_size = std::size_t{1} << 24;

  Potential() = default;

  template <typename F>
  static Potential from_function(std::shared_ptr<const MarkovShift> shift, std::size_t left,
                                 std::size_t right, F&& f) {
    Potential p(std::move(shift), left, right);
    for_each_admissible_word(*p.shift_, p.width(), [&](std::span<const State> w) {
      p.table_[p.code(w)] = static_cast<double>(f(w));
    });
    p.check_finite();
    return p;
  }

  // Entries keyed by window words; `fallback` fills windows not listed.
  static Potential from_entries(std::shared_ptr<const MarkovShift> shift, std::size_t left,
                                std::size_t right,
                                const std::map<std::vector<State>, double>& entries,
                                std::optional<double> fallback = std::nullopt) {
    Potential p(std::move(shift), left, right);
    for (const auto& [w, v] : entries) {
      if (w.size() != p.width())
        throw Error(ErrorKind::parse, "window \"" + p.shift_->render(w) + "\" has length " +
                                          std::to_string(w.size()) + ", expected " +
                                          std::to_string(p.width()));
      if (!is_admissible(*p.shift_, w))
        throw Error(ErrorKind::parse, "window \"" + p.shift_->render(w) + "\" is not admissible");
      p.table_[p.code(w)] = v;
    }
    for_each_admissible_word(*p.shift_, p.width(), [&](std::span<const State> w) {
      double& slot = p.table_[p.code(w)];
      if (std::isnan(slot)) {
        if (!fallback)
          throw Error(ErrorKind::parse,
                      "potential table misses admissible window \"" + p.shift_->render(w) + "\"");
        slot = *fallback;
      }
    });
    p.check_finite();
    return p;
  }

  static Potential constant(std::shared_ptr<const MarkovShift> shift, double c) {
    return from_function(std::move(shift), 0, 0, [c](auto) { return c; });
  }

  // phi(x) = log p_{x_0}
  static Potential log_weights(std::shared_ptr<const MarkovShift> shift, std::span<const double> p) {
    if (p.size() != shift->size()) throw Error(ErrorKind::parse, "log_weights: size mismatch");
    std::vector<double> w(p.begin(), p.end());
    return from_function(std::move(shift), 0, 0, [&](std::span<const State> x) { return std::log(w[x[0]]); });
  }

  const MarkovShift& shift() const { return *shift_; }
  const std::shared_ptr<const MarkovShift>& shift_ptr() const { return shift_; }
  std::size_t left() const noexcept { return left_; }
  std::size_t right() const noexcept { return right_; }
  std::size_t width() const noexcept { return left_ + right_ + 1; }
  bool one_sided() const noexcept { return left_ == 0; }
  // Smallest n with var_n == 0 for every table.
  std::size_t reach() const noexcept { return one_sided() ? width() : std::max(left_, right_) + 1; }

  const std::optional<Envelope>& envelope() const noexcept { return envelope_; }
  Potential with_envelope(std::optional<Envelope> env) const {
    Potential p = *this;
    if (env) env->check();
    p.envelope_ = env;
    return p;
  }

  // Value on a window word x_{-left} .. x_{right}.
  double at(std::span<const State> window) const {
    if (window.size() != width()) throw Error(ErrorKind::invariant, "Potential::at: window size mismatch");
    const double v = table_[code(window)];
    if (std::isnan(v))
      throw Error(ErrorKind::inadmissible, "window \"" + shift_->render(window) + "\" is not admissible");
    return v;
  }

  template <typename F>
  void for_each_entry(F&& f) const {
    for_each_admissible_word(*shift_, width(), [&](std::span<const State> w) { f(w, table_[code(w)]); });
  }

  double sup() const {
    double m = -std::numeric_limits<double>::infinity();
    for_each_entry([&](auto, double v) { m = std::max(m, v); });
    return m;
  }
  double inf() const {
    double m = std::numeric_limits<double>::infinity();
    for_each_entry([&](auto, double v) { m = std::min(m, v); });
    return m;
  }

  Potential plus(double c) const {
    Potential p = *this;
    for (double& v : p.table_)
      if (!std::isnan(v)) v += c;
    return p;
  }

  // Same function re-expressed with a wider window (extra coordinates ignored).
  Potential widened(std::size_t left, std::size_t right) const {
    if (left < left_ || right < right_) throw Error(ErrorKind::invariant, "widened: cannot shrink window");
    const std::size_t off = left - left_;
    return from_function(shift_, left, right,
                         [&](std::span<const State> w) { return at(w.subspan(off, width())); })
        .with_envelope(envelope_);
  }

  // phi o T^left: the same table read on x_0 .. x_{left+right}. Birkhoff sums
  // over periodic orbits are unchanged.
  Potential recentered() const {
    if (one_sided()) return *this;
    return from_function(shift_, 0, left_ + right_, [&](std::span<const State> w) { return at(w); })
        .with_envelope(envelope_);
  }

  // Table identity (same shift, window and values bit-for-bit).
  friend bool operator==(const Potential& a, const Potential& b) {
    if (!(*a.shift_ == *b.shift_) || a.left_ != b.left_ || a.right_ != b.right_ || a.envelope_ != b.envelope_)
      return false;
    for (std::size_t i = 0; i < a.table_.size(); ++i) {
      const double x = a.table_[i], y = b.table_[i];
      if (std::isnan(x) != std::isnan(y)) return false;
      if (!std::isnan(x) && x != y) return false;
    }
    return true;
  }

 private:
  Potential(std::shared_ptr<const MarkovShift> shift, std::size_t left, std::size_t right)
      : shift_(std::move(shift)), left_(left), right_(right) {
    if (!shift_) throw Error(ErrorKind::invariant, "Potential: null shift");
    if (shift_->sidedness() == Sidedness::one_sided && left_ != 0)
      throw Error(ErrorKind::parse, "one-sided shift cannot carry a potential with left_radius > 0");
    double size = std::pow(static_cast<double>(shift_->size()), static_cast<double>(width()));
    if (size > static_cast<double>(max_table_size))
      throw Error(ErrorKind::cap_exceeded, "potential table would need " + std::to_string(size) + " slots");
    table_.assign(static_cast<std::size_t>(size), std::numeric_limits<double>::quiet_NaN());
  }

  std::size_t code(std::span<const State> w) const {
    std::size_t c = 0;
    for (std::size_t i = w.size(); i-- > 0;) c = c * shift_->size() + w[i];
    return c;
  }

  void check_finite() const {
    for (double v : table_)
      if (!std::isnan(v) && !std::isfinite(v))
        throw Error(ErrorKind::parse, "potential values must be finite (sup phi < infinity)");
  }

  std::shared_ptr<const MarkovShift> shift_;
  std::size_t left_ = 0;
  std::size_t right_ = 0;
  std::vector<double> table_;
  std::optional<Envelope> envelope_;
};

// Restriction of a potential to a sub-system (states matched by name).
inline Potential restrict_to(const Potential& pot, std::shared_ptr<const MarkovShift> sub) {
  std::vector<State> to_parent(sub->size());
  for (State s = 0; s < sub->size(); ++s) to_parent[s] = pot.shift().require_state(sub->name(s));
  std::vector<State> buf(pot.width());
  return Potential::from_function(sub, pot.left(), pot.right(),
                                  [&](std::span<const State> w) {
                                    for (std::size_t i = 0; i < w.size(); ++i) buf[i] = to_parent[w[i]];
                                    return pot.at(buf);
                                  })
      .with_envelope(pot.envelope());
}

// Value at coordinate 0 of a word anchored at word.start_index.
inline double evaluate(const Potential& pot, const Word& word) {
  const int need_lo = -static_cast<int>(pot.left());
  const int need_hi = static_cast<int>(pot.right());
  if (word.letters.empty() || word.start_index > need_lo || word.end_index() < need_hi) {
    const int have_lo = word.start_index, have_hi = word.end_index();
    const int missing_left = word.letters.empty() ? static_cast<int>(pot.left()) : std::max(0, have_lo - need_lo);
    const int missing_right =
        word.letters.empty() ? static_cast<int>(pot.right()) + 1 : std::max(0, need_hi - have_hi);
    throw Error(ErrorKind::window_underflow,
                "window underflow: need " + std::to_string(missing_left) + " more coordinate(s) on the left and " +
                    std::to_string(missing_right) + " more on the right");
  }
  const std::size_t off = static_cast<std::size_t>(need_lo - word.start_index);
  return pot.at(std::span<const State>(word.letters).subspan(off, pot.width()));
}

enum class Boundary { periodic_wrap, error };

// phi_n(x) = sum_{i<n} phi(T^i x). Under periodic_wrap the word is one period
// of a periodic point anchored at coordinate 0.
inline double birkhoff_sum(const Potential& pot, const Word& word, std::size_t n, Boundary boundary) {
  if (n == 0) return 0.0;
  if (boundary == Boundary::periodic_wrap) {
    if (!is_admissible_cycle(pot.shift(), word.letters))
      throw Error(ErrorKind::inadmissible, "birkhoff_sum: \"" + pot.shift().render(word.letters) +
                                               "\" is not an admissible cycle");
    const std::size_t p = word.letters.size();
    std::vector<State> win(pot.width());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // coordinates i-left .. i+right, reduced mod p
      for (std::size_t j = 0; j < win.size(); ++j) {
        const long long c = static_cast<long long>(i) - static_cast<long long>(pot.left()) + static_cast<long long>(j);
        win[j] = word.letters[static_cast<std::size_t>(((c % static_cast<long long>(p)) + static_cast<long long>(p)) % static_cast<long long>(p))];
      }
      s += pot.at(win);
    }
    return s;
  }
  const int need_lo = -static_cast<int>(pot.left());
  const int need_hi = static_cast<int>(n) - 1 + static_cast<int>(pot.right());
  if (word.letters.empty() || word.start_index > need_lo || word.end_index() < need_hi)
    throw Error(ErrorKind::window_underflow,
                "window underflow: birkhoff sum of length " + std::to_string(n) + " needs coordinates " +
                    std::to_string(need_lo) + ".." + std::to_string(need_hi));
  if (!is_admissible(pot.shift(), word.letters))
    throw Error(ErrorKind::inadmissible, "birkhoff_sum: word is not admissible");
  double s = 0.0;
  const auto letters = std::span<const State>(word.letters);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(need_lo + static_cast<int>(i) - word.start_index);
    s += pot.at(letters.subspan(off, pot.width()));
  }
  return s;
}

namespace detail {

// sup |phi(x) - phi(y)| over admissible x, y agreeing on table positions
// [lo, hi] (clamped to the window); empty range means no agreement.
inline double oscillation_given(const Potential& pot, long long lo, long long hi) {
  lo = std::max(lo, 0LL);
  hi = std::min(hi, static_cast<long long>(pot.width()) - 1);
  std::map<std::vector<State>, std::pair<double, double>> groups;
  pot.for_each_entry([&](std::span<const State> w, double v) {
    std::vector<State> key;
    if (lo <= hi) key.assign(w.begin() + lo, w.begin() + hi + 1);
    auto [it, fresh] = groups.try_emplace(std::move(key), v, v);
    if (!fresh) {
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  });
  double best = 0.0;
  for (const auto& [k, mm] : groups) best = std::max(best, mm.second - mm.first);
  return best;
}

}  // namespace detail

// var_n: one-sided agreement on x_0..x_{n-1}; two-sided on x_{-n+1}..x_{n-1}.
// n == 0 gives the full oscillation sup - inf.
inline double variation(const Potential& pot, std::size_t n) {
  if (n == 0) return pot.sup() - pot.inf();
  const auto L = static_cast<long long>(pot.left());
  const auto m = static_cast<long long>(n);
  if (pot.one_sided()) {
    if (n >= pot.width()) return 0.0;
    return detail::oscillation_given(pot, 0, m - 1);
  }
  if (n >= pot.reach()) return 0.0;
  return detail::oscillation_given(pot, L - (m - 1), L + (m - 1));
}

// sup |phi(x) - phi(y)| over x, y agreeing on coordinates -i .. infinity.
inline double left_variation(const Potential& pot, std::size_t i) {
  if (i >= pot.left()) return 0.0;
  const auto L = static_cast<long long>(pot.left());
  return detail::oscillation_given(pot, L - static_cast<long long>(i), static_cast<long long>(pot.width()) - 1);
}

enum class Certainty { yes, no, unknown };

inline const char* to_string(Certainty c) {
  switch (c) {
    case Certainty::yes: return "yes";
    case Certainty::no: return "no";
    case Certainty::unknown: return "unknown";
  }
  return "unknown";
}

struct RegularityReport {
  std::vector<double> var_sequence;       // var_1 .. var_horizon of the table
  std::vector<double> envelope_sequence;  // V_1 .. V_horizon, empty without envelope
  double first_variation = 0.0;
  bool is_locally_constant = false;
  Certainty hoelder = Certainty::unknown;
  double hoelder_constant = 0.0;  // var_n <= C theta^n
  double hoelder_theta = 0.0;
  Certainty summable = Certainty::unknown;
  double summable_total = 0.0;  // certified bound on sum_{n>=1} var_n
  Certainty walters = Certainty::unknown;
  // walters_bound[k-1] >= sup_n var_{n+k}(phi_n) for k = 1..horizon
  std::vector<double> walters_bound;
};

inline RegularityReport classify_regularity(const Potential& pot, std::size_t horizon) {
  if (horizon < pot.reach())
    throw Error(ErrorKind::precondition, "classify_regularity: horizon " + std::to_string(horizon) +
                                             " is below the window reach " + std::to_string(pot.reach()));
  RegularityReport r;
  for (std::size_t n = 1; n <= horizon; ++n) r.var_sequence.push_back(variation(pot, n));
  r.first_variation = r.var_sequence.front();
  // Two-sided Birkhoff sums pick up tails on both ends.
  const double side_factor = pot.one_sided() ? 1.0 : 2.0;
  const auto& env = pot.envelope();
  if (!env) {
    r.is_locally_constant = true;
    r.hoelder = r.summable = r.walters = Certainty::yes;
    r.hoelder_theta = 0.5;
    for (std::size_t n = 1; n <= horizon; ++n)
      r.hoelder_constant = std::max(r.hoelder_constant, r.var_sequence[n - 1] * std::pow(2.0, static_cast<double>(n)));
    for (double v : r.var_sequence) r.summable_total += v;
    for (std::size_t k = 1; k <= horizon; ++k) {
      double tail = 0.0;
      for (std::size_t j = k + 1; j <= horizon; ++j) tail += r.var_sequence[j - 1];
      r.walters_bound.push_back(side_factor * tail);
    }
    return r;
  }
  for (std::size_t n = 1; n <= horizon; ++n) r.envelope_sequence.push_back(env->at(n));
  // An envelope below the tabulated variation cannot bound the ideal potential.
  for (std::size_t n = 1; n <= horizon; ++n)
    if (r.var_sequence[n - 1] > r.envelope_sequence[n - 1] * (1.0 + 1e-12) + 1e-300) return r;
  if (env->kind == Envelope::Kind::geometric) {
    r.hoelder = Certainty::yes;
    r.hoelder_constant = env->scale;
    r.hoelder_theta = env->rate;
  } else {
    r.hoelder = env->scale == 0.0 ? Certainty::yes : Certainty::no;
  }
  if (env->summable()) {
    r.summable = Certainty::yes;
    r.summable_total = env->tail_sum(0);
    r.walters = Certainty::yes;
    for (std::size_t k = 1; k <= horizon; ++k) r.walters_bound.push_back(side_factor * env->tail_sum(k));
  } else {
    r.summable = Certainty::no;
    r.walters = Certainty::unknown;
  }
  return r;
}

}  // namespace tmsf
