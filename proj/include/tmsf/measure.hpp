#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tmsf/error.hpp"
#include "tmsf/linalg.hpp"
#include "tmsf/shift_space.hpp"

namespace tmsf {

// Admissible words of a fixed length d, used as states of the sliding-window
// chain Y_t = x_{t-d+1} .. x_t. next(v, b) is the window after emitting b.
class BlockSpace {
 public:
  static constexpr std::size_t none = static_cast<std::size_t>(-1);

  BlockSpace() = default;
  BlockSpace(const MarkovShift& shift, std::size_t d) : d_(d), alphabet_(shift.size()) {
    if (d == 0) throw Error(ErrorKind::invariant, "BlockSpace: block length must be positive");
    words_ = admissible_words(shift, d);
    for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = i;
    next_.assign(words_.size() * alphabet_, none);
    std::vector<State> buf(d);
    for (std::size_t i = 0; i < words_.size(); ++i)
      for (State b : shift.successors(words_[i].back())) {
        std::copy(words_[i].begin() + 1, words_[i].end(), buf.begin());
        buf.back() = b;
        next_[i * alphabet_ + b] = index_.at(buf);
      }
  }

  std::size_t length() const noexcept { return d_; }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<State>& word(std::size_t i) const { return words_[i]; }
  const std::vector<std::vector<State>>& words() const noexcept { return words_; }

  std::size_t index(std::span<const State> w) const {
    auto it = index_.find(std::vector<State>(w.begin(), w.end()));
    return it == index_.end() ? none : it->second;
  }
  std::size_t next(std::size_t v, State b) const { return next_[v * alphabet_ + b]; }
  State last(std::size_t v) const { return words_[v].back(); }
  State first(std::size_t v) const { return words_[v].front(); }

 private:
  std::size_t d_ = 0;
  std::size_t alphabet_ = 0;
  std::vector<std::vector<State>> words_;
  std::map<std::vector<State>, std::size_t> index_;
  std::vector<std::size_t> next_;
};

enum class MeasureKind { bernoulli, markov, gibbs };

inline const char* to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::bernoulli: return "bernoulli";
    case MeasureKind::markov: return "markov";
    case MeasureKind::gibbs: return "gibbs";
  }
  return "markov";
}

// Shift-invariant measure given by a stationary chain on d-blocks:
// mu[w] = pi[w_0..w_{d-1}] * prod P(window -> next window).
class CylinderMeasure {
 public:
  CylinderMeasure() = default;

  CylinderMeasure(std::shared_ptr<const MarkovShift> shift, MeasureKind kind, BlockSpace blocks, Vector pi,
                  Matrix p)
      : shift_(std::move(shift)), kind_(kind), blocks_(std::move(blocks)), pi_(std::move(pi)), p_(std::move(p)) {}

  static CylinderMeasure bernoulli(std::shared_ptr<const MarkovShift> shift, std::span<const double> prob) {
    if (!shift->is_full())
      throw Error(ErrorKind::precondition, "bernoulli measure needs a full shift");
    if (prob.size() != shift->size())
      throw Error(ErrorKind::parse, "bernoulli: expected " + std::to_string(shift->size()) + " probabilities");
    check_distribution(prob, "bernoulli");
    BlockSpace blocks(*shift, 1);
    const std::size_t n = shift->size();
    Matrix p(n, n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) p(a, b) = prob[b];
    return CylinderMeasure(std::move(shift), MeasureKind::bernoulli, std::move(blocks),
                           Vector(prob.begin(), prob.end()), std::move(p));
  }

  // Order-r chain: rows[i] is the law of the next letter given the i-th
  // admissible r-word (lexicographic order).
  static CylinderMeasure markov(std::shared_ptr<const MarkovShift> shift, std::size_t order,
                                const std::vector<Vector>& rows) {
    if (order == 0) throw Error(ErrorKind::parse, "markov: order must be at least 1");
    BlockSpace blocks(*shift, order);
    if (rows.size() != blocks.size())
      throw Error(ErrorKind::parse, "markov: expected " + std::to_string(blocks.size()) + " rows for order " +
                                        std::to_string(order) + ", got " + std::to_string(rows.size()));
    Matrix p(blocks.size(), blocks.size());
    for (std::size_t v = 0; v < blocks.size(); ++v) {
      if (rows[v].size() != shift->size())
        throw Error(ErrorKind::parse, "markov: row " + std::to_string(v) + " has the wrong length");
      check_distribution(rows[v], "markov row");
      for (State b = 0; b < shift->size(); ++b) {
        if (rows[v][b] == 0.0) continue;
        const std::size_t u = blocks.next(v, b);
        if (u == BlockSpace::none)
          throw Error(ErrorKind::precondition, "markov: positive mass on forbidden transition " +
                                                   shift->render(blocks.word(v)) + " -> " + shift->name(b));
        p(v, u) = rows[v][b];
      }
    }
    Vector pi = stationary_vector(p);
    for (double x : pi)
      if (!(x >= 0.0)) throw Error(ErrorKind::precondition, "markov: chain has no unique stationary law");
    return CylinderMeasure(std::move(shift), MeasureKind::markov, std::move(blocks), std::move(pi), std::move(p));
  }

  const MarkovShift& shift() const { return *shift_; }
  const std::shared_ptr<const MarkovShift>& shift_ptr() const { return shift_; }
  MeasureKind kind() const noexcept { return kind_; }
  const BlockSpace& blocks() const noexcept { return blocks_; }
  const Vector& stationary() const noexcept { return pi_; }
  const Matrix& transition() const noexcept { return p_; }
  std::size_t order() const noexcept { return blocks_.length(); }

  // mu of the cylinder [w_0 .. w_{m-1}] at any position.
  double cylinder(std::span<const State> w) const {
    if (w.empty()) return 1.0;
    for (State s : w)
      if (s >= shift_->size()) return 0.0;
    const std::size_t d = blocks_.length();
    if (w.size() < d) {
      double m = 0.0;
      for (std::size_t v = 0; v < blocks_.size(); ++v)
        if (std::equal(w.begin(), w.end(), blocks_.word(v).begin())) m += pi_[v];
      return m;
    }
    std::size_t v = blocks_.index(w.first(d));
    if (v == BlockSpace::none) return 0.0;
    double m = pi_[v];
    for (std::size_t j = d; j < w.size() && m != 0.0; ++j) {
      const std::size_t u = blocks_.next(v, w[j]);
      if (u == BlockSpace::none) return 0.0;
      m *= p_(v, u);
      v = u;
    }
    return m;
  }

  // mu[u c] / mu[u], continuing the chain from the end of u.
  double conditional(std::span<const State> u, std::span<const State> c) const {
    const std::size_t d = blocks_.length();
    if (u.size() < d || c.empty()) {
      std::vector<State> uc(u.begin(), u.end());
      uc.insert(uc.end(), c.begin(), c.end());
      return cylinder(uc) / cylinder(u);
    }
    std::size_t v = blocks_.index(u.last(d));
    if (v == BlockSpace::none) return std::numeric_limits<double>::quiet_NaN();
    double m = 1.0;
    for (State b : c) {
      const std::size_t w = b < shift_->size() ? blocks_.next(v, b) : BlockSpace::none;
      if (w == BlockSpace::none) return 0.0;
      m *= p_(v, w);
      v = w;
    }
    return m;
  }

 private:
  static void check_distribution(std::span<const double> p, const char* what) {
    double s = 0.0;
    for (double x : p) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw Error(ErrorKind::parse, std::string(what) + ": probabilities must be finite and nonnegative");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorKind::parse, std::string(what) + ": probabilities must sum to 1");
  }

  std::shared_ptr<const MarkovShift> shift_;
  MeasureKind kind_ = MeasureKind::markov;
  BlockSpace blocks_;
  Vector pi_;
  Matrix p_;
};

struct EntropyReport {
  double direct = 0.0;    // -sum pi_v P_vu log P_vu
  double rokhlin = 0.0;   // -int log g dmu, g = pi_v P_vu / pi_u
};

inline EntropyReport entropy_both(const CylinderMeasure& mu) {
  EntropyReport r;
  const Matrix& p = mu.transition();
  const Vector& pi = mu.stationary();
  for (std::size_t v = 0; v < p.rows(); ++v)
    for (std::size_t u = 0; u < p.cols(); ++u) {
      const double m = pi[v] * p(v, u);
      if (m <= 0.0) continue;
      r.direct -= m * std::log(p(v, u));
      r.rokhlin -= m * std::log(m / pi[u]);
    }
  return r;
}

// Kolmogorov-Sinai entropy; both formulas must agree.
inline double entropy(const CylinderMeasure& mu) {
  const auto r = entropy_both(mu);
  if (std::abs(r.direct - r.rokhlin) > 1e-10)
    throw Error(ErrorKind::invariant,
                "entropy: direct and Rokhlin formulas disagree by " + std::to_string(std::abs(r.direct - r.rokhlin)));
  return r.direct;
}

}  // namespace tmsf
