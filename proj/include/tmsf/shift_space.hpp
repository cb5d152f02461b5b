#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tmsf/error.hpp"

namespace tmsf {

using State = std::size_t;

enum class Sidedness { one_sided, two_sided };

// Finite word over the state alphabet. For two-sided cylinders start_index
// is the coordinate of letters[0]; one-sided words start at 0.
struct Word {
  std::vector<State> letters;
  int start_index = 0;

  std::size_t size() const noexcept { return letters.size(); }
  int end_index() const noexcept { return start_index + static_cast<int>(letters.size()) - 1; }

  friend bool operator==(const Word&, const Word&) = default;
  friend auto operator<=>(const Word&, const Word&) = default;
};

// Topological Markov shift over a finite alphabet (possibly a truncation of
// a countable family, flagged by countable_tag).
class MarkovShift {
 public:
  MarkovShift() = default;

  MarkovShift(std::vector<std::string> states, std::vector<std::vector<bool>> transitions,
              Sidedness sidedness = Sidedness::one_sided,
              std::optional<std::string> countable_tag = std::nullopt)
      : names_(std::move(states)),
        adj_(std::move(transitions)),
        sidedness_(sidedness),
        countable_tag_(std::move(countable_tag)) {
    if (adj_.size() != names_.size())
      throw Error(ErrorKind::parse, "transition matrix has " + std::to_string(adj_.size()) +
                                        " rows but there are " + std::to_string(names_.size()) +
                                        " states");
    for (const auto& row : adj_)
      if (row.size() != names_.size())
        throw Error(ErrorKind::parse, "transition matrix is not square");
    succ_.resize(names_.size());
    pred_.resize(names_.size());
    for (State a = 0; a < names_.size(); ++a)
      for (State b = 0; b < names_.size(); ++b)
        if (adj_[a][b]) {
          succ_[a].push_back(b);
          pred_[b].push_back(a);
        }
  }

  static MarkovShift full(std::size_t n, Sidedness s = Sidedness::one_sided) {
    return MarkovShift(default_names(n), std::vector<std::vector<bool>>(n, std::vector<bool>(n, true)), s);
  }

  // States {0,1}, the word "11" forbidden.
  static MarkovShift golden_mean(Sidedness s = Sidedness::one_sided) {
    return MarkovShift(default_names(2), {{true, true}, {true, false}}, s);
  }

  // Deterministic rotation 0 -> 1 -> ... -> n-1 -> 0.
  static MarkovShift cycle(std::size_t n, Sidedness s = Sidedness::one_sided) {
    std::vector<std::vector<bool>> a(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) a[i][(i + 1) % n] = true;
    return MarkovShift(default_names(n), std::move(a), s);
  }

  static std::vector<std::string> default_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back(std::to_string(i));
    return names;
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(State s) const { return names_.at(s); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  Sidedness sidedness() const noexcept { return sidedness_; }
  const std::optional<std::string>& countable_tag() const noexcept { return countable_tag_; }

  bool allowed(State a, State b) const { return adj_[a][b]; }
  const std::vector<State>& successors(State a) const { return succ_[a]; }
  const std::vector<State>& predecessors(State a) const { return pred_[a]; }
  const std::vector<std::vector<bool>>& transitions() const noexcept { return adj_; }

  std::optional<State> index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<State>(it - names_.begin());
  }

  State require_state(const std::string& name) const {
    if (auto s = index_of(name)) return *s;
    throw Error(ErrorKind::precondition, "unknown state \"" + name + "\"");
  }

  bool is_full() const {
    for (const auto& row : adj_)
      for (bool b : row)
        if (!b) return false;
    return true;
  }

  std::string render(std::span<const State> letters, const char* sep = " ") const {
    std::string out;
    for (std::size_t i = 0; i < letters.size(); ++i) {
      if (i) out += sep;
      out += names_.at(letters[i]);
    }
    return out;
  }

  friend bool operator==(const MarkovShift& a, const MarkovShift& b) {
    return a.names_ == b.names_ && a.adj_ == b.adj_ && a.sidedness_ == b.sidedness_ &&
           a.countable_tag_ == b.countable_tag_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<bool>> adj_;
  std::vector<std::vector<State>> succ_;
  std::vector<std::vector<State>> pred_;
  Sidedness sidedness_ = Sidedness::one_sided;
  std::optional<std::string> countable_tag_;
};

struct Violation {
  std::string state;
  std::string invariant;
};

inline std::vector<Violation> validate(const MarkovShift& shift) {
  std::vector<Violation> out;
  if (shift.size() == 0) out.push_back({"", "alphabet is empty"});
  std::set<std::string> seen;
  for (const auto& n : shift.names())
    if (!seen.insert(n).second) out.push_back({n, "duplicate state identifier"});
  for (State s = 0; s < shift.size(); ++s) {
    if (shift.successors(s).empty()) out.push_back({shift.name(s), "no outgoing transition"});
    if (shift.predecessors(s).empty()) out.push_back({shift.name(s), "no incoming transition"});
  }
  return out;
}

inline bool is_admissible(const MarkovShift& shift, std::span<const State> letters) {
  for (State s : letters)
    if (s >= shift.size()) return false;
  for (std::size_t i = 0; i + 1 < letters.size(); ++i)
    if (!shift.allowed(letters[i], letters[i + 1])) return false;
  return true;
}

// Admissible as a periodic orbit: consecutive letters and the wrap-around.
inline bool is_admissible_cycle(const MarkovShift& shift, std::span<const State> letters) {
  return !letters.empty() && is_admissible(shift, letters) &&
         shift.allowed(letters.back(), letters.front());
}

namespace detail {

inline std::vector<bool> reachable(const MarkovShift& shift, State from, bool forward) {
  std::vector<bool> seen(shift.size(), false);
  std::vector<State> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    State v = stack.back();
    stack.pop_back();
    for (State w : forward ? shift.successors(v) : shift.predecessors(v))
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
  }
  return seen;
}

// BFS distances; forward = along transitions, otherwise against them.
inline std::vector<std::size_t> bfs_distances(const MarkovShift& shift, State from, bool forward) {
  constexpr auto inf = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(shift.size(), inf);
  std::queue<State> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    State v = q.front();
    q.pop();
    for (State w : forward ? shift.successors(v) : shift.predecessors(v))
      if (dist[w] == inf) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
  }
  return dist;
}

}  // namespace detail

// Strong connectivity of the transition digraph.
inline bool is_transitive(const MarkovShift& shift) {
  if (shift.size() == 0) return false;
  auto fwd = detail::reachable(shift, 0, true);
  auto bwd = detail::reachable(shift, 0, false);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

struct PeriodInfo {
  std::size_t period = 0;
  // classes[i] = C_i; every transition maps C_i into C_{i+1 mod p}.
  std::vector<std::vector<State>> classes;
};

// One BFS labels each state with its distance from state 0; the period is the
// gcd of level[u] + 1 - level[v] over all transitions u -> v.
inline PeriodInfo period_and_classes(const MarkovShift& shift) {
  if (!is_transitive(shift))
    throw Error(ErrorKind::not_transitive,
                "period_and_classes: shift is not topologically transitive "
                "(transition graph not strongly connected)");
  auto level = detail::bfs_distances(shift, 0, true);
  std::size_t g = 0;
  for (State u = 0; u < shift.size(); ++u)
    for (State v : shift.successors(u)) {
      const auto lu = static_cast<long long>(level[u]);
      const auto lv = static_cast<long long>(level[v]);
      g = std::gcd(g, static_cast<std::size_t>(std::llabs(lu + 1 - lv)));
    }
  PeriodInfo info;
  info.period = g;
  info.classes.resize(g);
  for (State s = 0; s < shift.size(); ++s) info.classes[level[s] % g].push_back(s);
  return info;
}

inline bool is_mixing(const MarkovShift& shift) {
  return is_transitive(shift) && period_and_classes(shift).period == 1;
}

inline void require_mixing(const MarkovShift& shift, const char* who) {
  if (!is_mixing(shift))
    throw Error(ErrorKind::not_mixing, std::string(who) + ": shift is not topologically mixing");
}

// Induced sub-system on `subset` (kept in the parent's state order); the
// transition relation is the restriction of the parent's.
inline MarkovShift sub_system(const MarkovShift& shift, std::span<const State> subset) {
  if (subset.empty()) throw Error(ErrorKind::precondition, "sub_system: empty subset");
  std::vector<State> kept(subset.begin(), subset.end());
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  for (State s : kept)
    if (s >= shift.size()) throw Error(ErrorKind::precondition, "sub_system: state out of range");
  std::vector<std::string> names;
  std::vector<std::vector<bool>> adj(kept.size(), std::vector<bool>(kept.size(), false));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    names.push_back(shift.name(kept[i]));
    for (std::size_t j = 0; j < kept.size(); ++j) adj[i][j] = shift.allowed(kept[i], kept[j]);
  }
  MarkovShift out(std::move(names), std::move(adj), shift.sidedness(), shift.countable_tag());
  for (State s = 0; s < out.size(); ++s) {
    if (out.successors(s).empty())
      throw Error(ErrorKind::stranded_state,
                  "sub_system: state \"" + out.name(s) + "\" has no outgoing transition inside the subset");
    if (out.predecessors(s).empty())
      throw Error(ErrorKind::stranded_state,
                  "sub_system: state \"" + out.name(s) + "\" has no incoming transition inside the subset");
  }
  return out;
}

// Calls f(word) for every admissible word of length n, lexicographically.
template <typename F>
void for_each_admissible_word(const MarkovShift& shift, std::size_t n, F&& f) {
  if (n == 0) return;
  std::vector<State> buf(n);
  auto rec = [&](auto& self, std::size_t pos) -> void {
    if (pos == n) {
      f(std::span<const State>(buf));
      return;
    }
    if (pos == 0) {
      for (State s = 0; s < shift.size(); ++s) {
        buf[0] = s;
        self(self, 1);
      }
    } else {
      for (State s : shift.successors(buf[pos - 1])) {
        buf[pos] = s;
        self(self, pos + 1);
      }
    }
  };
  rec(rec, 0);
}

inline std::vector<std::vector<State>> admissible_words(const MarkovShift& shift, std::size_t n) {
  std::vector<std::vector<State>> out;
  for_each_admissible_word(shift, n, [&](std::span<const State> w) { out.emplace_back(w.begin(), w.end()); });
  return out;
}

// Calls f(letters) for each closed admissible path a = x_0, ..., x_{n-1} with
// x_{n-1} -> x_0 allowed, in lexicographic order.
template <typename F>
void for_each_cycle(const MarkovShift& shift, State a, std::size_t n, F&& f) {
  if (a >= shift.size()) throw Error(ErrorKind::precondition, "for_each_cycle: unknown state");
  if (n == 0) return;
  // Prune with distance-to-a so only completable prefixes are explored.
  const auto to_a = detail::bfs_distances(shift, a, false);
  std::vector<State> buf(n);
  buf[0] = a;
  auto rec = [&](auto& self, std::size_t pos) -> void {
    if (pos == n) {
      if (shift.allowed(buf[n - 1], a)) f(std::span<const State>(buf));
      return;
    }
    for (State s : shift.successors(buf[pos - 1])) {
      // after placing s at pos, n - pos more steps must lead back to a
      if (to_a[s] > n - pos) continue;
      buf[pos] = s;
      self(self, pos + 1);
    }
  };
  rec(rec, 1);
}

inline std::vector<Word> enumerate_cycles(const MarkovShift& shift, State a, std::size_t n) {
  std::vector<Word> out;
  for_each_cycle(shift, a, n, [&](std::span<const State> w) { out.push_back({{w.begin(), w.end()}, 0}); });
  return out;
}

// Words a x_1 ... x_{n-1} with x_i != a and x_{n-1} -> a allowed: the orbit
// segments on which the first return time to [a] equals n.
template <typename F>
void for_each_first_return_word(const MarkovShift& shift, State a, std::size_t n, F&& f) {
  if (a >= shift.size()) throw Error(ErrorKind::precondition, "for_each_first_return_word: unknown state");
  if (n == 0) return;
  std::vector<State> buf(n);
  buf[0] = a;
  auto rec = [&](auto& self, std::size_t pos) -> void {
    if (pos == n) {
      if (shift.allowed(buf[n - 1], a)) f(std::span<const State>(buf));
      return;
    }
    for (State s : shift.successors(buf[pos - 1])) {
      if (s == a) continue;
      buf[pos] = s;
      self(self, pos + 1);
    }
  };
  rec(rec, 1);
}

inline std::vector<Word> enumerate_first_return_words(const MarkovShift& shift, State a, std::size_t n) {
  std::vector<Word> out;
  for_each_first_return_word(shift, a, n,
                             [&](std::span<const State> w) { out.push_back({{w.begin(), w.end()}, 0}); });
  return out;
}

// Lexicographically smallest among the shortest cycles through a, as the
// letter sequence a = c_0, c_1, ..., c_{p-1} (c_{p-1} -> a allowed).
inline std::vector<State> shortest_cycle(const MarkovShift& shift, State a) {
  const auto to_a = detail::bfs_distances(shift, a, false);
  std::size_t best = static_cast<std::size_t>(-1);
  for (State s : shift.successors(a))
    if (to_a[s] != static_cast<std::size_t>(-1)) best = std::min(best, to_a[s] + 1);
  if (best == static_cast<std::size_t>(-1))
    throw Error(ErrorKind::precondition,
                "no admissible cycle through state \"" + shift.name(a) + "\"");
  std::vector<State> cyc{a};
  State cur = a;
  for (std::size_t remaining = best; remaining > 1; --remaining) {
    for (State s : shift.successors(cur))
      if (to_a[s] == remaining - 1) {
        cyc.push_back(s);
        cur = s;
        break;
      }
  }
  return cyc;
}

// Checks that a truncation schedule is strictly usable: nonempty and nested.
inline void require_nested(std::span<const std::vector<State>> schedule) {
  if (schedule.empty()) throw Error(ErrorKind::precondition, "truncation schedule is empty");
  for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
    std::set<State> next(schedule[i + 1].begin(), schedule[i + 1].end());
    for (State s : schedule[i])
      if (!next.count(s))
        throw Error(ErrorKind::precondition,
                    "truncation schedule is not nested: element " + std::to_string(i) +
                        " is not contained in element " + std::to_string(i + 1));
  }
}

}  // namespace tmsf
