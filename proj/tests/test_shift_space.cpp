#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tmsf/shift_space.hpp"

using namespace tmsf;

namespace {

MarkovShift two_cycle() { return MarkovShift::cycle(2); }

MarkovShift disjoint_loops() { return MarkovShift({"0", "1"}, {{true, false}, {false, true}}); }

std::vector<std::string> render_all(const MarkovShift& s, const std::vector<Word>& ws) {
  std::vector<std::string> out;
  for (const auto& w : ws) out.push_back(s.render(w.letters, ""));
  return out;
}

// Random transitive shifts: a Hamiltonian cycle plus random extra edges.
MarkovShift random_transitive(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::vector<bool>> a(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) a[i][(i + 1) % n] = true;
  std::bernoulli_distribution coin(0.3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (coin(rng)) a[i][j] = true;
  return MarkovShift(MarkovShift::default_names(n), a);
}

}  // namespace

TEST(Validate, FullShiftIsClean) { EXPECT_TRUE(validate(MarkovShift::full(2)).empty()); }

TEST(Validate, GoldenMeanIsClean) { EXPECT_TRUE(validate(MarkovShift::golden_mean()).empty()); }

TEST(Validate, NamesStrandedState) {
  MarkovShift s({"a", "x"}, {{true, true}, {false, false}});
  auto v = validate(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].state, "x");
  EXPECT_NE(v[0].invariant.find("outgoing"), std::string::npos);
}

TEST(Validate, DuplicateNames) {
  MarkovShift s({"a", "a"}, {{true, true}, {true, true}});
  ASSERT_EQ(validate(s).size(), 1u);
}

TEST(Transitivity, Examples) {
  EXPECT_TRUE(is_transitive(MarkovShift::golden_mean()));
  EXPECT_FALSE(is_transitive(disjoint_loops()));
  EXPECT_TRUE(is_transitive(two_cycle()));
}

TEST(Mixing, Examples) {
  EXPECT_TRUE(is_mixing(MarkovShift::golden_mean()));
  EXPECT_FALSE(is_mixing(two_cycle()));
  EXPECT_TRUE(is_mixing(MarkovShift::full(3)));
  EXPECT_FALSE(is_mixing(disjoint_loops()));
}

TEST(Period, Examples) {
  auto p = period_and_classes(two_cycle());
  EXPECT_EQ(p.period, 2u);
  EXPECT_EQ(p.classes, (std::vector<std::vector<State>>{{0}, {1}}));
  EXPECT_EQ(period_and_classes(MarkovShift::golden_mean()).period, 1u);
  auto q = period_and_classes(MarkovShift::cycle(4));
  EXPECT_EQ(q.period, 4u);
  EXPECT_EQ(q.classes.size(), 4u);
  for (const auto& c : q.classes) EXPECT_EQ(c.size(), 1u);
}

TEST(Period, RejectsNonTransitive) {
  try {
    period_and_classes(disjoint_loops());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_transitive);
  }
}

TEST(SubSystem, Examples) {
  const auto g = MarkovShift::golden_mean();
  const State zero[] = {0};
  auto s0 = sub_system(g, zero);
  EXPECT_EQ(s0.size(), 1u);
  EXPECT_TRUE(s0.allowed(0, 0));

  const State one[] = {1};
  try {
    sub_system(g, one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::stranded_state);
    EXPECT_NE(std::string(e.what()).find("\"1\""), std::string::npos);
  }

  const State pair[] = {0, 1};
  auto s2 = sub_system(MarkovShift::full(3), pair);
  EXPECT_TRUE(s2.is_full());
  EXPECT_EQ(s2.size(), 2u);
}

TEST(SubSystem, Idempotent) {
  const auto s = MarkovShift::full(4);
  const State keep[] = {1, 3};
  auto once = sub_system(s, keep);
  const State all[] = {0, 1};
  EXPECT_EQ(sub_system(once, all), once);
}

TEST(Cycles, Examples) {
  const auto g = MarkovShift::golden_mean();
  EXPECT_EQ(render_all(g, enumerate_cycles(g, 0, 1)), (std::vector<std::string>{"0"}));
  EXPECT_EQ(render_all(g, enumerate_cycles(g, 0, 3)), (std::vector<std::string>{"000", "001", "010"}));
  EXPECT_TRUE(enumerate_cycles(two_cycle(), 0, 3).empty());
}

TEST(FirstReturn, Examples) {
  EXPECT_EQ(render_all(MarkovShift::full(2), enumerate_first_return_words(MarkovShift::full(2), 0, 2)),
            (std::vector<std::string>{"01"}));
  const auto g = MarkovShift::golden_mean();
  EXPECT_EQ(render_all(g, enumerate_first_return_words(g, 0, 2)), (std::vector<std::string>{"01"}));
  EXPECT_TRUE(enumerate_first_return_words(g, 0, 3).empty());
}

TEST(ShortestCycle, LexicographicTieBreak) {
  // 0 -> {1, 2}, 1 -> 0, 2 -> 0: two shortest cycles through 0, pick 0 1.
  MarkovShift s({"0", "1", "2"}, {{false, true, true}, {true, false, false}, {true, false, false}});
  EXPECT_EQ(shortest_cycle(s, 0), (std::vector<State>{0, 1}));
  EXPECT_EQ(shortest_cycle(MarkovShift::golden_mean(), 1), (std::vector<State>{1, 0}));
}

TEST(Nested, RejectsNonNested) {
  std::vector<std::vector<State>> ok{{0}, {0, 1}};
  EXPECT_NO_THROW(require_nested(ok));
  std::vector<std::vector<State>> bad{{0, 2}, {0, 1}};
  EXPECT_THROW(require_nested(bad), Error);
}

TEST(Properties, CycleCountMatchesMatrixPower) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 12; ++trial) {
    const auto s = random_transitive(rng, 2 + trial % 4);
    for (State a = 0; a < s.size(); ++a)
      for (unsigned n = 1; n <= 7; ++n)
        EXPECT_EQ(enumerate_cycles(s, a, n).size(), oracle::cycle_count(s, a, n));
  }
}

TEST(Properties, PeriodDividesCycleLengths) {
  std::mt19937_64 rng(29);
  std::vector<MarkovShift> shifts{MarkovShift::cycle(3), MarkovShift::cycle(5), two_cycle(),
                                  MarkovShift({"0", "1", "2", "3"},
                                              {{false, true, false, true},
                                               {true, false, true, false},
                                               {false, true, false, true},
                                               {true, false, true, false}})};
  for (int i = 0; i < 6; ++i) shifts.push_back(random_transitive(rng, 3 + i % 3));
  for (const auto& s : shifts) {
    const auto info = period_and_classes(s);
    EXPECT_EQ(is_mixing(s), info.period == 1);
    for (State u = 0; u < s.size(); ++u)
      for (State v : s.successors(u)) {
        std::size_t cu = 0, cv = 0;
        for (std::size_t c = 0; c < info.classes.size(); ++c)
          for (State x : info.classes[c]) {
            if (x == u) cu = c;
            if (x == v) cv = c;
          }
        EXPECT_EQ(cv, (cu + 1) % info.period);
      }
    for (State a = 0; a < s.size(); ++a)
      for (std::size_t n = 1; n <= 8; ++n)
        if (!enumerate_cycles(s, a, n).empty()) {
          EXPECT_EQ(n % info.period, 0u);
        }
  }
}

TEST(Properties, FirstReturnWordsAreNotPrefixes) {
  const auto s = MarkovShift::full(3);
  std::vector<Word> all;
  for (std::size_t n = 1; n <= 5; ++n) {
    auto ws = enumerate_first_return_words(s, 0, n);
    all.insert(all.end(), ws.begin(), ws.end());
  }
  for (const auto& w : all) {
    auto closed = w.letters;
    closed.push_back(0);
    EXPECT_TRUE(is_admissible(s, closed));
  }
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (i == j) continue;
      // the closed words w.a form a prefix code
      auto a = all[i].letters;
      auto b = all[j].letters;
      a.push_back(0);
      b.push_back(0);
      if (a.size() <= b.size()) {
        EXPECT_FALSE(std::equal(a.begin(), a.end(), b.begin()));
      }
    }
}

TEST(Properties, MixingImpliesTransitive) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    std::size_t n = 2 + i % 4;
    std::vector<std::vector<bool>> a(n, std::vector<bool>(n));
    std::bernoulli_distribution coin(0.4);
    for (auto& row : a)
      for (std::size_t j = 0; j < n; ++j) row[j] = coin(rng);
    MarkovShift s(MarkovShift::default_names(n), a);
    if (is_mixing(s)) {
      EXPECT_TRUE(is_transitive(s));
    }
  }
}
