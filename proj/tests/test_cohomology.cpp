#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tmsf/cohomology.hpp"
#include "tmsf/thermo.hpp"

using namespace tmsf;
using oracle::share;

namespace {

Potential outer_indicator(std::shared_ptr<const MarkovShift> s) {
  return Potential::from_function(std::move(s), 1, 1, [](std::span<const State> w) { return w[0] == w[2] ? 1.0 : 0.0; });
}

std::vector<std::shared_ptr<const MarkovShift>> test_shifts() {
  return {share(MarkovShift::golden_mean(Sidedness::two_sided)), share(MarkovShift::full(2, Sidedness::two_sided)),
          share(MarkovShift({"a", "b", "c"}, {{true, true, false}, {false, true, true}, {true, false, true}},
                            Sidedness::two_sided))};
}

// Empirical sup |H_D| over windows of length 2L + R, from the definition.
double empirical_transfer(const Potential& phi, const ReductionResult& red) {
  const std::size_t L = phi.left(), R = phi.right();
  double sup = 0.0;
  for_each_admissible_word(phi.shift(), 2 * L + R, [&](std::span<const State> w) {
    const auto& cyc = red.anchors.at(w[L]);
    auto x = [&](long long m) { return w[static_cast<std::size_t>(m + static_cast<long long>(L))]; };
    auto xbar = [&](long long m) -> State {
      if (m >= 0) return w[static_cast<std::size_t>(m) + L];
      const long long p = static_cast<long long>(cyc.size());
      return cyc[static_cast<std::size_t>(((m % p) + p) % p)];
    };
    double h = 0.0;
    std::vector<State> win(phi.width());
    for (std::size_t i = 0; i < std::min(red.depth, L); ++i) {
      for (std::size_t j = 0; j < win.size(); ++j) win[j] = x(static_cast<long long>(i + j) - static_cast<long long>(L));
      h += phi.at(win);
      for (std::size_t j = 0; j < win.size(); ++j) win[j] = xbar(static_cast<long long>(i + j) - static_cast<long long>(L));
      h -= phi.at(win);
    }
    sup = std::max(sup, std::abs(h));
  });
  return sup;
}

}  // namespace

TEST(Sinai, OneSidedInputUnchanged) {
  auto s = share(MarkovShift::full(2, Sidedness::two_sided));
  auto phi = Potential::from_function(s, 0, 2, [](std::span<const State> w) { return 0.5 * w[0] + 0.25 * w[2]; });
  auto r = sinai_reduce(phi, 3);
  EXPECT_EQ(r.one_sided, phi);
  EXPECT_EQ(r.transfer_bound, 0.0);
  EXPECT_EQ(r.truncation_error, 0.0);
  EXPECT_EQ(verify_coboundary(phi, r, 5).max_defect, 0.0);
  auto again = sinai_reduce(r.one_sided, 1);
  EXPECT_EQ(again.one_sided, phi);
}

TEST(Sinai, ConstantInput) {
  auto s = share(MarkovShift::golden_mean(Sidedness::two_sided));
  auto c = Potential::from_function(s, 2, 1, [](auto) { return 0.375; });
  auto r = sinai_reduce(c, 2);
  EXPECT_EQ(r.transfer_bound, 0.0);
  r.one_sided.for_each_entry([](auto, double v) { EXPECT_EQ(v, 0.375); });
  EXPECT_EQ(verify_coboundary(c, r, 5).max_defect, 0.0);
}

TEST(Sinai, OuterIndicatorOnGoldenMean) {
  auto s = share(MarkovShift::golden_mean(Sidedness::two_sided));
  auto phi = outer_indicator(s);
  for (std::size_t depth : {1u, 2u}) {
    auto r = sinai_reduce(phi, depth);
    EXPECT_TRUE(r.one_sided.one_sided());
    EXPECT_LE(r.one_sided.right(), phi.left() + phi.right() + 1);
    EXPECT_EQ(r.truncation_error, 0.0);
    auto rep = verify_coboundary(phi, r, 5);
    EXPECT_EQ(rep.max_defect, 0.0);
    EXPECT_TRUE(rep.within_tolerance);
    EXPECT_EQ(oracle::max_periodic_defect(phi, r.one_sided, 6), 0);
  }
}

TEST(Sinai, AnchorsAreShortestCycles) {
  auto s = share(MarkovShift::golden_mean(Sidedness::two_sided));
  auto r = sinai_reduce(outer_indicator(s), 1);
  EXPECT_EQ(r.anchors.at(0), (std::vector<State>{0}));
  EXPECT_EQ(r.anchors.at(1), (std::vector<State>{1, 0}));
}

TEST(Sinai, MatchesRationalOracleTable) {
  std::mt19937_64 rng(101);
  for (const auto& s : test_shifts())
    for (int t = 0; t < 4; ++t) {
      const std::size_t L = 1 + t % 2, R = t / 2;
      auto phi = oracle::random_potential(rng, s, L, R);
      auto r = sinai_reduce(phi, L);
      const auto table = oracle::sinai_table(phi);
      std::size_t seen = 0;
      r.one_sided.for_each_entry([&](std::span<const State> w, double v) {
        EXPECT_EQ(oracle::Rational(v), table.at(std::vector<State>(w.begin(), w.end())));
        ++seen;
      });
      EXPECT_EQ(seen, table.size());
    }
}

TEST(Sinai, PropertiesOnRandomTables) {
  std::mt19937_64 rng(7);
  for (const auto& s : test_shifts())
    for (int t = 0; t < 6; ++t) {
      const std::size_t L = 1 + t % 2, R = t % 3;
      auto phi = oracle::random_potential(rng, s, L, R);
      for (std::size_t depth = 1; depth <= L + 1; ++depth) {
        auto r = sinai_reduce(phi, depth);
        // transfer bound dominates the empirical sup of |H_D|
        EXPECT_GE(r.transfer_bound + 1e-15, empirical_transfer(phi, r));
        EXPECT_LE(r.transfer_bound, static_cast<double>(std::max(depth, L)) * variation(phi, 1) + 1e-12);
        auto rep = verify_coboundary(phi, r, 6);
        EXPECT_TRUE(rep.within_tolerance) << "depth " << depth << " defect " << rep.max_defect;
        if (depth >= L) {
          EXPECT_EQ(r.truncation_error, 0.0);
          EXPECT_EQ(rep.max_defect, 0.0);
          EXPECT_EQ(oracle::max_periodic_defect(phi, r.one_sided, 6), 0);
        }
      }
    }
}

TEST(Sinai, PressureInvariance) {
  std::mt19937_64 rng(13);
  for (const auto& s : test_shifts()) {
    auto phi = oracle::random_potential(rng, s, 2, 1);
    auto r = sinai_reduce(phi, 2);
    // Z_n through periodic-orbit sums of the two-sided table
    auto z_two_sided = [&](std::size_t n) {
      double z = 0.0;
      for_each_cycle(*s, 0, n, [&](std::span<const State> w) {
        z += std::exp(birkhoff_sum(phi, Word{{w.begin(), w.end()}, 0}, n, Boundary::periodic_wrap));
      });
      return z;
    };
    for (std::size_t n = 1; n <= 8; ++n) EXPECT_NEAR(partition_sum(r.one_sided, 0, n), z_two_sided(n), 1e-12 * z_two_sided(n));
  }
}

TEST(Sinai, EnvelopedTruncation) {
  auto s = share(MarkovShift::full(2, Sidedness::two_sided));
  auto phi = Potential::from_function(s, 2, 0, [](std::span<const State> w) {
    return (w[0] == w[2] ? 1.0 : 0.0) + 0.5 * static_cast<double>(w[1] * w[2]);
  }).with_envelope(Envelope::geometric(4.0, 0.5));
  auto r = sinai_reduce(phi, 1);
  EXPECT_DOUBLE_EQ(r.truncation_error, 2.0 * Envelope::geometric(4.0, 0.5).tail_sum(1));
  auto rep = verify_coboundary(phi, r, 6);
  EXPECT_TRUE(rep.within_tolerance);
  EXPECT_GT(rep.max_defect, 0.0);

  auto bad = phi.with_envelope(Envelope::power(1.0, 0.5));
  try {
    sinai_reduce(bad, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_regular);
  }
}

TEST(CoelhoQuas, DependsOnX0Only) {
  auto s = share(MarkovShift::full(2, Sidedness::two_sided));
  auto f = Potential::from_function(s, 1, 1, [](std::span<const State> w) { return w[1] == 0 ? 0.25 : 0.75; });
  auto r = coelho_quas_reduce(f);
  EXPECT_EQ(r.one_sided.width(), 1u);
  EXPECT_EQ(r.transfer_bound, 0.0);
  const State a[] = {0}, b[] = {1};
  EXPECT_EQ(r.one_sided.at(a), 0.25);
  EXPECT_EQ(r.one_sided.at(b), 0.75);
}

TEST(CoelhoQuas, ConstantInput) {
  auto s = share(MarkovShift::golden_mean(Sidedness::two_sided));
  auto c = Potential::from_function(s, 1, 2, [](auto) { return -1.5; });
  auto r = coelho_quas_reduce(c);
  EXPECT_TRUE(r.schedule.empty());
  EXPECT_EQ(r.transfer_bound, 0.0);
  r.one_sided.for_each_entry([](auto, double v) { EXPECT_EQ(v, -1.5); });
}

TEST(CoelhoQuas, OneSidedInputUnchanged) {
  auto s = share(MarkovShift::full(2, Sidedness::two_sided));
  auto phi = Potential::from_function(s, 0, 1, [](std::span<const State> w) { return 0.5 * w[1]; });
  EXPECT_EQ(coelho_quas_reduce(phi).one_sided, phi);
}

TEST(CoelhoQuas, RandomTablesOnAllShifts) {
  std::mt19937_64 rng(31);
  for (const auto& s : test_shifts())
    for (int t = 0; t < 6; ++t) {
      const std::size_t L = 1 + t % 2, R = 1 + (t / 2) % 2;
      auto f = oracle::random_potential(rng, s, L, R);
      auto r = coelho_quas_reduce(f);
      EXPECT_TRUE(r.one_sided.one_sided());
      EXPECT_GE(r.first_level, 2);
      for (std::size_t i = 1; i < r.schedule.size(); ++i) {
        EXPECT_GE(r.schedule[i].n, r.schedule[i - 1].n);
        EXPECT_EQ(r.schedule[i].level, r.schedule[i - 1].level + 1);
      }
      EXPECT_EQ(oracle::max_periodic_defect(f, r.one_sided, 6), 0);
      EXPECT_EQ(verify_coboundary(f, r, 6).max_defect, 0.0);
      const std::size_t horizon = r.one_sided.width() + 2;
      double total = 0.0;
      for (std::size_t n = 1; n <= horizon; ++n) total += variation(r.one_sided, n);
      EXPECT_LE(total, r.variation_bound);
      double stated = 0.0;
      for (const auto& lv : r.schedule) stated += 8.0 * static_cast<double>(lv.n) * std::ldexp(1.0, -lv.level);
      stated += 8.0 * static_cast<double>(r.schedule.back().n) * std::ldexp(1.0, -r.schedule.back().level);
      EXPECT_DOUBLE_EQ(r.variation_bound, stated);  // values in [0, 1): no first-level correction
    }
}

TEST(CoelhoQuas, LargeFirstVariationKeepsBoundValid) {
  auto s = share(MarkovShift::full(2, Sidedness::two_sided));
  auto f = Potential::from_function(s, 1, 1, [](std::span<const State> w) { return 8.0 * w[0] + 4.0 * w[2]; });
  auto r = coelho_quas_reduce(f);
  double total = 0.0;
  for (std::size_t n = 1; n <= r.one_sided.width() + 2; ++n) total += variation(r.one_sided, n);
  EXPECT_LE(total, r.variation_bound);
  EXPECT_EQ(oracle::max_periodic_defect(f, r.one_sided, 6), 0);
}

TEST(CoelhoQuas, RejectsNonSummable) {
  auto s = share(MarkovShift::full(2, Sidedness::two_sided));
  auto f = Potential::constant(s, 0.0).with_envelope(Envelope::power(1.0, 1.0));
  try {
    coelho_quas_reduce(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_regular);
    EXPECT_NE(std::string(e.what()).find("no"), std::string::npos);
  }
}
