#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "attacks/attacks.hpp"
#include "attacks/trace_io.hpp"
#include "core/error.hpp"
#include "support.hpp"

using namespace facebb;

namespace {

ToyEmbedderSpec spec8() {
  ToyEmbedderSpec s;
  s.input = {8, 8, 3};
  return s;
}

// A matching pair: target is the source plus small noise.
FacePair near_pair(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FacePair p;
  p.source = testutil::random_image(8, 8, 3, rng, 0.1, 0.9);
  p.target = p.source;
  std::normal_distribution<double> n(0.0, 0.02);
  for (double& v : p.target.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
  return p;
}

double d0_of(Oracle& o, const FacePair& p) {
  return feature_distance(o.embed_uncharged(p.source), o.embed_uncharged(p.target));
}

AttackConfig config_for(double d0, double eps, std::uint64_t seed, std::int64_t limit = 2000) {
  AttackConfig c;
  c.budget = EpsilonBudget(eps);
  c.query_limit = limit;
  c.d_b = d0 + 0.08;
  c.seed = seed;
  return c;
}

void check_invariants(const AttackTrace& t, const FacePair& p, const AttackConfig& c) {
  ASSERT_FALSE(t.steps.empty());
  EXPECT_LE(linf_diff(t.final_image, p.target), c.budget.epsilon_norm() + 1e-9) << t.attack;
  for (double v : t.final_image.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const std::int64_t limit =
      t.attack == "simba" && c.simba.budget_queries > 0 ? std::min(c.simba.budget_queries, c.query_limit)
                                                        : c.query_limit;
  EXPECT_LE(t.queries_used, limit) << t.attack;
  EXPECT_EQ(t.outcome == Outcome::Success, t.final_distance() >= c.d_b) << t.attack;
  EXPECT_EQ(t.steps.front().query_count, 1);
  for (std::size_t i = 1; i < t.steps.size(); ++i)
    EXPECT_GE(t.steps[i].query_count, t.steps[i - 1].query_count);
  EXPECT_LE(t.steps.back().query_count, t.queries_used);
  ASSERT_TRUE(t.magnitude.has_value());
  EXPECT_NEAR(*t.magnitude, l2_diff(t.final_image, p.target), 1e-15);
}

}  // namespace

class AttackProperties : public ::testing::TestWithParam<std::string> {};

TEST_P(AttackProperties, BallRangeBudgetAndOutcome) {
  ToyOracle o(spec8());
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const FacePair p = near_pair(seed);
    const double d0 = d0_of(o, p);
    for (double eps : {2.0, 10.0, 20.0}) {
      const AttackConfig c = config_for(d0, eps, seed, 600);
      const AttackTrace t = run_attack(GetParam(), p, o, c);
      check_invariants(t, p, c);
      EXPECT_DOUBLE_EQ(t.steps.front().distance, d0);
    }
  }
}

TEST_P(AttackProperties, SameSeedSameTrace) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(42);
  const AttackConfig c = config_for(d0_of(o, p), 16.0, 9, 500);
  const AttackTrace a = run_attack(GetParam(), p, o, c);
  const AttackTrace b = run_attack(GetParam(), p, o, c);
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_EQ(a.final_image, b.final_image);
  EXPECT_EQ(a.queries_used, b.queries_used);
}

TEST_P(AttackProperties, ZeroBudgetFails) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(3);
  const AttackConfig c = config_for(d0_of(o, p), 0.0, 1, 300);
  const AttackTrace t = run_attack(GetParam(), p, o, c);
  EXPECT_EQ(t.outcome, Outcome::Failure);
  EXPECT_EQ(t.final_image, p.target);
}

TEST_P(AttackProperties, NonMatchingPairIsRejected) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(4);
  AttackConfig c = config_for(d0_of(o, p), 10.0, 1);
  c.d_b = d0_of(o, p);  // d_0 >= d_b
  try {
    run_attack(GetParam(), p, o, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Precondition);
  }
}

TEST_P(AttackProperties, TinyQueryLimit) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(5);
  for (std::int64_t limit : {1, 2, 3, 7}) {
    const AttackConfig c = config_for(d0_of(o, p), 20.0, 2, limit);
    const AttackTrace t = run_attack(GetParam(), p, o, c);
    check_invariants(t, p, c);
  }
}

INSTANTIATE_TEST_SUITE_P(All, AttackProperties, ::testing::Values("nes", "bandits", "simba", "square"));

TEST(Attacks, GreedyAttacksNeverRegress) {
  ToyOracle o(spec8());
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const FacePair p = near_pair(100 + seed);
    AttackConfig c = config_for(d0_of(o, p), 12.0, seed, 1500);
    c.d_b = 1.99;  // unreachable, so the full budget is spent
    const AttackTrace simba = run_attack("simba", p, o, c);
    for (std::size_t i = 1; i < simba.steps.size(); ++i)
      EXPECT_GT(simba.steps[i].distance, simba.steps[i - 1].distance);
    const AttackTrace square = run_attack("square", p, o, c);
    // steps[1] is the stripe initialization, which may be worse than d_0
    for (std::size_t i = 2; i < square.steps.size(); ++i)
      EXPECT_GT(square.steps[i].distance, square.steps[i - 1].distance);
  }
}

TEST(Attacks, UnknownName) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(1);
  EXPECT_THROW(run_attack("fgsm", p, o, config_for(d0_of(o, p), 10, 0)), Error);
  EXPECT_TRUE(is_attack_name("square"));
  EXPECT_FALSE(is_attack_name("Square"));
}

TEST(Attacks, QueriesMatchOracleCalls) {
  for (const auto& name : attack_names()) {
    ToyOracle o(spec8());
    const FacePair p = near_pair(6);
    const AttackConfig c = config_for(d0_of(o, p), 14.0, 3, 400);
    const auto before = o.total_calls();
    const AttackTrace t = run_attack(name, p, o, c);
    // one uncharged call for the source embedding
    EXPECT_EQ(o.total_calls() - before, static_cast<std::uint64_t>(t.queries_used) + 1) << name;
  }
}

TEST(Nes, GradientOfLinearFunction) {
  std::mt19937_64 rng(1);
  const Image x = testutil::random_image(4, 4, 3, rng, 0.2, 0.8);
  std::vector<double> a(x.size());
  std::normal_distribution<double> n(0, 1);
  for (double& v : a) v = n(rng);
  const ObjectiveFn f = [&](const Image& img) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * img.data()[i];
    return s;
  };
  std::mt19937_64 r2(2);
  const auto g = nes_gradient_estimate(f, x, 4000, 1e-3, r2);
  double dot = 0, na = 0, ng = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * g[i];
    na += a[i] * a[i];
    ng += g[i] * g[i];
  }
  EXPECT_GT(dot / std::sqrt(na * ng), 0.9);
  EXPECT_THROW(nes_gradient_estimate(f, x, 3, 1e-3, r2), Error);
}

TEST(Nes, IterationCost) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(7);
  AttackConfig c = config_for(d0_of(o, p), 10.0, 1, 1 + 3 * 51 + 20);
  c.d_b = 1.99;
  const AttackTrace t = run_attack("nes", p, o, c);
  // d_0 plus three full iterations of 50 probes + 1 evaluation
  EXPECT_EQ(t.queries_used, 1 + 3 * 51);
  EXPECT_EQ(t.steps.size(), 4u);
}

TEST(Bandits, TilePriorUpsamplesNearestNeighbour) {
  TilePrior prior(8, 6, 1, 4);  // tiles: 2 x 2
  ASSERT_EQ(prior.size(), 4u);
  prior.values() = {1, 2, 3, 4};
  const auto up = prior.upsample();
  ASSERT_EQ(up.size(), 48u);
  EXPECT_EQ(up[0 * 6 + 0], 1);
  EXPECT_EQ(up[0 * 6 + 5], 2);
  EXPECT_EQ(up[7 * 6 + 0], 3);
  EXPECT_EQ(up[7 * 6 + 5], 4);
  const auto moved = prior.upsample({1, 1, 1, 1}, 0.5);
  EXPECT_EQ(moved[0], 1.5);
  EXPECT_EQ(TilePrior(8, 12, 3, 0).tile_size(), 2);
}

TEST(Square, PSchedule) {
  EXPECT_EQ(square_p_selection(0.8, 0, 10000), 0.8);
  EXPECT_EQ(square_p_selection(0.8, 10, 10000), 0.8);
  EXPECT_EQ(square_p_selection(0.8, 11, 10000), 0.4);
  EXPECT_EQ(square_p_selection(0.8, 600, 10000), 0.8 / 16);
  EXPECT_EQ(square_p_selection(0.8, 9999, 10000), 0.8 / 512);
  // rescaled to the query limit
  EXPECT_EQ(square_p_selection(0.8, 11, 1000), 0.8 / 4);
  for (std::int64_t i = 1; i < 10000; ++i)
    EXPECT_LE(square_p_selection(0.8, i, 10000), square_p_selection(0.8, i - 1, 10000));
}

TEST(Square, SpentBudgetSitsOnBallCorners) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(8);
  AttackConfig c = config_for(d0_of(o, p), 16.0, 4, 300);
  c.d_b = 1.99;
  const AttackTrace t = run_attack("square", p, o, c);
  const double e = c.budget.epsilon_norm();
  for (std::size_t i = 0; i < t.final_image.size(); ++i) {
    const double x0 = p.target.data()[i];
    const double x = t.final_image.data()[i];
    if (x0 >= e && x0 <= 1.0 - e) {
      EXPECT_TRUE(x == x0 + e || x == x0 - e) << i;
    }
  }
}

TEST(Simba, DctBasisIsOrthonormal) {
  const Image shape(4, 4, 3);
  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < shape.size(); ++k) dirs.push_back(simba_direction(shape, SimbaBasis::Dct, k));
  for (std::size_t a = 0; a < dirs.size(); a += 5)
    for (std::size_t b = 0; b < dirs.size(); b += 3) {
      double dot = 0;
      for (std::size_t i = 0; i < shape.size(); ++i) dot += dirs[a][i] * dirs[b][i];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12) << a << "," << b;
    }
  // pixel basis: one-hot, every pixel once
  std::set<std::size_t> hit;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const auto d = simba_direction(shape, SimbaBasis::Pixel, k);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i] != 0.0) hit.insert(i);
  }
  EXPECT_EQ(hit.size(), shape.size());
}

TEST(Simba, BudgetQueriesCapTheLimit) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(9);
  AttackConfig c = config_for(d0_of(o, p), 16.0, 4, 1000);
  c.d_b = 1.99;
  c.simba.budget_queries = 37;
  const AttackTrace t = run_attack("simba", p, o, c);
  EXPECT_LE(t.queries_used, 37);
  c.simba.basis = SimbaBasis::Dct;
  check_invariants(run_attack("simba", p, o, c), p, c);
}

TEST(TraceIo, RoundTrip) {
  ToyOracle o(spec8());
  const FacePair p = near_pair(10);
  AttackConfig c = config_for(d0_of(o, p), 12.0, 5, 300);
  c.simba.basis = SimbaBasis::Dct;
  AttackTrace t = run_attack("bandits", p, o, c);
  t.dssim = 0.125;
  std::stringstream ss;
  write_trace_jsonl(t, ss, {{"config_hash", "abc"}});
  const std::string text = ss.str();
  EXPECT_NE(text.find("\"config_hash\":\"abc\""), std::string::npos);
  const AttackTrace back = read_trace_jsonl(ss);
  EXPECT_EQ(back.attack, t.attack);
  EXPECT_EQ(back.steps, t.steps);
  EXPECT_EQ(back.outcome, t.outcome);
  EXPECT_EQ(back.queries_used, t.queries_used);
  EXPECT_EQ(back.magnitude, t.magnitude);
  EXPECT_EQ(back.dssim, t.dssim);
  EXPECT_EQ(config_to_json(back.config), config_to_json(t.config));

  // truncated file
  std::stringstream cut(text.substr(0, text.rfind('\n', text.size() - 2) + 1));
  EXPECT_THROW(read_trace_jsonl(cut), Error);
  std::stringstream empty;
  EXPECT_THROW(read_trace_jsonl(empty), Error);
}
