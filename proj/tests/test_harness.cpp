#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "attacks/trace_io.hpp"
#include "core/error.hpp"
#include "harness/detail.hpp"
#include "harness/harness.hpp"
#include "support.hpp"
#include "survey/survey.hpp"

using namespace facebb;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ToyBenchmarkSpec small_spec(int match = 6, int nonmatch = 4) {
  ToyBenchmarkSpec s;
  s.seed = 3;
  s.matching_pairs = match;
  s.nonmatching_pairs = nonmatch;
  return s;
}

SweepConfig small_config(const fs::path& pairs, const fs::path& out) {
  SweepConfig cfg;
  cfg.pairs_file = pairs;
  cfg.output_dir = out;
  cfg.attacks = {"nes", "square"};
  cfg.epsilon_grid_255 = {12, 20};
  cfg.query_limit = 300;
  cfg.seed = 5;
  cfg.workers = 2;
  return cfg;
}

// Toy oracle that stops answering after a fixed number of embeds.
class DyingOracle final : public Oracle {
 public:
  DyingOracle(const ToyEmbedderSpec& spec, std::shared_ptr<std::atomic<int>> budget)
      : inner_(spec), budget_(std::move(budget)) {}
  InputDims input_dims() const override { return inner_.input_dims(); }
  int embed_dim() const override { return inner_.embed_dim(); }
  bool concurrency_safe() const override { return true; }

 protected:
  Embedding compute(const Image& img) override {
    if (budget_->fetch_sub(1) <= 0) fail(ErrorCode::Oracle, "oracle unreachable");
    return inner_.embed_uncharged(img);
  }

 private:
  ToyOracle inner_;
  std::shared_ptr<std::atomic<int>> budget_;
};

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  if (!fs::exists(dir)) return 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.path().extension() == ext) ++n;
  return n;
}

}  // namespace

TEST(Pairs, ReadsInOrderAndResolvesPaths) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(3, 2), dir.path());
  const auto recs = read_pair_records(csv);
  ASSERT_EQ(recs.size(), 5u);
  for (const auto& r : recs) EXPECT_TRUE(fs::exists(r.source_path)) << r.source_path;
  EXPECT_EQ(recs[0].label, 1);
  EXPECT_EQ(recs[4].label, 0);
  const auto pairs = load_pairs(csv);
  ASSERT_EQ(pairs.size(), 5u);
  const auto direct = make_toy_pairs(small_spec(3, 2));
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(testutil::pixels(pairs[i].source), testutil::pixels(direct[i].source));
    EXPECT_EQ(pairs[i].label, direct[i].label);
  }
}

TEST(Pairs, Errors) {
  testutil::TempDir dir;
  std::ofstream(dir / "empty.csv") << "source,target,label\n";
  EXPECT_TRUE(read_pair_records(dir / "empty.csv").empty());
  std::ofstream(dir / "bad_header.csv") << "a,b,c\n";
  EXPECT_THROW(read_pair_records(dir / "bad_header.csv"), Error);
  std::ofstream(dir / "bad_label.csv") << "source,target,label\nx.png,y.png,2\n";
  EXPECT_THROW(read_pair_records(dir / "bad_label.csv"), Error);
  std::ofstream(dir / "missing.csv") << "source,target,label\nnope.png,nope2.png,1\n";
  try {
    load_pairs(dir / "missing.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FileNotFound);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_pair_records(dir / "absent.csv"), Error);
}

TEST(Pairs, GrayBroadcast) {
  testutil::TempDir dir;
  std::mt19937_64 rng(1);
  save_image(testutil::random_quantized(4, 4, 1, rng), dir / "a.png");
  save_image(testutil::random_quantized(4, 4, 1, rng), dir / "b.png");
  std::ofstream(dir / "p.csv") << "source,target,label\na.png,b.png,1\n";
  EXPECT_EQ(load_pairs(dir / "p.csv")[0].source.channels(), 1);
  const auto rgb = load_pairs(dir / "p.csv", 3);
  EXPECT_EQ(rgb[0].source.channels(), 3);
  EXPECT_EQ(rgb[0].source.at(1, 2, 0), rgb[0].source.at(1, 2, 2));
}

TEST(ToyBenchmark, MatchingPairsAreCloser) {
  const auto pairs = make_toy_pairs(small_spec(20, 20));
  ToyOracle oracle({7, {8, 8, 3}, 128});
  double same = 0, diff = 0;
  for (const auto& p : pairs) {
    const double d = feature_distance(oracle.embed_uncharged(p.source), oracle.embed_uncharged(p.target));
    (p.label ? same : diff) += d / 20;
    for (double v : p.source.data()) {
      EXPECT_EQ(v, std::round(v * 255) / 255);
    }
  }
  EXPECT_LT(same, diff);
}

TEST(Config, ParsesFileAndRejectsUnknownKeys) {
  testutil::TempDir dir;
  std::ofstream(dir / "c.toml") << "# comment\n"
                                   "pairs = \"data/pairs.csv\"\n"
                                   "attacks = [\"nes\", \"simba\"]  # trailing\n"
                                   "epsilons = [10, 12.5]\n"
                                   "d_b = 0.9\n"
                                   "query_limit = 500\n"
                                   "[nes]\n"
                                   "population = 20\n"
                                   "[simba]\n"
                                   "step_255 = 4\n";
  const auto cfg = load_sweep_config(dir / "c.toml");
  EXPECT_EQ(cfg.pairs_file, dir / "data/pairs.csv");
  EXPECT_EQ(cfg.attacks, (std::vector<std::string>{"nes", "simba"}));
  EXPECT_EQ(cfg.epsilon_grid_255, (std::vector<double>{10, 12.5}));
  EXPECT_EQ(*cfg.d_b, 0.9);
  EXPECT_EQ(cfg.query_limit, 500);
  EXPECT_EQ(cfg.attack.nes.population, 20);
  EXPECT_DOUBLE_EQ(cfg.attack.simba.step, 4.0 / 255);

  std::ofstream(dir / "bad.toml") << "pairs = \"x\"\nbogus = 1\n";
  try {
    load_sweep_config(dir / "bad.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  SweepConfig c;
  EXPECT_THROW(apply_setting(c, "query_limit", "lots"), Error);
  apply_setting(c, "d_b", "auto");
  EXPECT_FALSE(c.d_b.has_value());
}

TEST(Config, HashIgnoresPlacementOnly) {
  SweepConfig a = small_config("p.csv", "out1");
  SweepConfig b = a;
  b.output_dir = "out2";
  b.workers = 7;
  b.surveys.push_back({"m.json", "v.csv"});
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 6;
  EXPECT_NE(config_hash(a), config_hash(b));
  b = a;
  b.attack.nes.sigma = 0.002;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, GridAndSeeds) {
  SweepConfig c;
  c.epsilon_grid_255 = {20, 12, 12};
  c.nes_extended = true;
  EXPECT_EQ(c.grid_for("square"), (std::vector<double>{12, 20}));
  EXPECT_EQ(c.grid_for("nes"), (std::vector<double>{10, 12, 20, 25, 30, 50}));
  EXPECT_NE(cell_seed(0, "nes", 12, 0), cell_seed(0, "nes", 12, 1));
  EXPECT_NE(cell_seed(0, "nes", 12, 0), cell_seed(0, "square", 12, 0));
  EXPECT_NE(cell_seed(0, "nes", 12, 0), cell_seed(0, "nes", 14, 0));
  EXPECT_EQ(cell_seed(9, "nes", 12, 3), cell_seed(9, "nes", 12, 3));
}

TEST(Config, SimbaBudget) {
  // step * sqrt(budget) ~ k * eps * sqrt(N)
  EXPECT_EQ(simba_budget_for(8, 192, 8.0 / 255, 1.0), 192);
  EXPECT_EQ(simba_budget_for(16, 192, 8.0 / 255, 1.0), 768);
  EXPECT_EQ(simba_budget_for(8, 192, 8.0 / 255, 0.5), 48);
  EXPECT_EQ(simba_budget_for(0, 192, 8.0 / 255, 1.0), 1);
}

TEST(Sweep, OneAttackOneEpsilonTwoPairs) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(2, 2), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  cfg.attacks = {"square"};
  cfg.epsilon_grid_255 = {20};
  cfg.d_b = 0.3;
  const auto r = run_sweep(cfg);
  EXPECT_EQ(r.d_b, 0.3);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].traces, r.eligible_pairs);
  EXPECT_EQ(r.eligible_pairs + r.skipped_pairs, 4u);
  EXPECT_EQ(r.computed_cells, r.eligible_pairs);
  const auto lines = lines_of(r.summary_csv);
  ASSERT_GE(lines.size(), 4u);
  EXPECT_EQ(lines[0], "# seed=5 config_hash=" + r.config_hash);
  EXPECT_EQ(lines[2], summary_csv_header());
  EXPECT_EQ(lines[3].rfind("square,20.000000,", 0), 0u) << lines[3];
  EXPECT_EQ(lines.back().rfind("# skipped_pairs=", 0), 0u);
  EXPECT_FALSE(fs::exists(dir / "out" / "pr_curve.csv"));

  // every trace obeys the ball and the halting rule
  for (const auto& e : fs::recursive_directory_iterator(dir / "out" / "traces")) {
    if (e.path().extension() != ".jsonl") continue;
    const AttackTrace t = read_trace_jsonl(e.path());
    EXPECT_EQ(t.outcome == Outcome::Success, t.final_distance() >= 0.3);
    EXPECT_LE(t.queries_used, 300);
    EXPECT_EQ(read_trace_header(e.path()).at("config_hash"), r.config_hash);
  }
}

TEST(Sweep, AutoThresholdWritesCurve) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  cfg.attacks = {"nes"};
  cfg.epsilon_grid_255 = {20};
  const auto r = run_sweep(cfg);
  const auto curve = lines_of(dir / "out" / "pr_curve.csv");
  ASSERT_GE(curve.size(), 3u);
  EXPECT_EQ(curve[0].rfind("# seed=5", 0), 0u);
  EXPECT_EQ(curve[1], "threshold,precision,recall,f1");
  const auto info = harness_detail::read_run_info(dir / "out");
  ASSERT_TRUE(info.has_value());
  EXPECT_TRUE(info->d_b_selected);
  EXPECT_EQ(info->d_b, r.d_b);
}

TEST(Sweep, ResumeSkipsFinishedCells) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  const auto first = run_sweep(cfg);
  EXPECT_EQ(first.resumed_cells, 0u);
  const std::string summary = slurp(first.summary_csv);

  // drop two traces, then resume
  std::vector<fs::path> traces;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out" / "traces"))
    if (e.path().extension() == ".jsonl") traces.push_back(e.path());
  std::sort(traces.begin(), traces.end());
  fs::remove(traces[0]);
  fs::remove(traces[3]);
  const auto second = run_sweep(cfg);
  EXPECT_EQ(second.computed_cells, 2u);
  EXPECT_EQ(second.resumed_cells, first.computed_cells - 2);
  EXPECT_EQ(slurp(second.summary_csv), summary);
}

TEST(Sweep, HashMismatchIsRefused) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(3, 2), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  cfg.attacks = {"square"};
  cfg.epsilon_grid_255 = {20};
  run_sweep(cfg);
  cfg.seed = 99;
  try {
    run_sweep(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Precondition);
  }
}

TEST(Sweep, OracleOutageKeepsFinishedTraces) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  cfg.d_b = 0.3;
  cfg.workers = 1;
  const auto pairs = load_pairs(csv);
  const ToyEmbedderSpec spec{cfg.oracle.toy_seed, {8, 8, 3}, cfg.oracle.toy_embed_dim};
  auto budget = std::make_shared<std::atomic<int>>(400);
  const OracleFactory dying = [&] { return std::unique_ptr<Oracle>(std::make_unique<DyingOracle>(spec, budget)); };
  try {
    run_sweep(cfg, dying);
    FAIL() << "expected the outage to surface";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Oracle);
  }
  const std::size_t partial = count_files(dir / "out" / "traces", ".jsonl");
  EXPECT_GT(partial, 0u);
  for (const auto& e : fs::recursive_directory_iterator(dir / "out" / "traces"))
    if (e.path().extension() == ".jsonl") {
      EXPECT_NO_THROW(read_trace_jsonl(e.path()));
    }

  // a healthy oracle finishes the rest without redoing the saved cells
  const auto done = run_sweep(cfg);
  EXPECT_EQ(done.resumed_cells, partial);
  EXPECT_EQ(done.computed_cells + done.resumed_cells, 2 * 2 * done.eligible_pairs);
}

TEST(Sweep, NoEligiblePairs) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(2, 2), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  cfg.d_b = 1e-9;
  try {
    run_sweep(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Precondition);
  }
  EXPECT_TRUE(fs::exists(dir / "out" / "run.json"));
}

TEST(Sweep, DeterministicAcrossWorkerCounts) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(), dir / "data");
  SweepConfig a = small_config(csv, dir / "a");
  a.workers = 1;
  SweepConfig b = small_config(csv, dir / "b");
  b.workers = 3;
  EXPECT_EQ(slurp(run_sweep(a).summary_csv), slurp(run_sweep(b).summary_csv));
  EXPECT_EQ(slurp(dir / "a" / "fig_succ_eps.csv"), slurp(dir / "b" / "fig_succ_eps.csv"));
  EXPECT_EQ(slurp(harness_detail::trace_file(dir / "a", "nes", 12, 0)),
            slurp(harness_detail::trace_file(dir / "b", "nes", 12, 0)));
}

TEST(Report, FigureFiles) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  const auto r = run_sweep(cfg);
  const auto succ = lines_of(dir / "out" / "fig_succ_eps.csv");
  ASSERT_EQ(succ.size(), 2u + 4u);
  EXPECT_EQ(succ[1], "attack,epsilon,success_rate");
  EXPECT_EQ(succ[2].rfind("nes,12", 0), 0u);
  EXPECT_EQ(succ[5].rfind("square,20", 0), 0u);
  const auto mag = lines_of(dir / "out" / "fig_mag_dssim.csv");
  EXPECT_EQ(mag[1], "attack,epsilon,avg_magnitude,avg_dssim");
  EXPECT_FALSE(fs::exists(dir / "out" / "fig_human_eps.csv"));

  // report is idempotent
  const std::string before = slurp(r.summary_csv);
  write_report(dir / "out");
  EXPECT_EQ(slurp(r.summary_csv), before);
}

TEST(Report, SurveyRoundTrip) {
  testutil::TempDir dir;
  const auto csv = write_toy_benchmark(small_spec(8, 4), dir / "data");
  SweepConfig cfg = small_config(csv, dir / "out");
  cfg.attacks = {"square"};
  cfg.epsilon_grid_255 = {20};
  run_sweep(cfg);

  SurveyPackRequest req;
  req.sweep_dir = dir / "out";
  req.attack = "square";
  req.epsilon_255 = 20;
  req.images = 4;
  req.seed = 1;
  req.out_dir = dir / "packet";
  EXPECT_EQ(survey_pack(req), 4u);
  const auto manifest = read_manifest(dir / "packet" / "manifest.json");
  ASSERT_EQ(manifest.entries.size(), 4u);
  EXPECT_EQ(manifest.attack, "square");
  EXPECT_EQ(*manifest.epsilon, 20.0);

  // everyone answers correctly except on the first image
  std::vector<VoteRecord> votes;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const bool truth = i == 0 ? !e.altered : e.altered;
    for (int w = 0; w < 3; ++w)
      votes.push_back({e.image_id, "w" + std::to_string(w), truth ? Answer::Altered : Answer::NotAltered});
  }
  write_votes_csv(votes, dir / "votes.csv");
  const SurveyInput s{dir / "packet" / "manifest.json", dir / "votes.csv"};
  EXPECT_DOUBLE_EQ(score_survey(s), 0.75);

  const auto rep = write_report(dir / "out", {s});
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(*rep.rows[0].human_accuracy, 0.75);
  const auto human = lines_of(dir / "out" / "fig_succ_human.csv");
  ASSERT_EQ(human.size(), 3u);
  EXPECT_EQ(human[2].rfind("square,20,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "out" / "fig_human_eps.csv"));

  req.images = 1000;
  req.out_dir = dir / "too_big";
  EXPECT_THROW(survey_pack(req), Error);
}
