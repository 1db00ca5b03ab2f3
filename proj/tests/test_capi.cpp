// Exercises the shared library through its C header only.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "facebb/facebb.h"

namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path path;
  Dir() {
    static int n = 0;
    path = fs::temp_directory_path() / ("facebb-capi-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const char* s) const { return (path / s).string(); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  facebb_string_free(s);
  return out;
}

// First matching pair of a small toy benchmark.
struct ToyPair {
  Dir dir;
  facebb_image* source = nullptr;
  facebb_image* target = nullptr;
  std::string csv;
  ToyPair() {
    char* path = nullptr;
    EXPECT_EQ(facebb_write_toy_benchmark(dir.path.c_str(), 3, 4, 4, 8, 8, 3, 0.03, &path), FACEBB_OK);
    csv = take(path);
    EXPECT_EQ(facebb_image_load((dir / "images/pair0_a.png").c_str(), &source), FACEBB_OK)
        << facebb_last_error();
    EXPECT_EQ(facebb_image_load((dir / "images/pair0_b.png").c_str(), &target), FACEBB_OK);
  }
  ~ToyPair() {
    facebb_image_free(source);
    facebb_image_free(target);
  }
};

}  // namespace

TEST(CApi, StatusNamesAndErrors) {
  EXPECT_STREQ(facebb_status_name(FACEBB_OK), "ok");
  EXPECT_STREQ(facebb_status_name(FACEBB_ERR_ORACLE), "oracle");
  EXPECT_NE(std::string(facebb_version()), "");

  facebb_image* img = nullptr;
  EXPECT_EQ(facebb_image_load("/nonexistent/x.png", &img), FACEBB_ERR_FILE_NOT_FOUND);
  EXPECT_EQ(img, nullptr);
  EXPECT_NE(std::string(facebb_last_error()).find("x.png"), std::string::npos);
  EXPECT_EQ(facebb_image_create(0, 2, 3, nullptr, &img), FACEBB_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(facebb_image_create(2, 2, 3, nullptr, nullptr), FACEBB_ERR_INVALID_ARGUMENT);
  facebb_image_free(nullptr);
  facebb_oracle_free(nullptr);
  facebb_trace_free(nullptr);
  facebb_sweep_config_free(nullptr);
  facebb_string_free(nullptr);
}

TEST(CApi, ImagesAndMetrics) {
  const double a_data[] = {0.1, 0.2, 0.3, 0.4};
  const double b_data[] = {0.4, 0.6, 0.3, 0.4};
  facebb_image *a = nullptr, *b = nullptr, *p = nullptr;
  ASSERT_EQ(facebb_image_create(2, 2, 1, a_data, &a), FACEBB_OK);
  ASSERT_EQ(facebb_image_create(2, 2, 1, b_data, &b), FACEBB_OK);
  int h = 0, w = 0, c = 0;
  ASSERT_EQ(facebb_image_shape(a, &h, &w, &c), FACEBB_OK);
  EXPECT_EQ(h * 100 + w * 10 + c, 221);
  EXPECT_EQ(facebb_image_data(a)[3], 0.4);
  double d = 0;
  ASSERT_EQ(facebb_l2_diff(a, b, &d), FACEBB_OK);
  EXPECT_NEAR(d, 0.5, 1e-15);
  ASSERT_EQ(facebb_project(a, b, 51.0, &p), FACEBB_OK);  // 0.2 per pixel
  EXPECT_NEAR(facebb_image_data(p)[0], 0.3, 1e-15);
  EXPECT_NEAR(facebb_image_data(p)[1], 0.4, 1e-15);
  EXPECT_EQ(facebb_ssim(a, b, &d), FACEBB_ERR_INVALID_ARGUMENT);  // smaller than the window

  facebb_image* c1 = nullptr;
  ASSERT_EQ(facebb_image_create(2, 2, 3, nullptr, &c1), FACEBB_OK);
  EXPECT_EQ(facebb_l2_diff(a, c1, &d), FACEBB_ERR_SHAPE_MISMATCH);

  Dir dir;
  EXPECT_EQ(facebb_image_save(a, (dir / "a.png").c_str()), FACEBB_OK);
  facebb_image* back = nullptr;
  ASSERT_EQ(facebb_image_load((dir / "a.png").c_str(), &back), FACEBB_OK);
  EXPECT_NEAR(facebb_image_data(back)[2], 0.3, 1.0 / 510);
  for (auto* img : {a, b, p, c1, back}) facebb_image_free(img);
}

TEST(CApi, SsimOnLargeImages) {
  std::vector<double> x(16 * 16 * 3), y(16 * 16 * 3);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.5 + 0.4 * std::sin(0.1 * i);
    y[i] = 0.5 + 0.4 * std::sin(0.1 * i + 0.3);
  }
  facebb_image *a = nullptr, *b = nullptr;
  ASSERT_EQ(facebb_image_create(16, 16, 3, x.data(), &a), FACEBB_OK);
  ASSERT_EQ(facebb_image_create(16, 16, 3, y.data(), &b), FACEBB_OK);
  double s = 0, ds = 0, self = 1;
  ASSERT_EQ(facebb_ssim(a, b, &s), FACEBB_OK);
  ASSERT_EQ(facebb_dssim(a, b, &ds), FACEBB_OK);
  ASSERT_EQ(facebb_dssim(a, a, &self), FACEBB_OK);
  EXPECT_NEAR(ds, (1 - s) / 2, 1e-15);
  EXPECT_EQ(self, 0.0);
  facebb_image_free(a);
  facebb_image_free(b);
}

TEST(CApi, OracleAndAttack) {
  ToyPair tp;
  facebb_oracle* oracle = nullptr;
  ASSERT_EQ(facebb_oracle_toy(7, 8, 8, 3, 128, &oracle), FACEBB_OK);
  EXPECT_EQ(facebb_oracle_embed_dim(oracle), 128);
  std::vector<double> e(128);
  std::size_t dim = 0;
  ASSERT_EQ(facebb_oracle_embed(oracle, tp.source, e.data(), e.size(), &dim), FACEBB_OK);
  EXPECT_EQ(dim, 128u);
  double norm = 0;
  for (double v : e) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_EQ(facebb_oracle_embed(oracle, tp.source, e.data(), 10, &dim), FACEBB_ERR_INVALID_ARGUMENT);

  int match = 0;
  double dist = 0;
  ASSERT_EQ(facebb_verify(oracle, tp.source, tp.target, 1.14, &match, &dist), FACEBB_OK);
  EXPECT_EQ(match, 1);

  facebb_attack_options opts;
  facebb_attack_options_default(&opts);
  opts.epsilon_255 = 20;
  opts.query_limit = 500;
  opts.d_b = dist + 0.05;
  opts.seed = 4;
  facebb_trace* trace = nullptr;
  ASSERT_EQ(facebb_attack_run("square", tp.source, tp.target, oracle, &opts, &trace), FACEBB_OK)
      << facebb_last_error();
  EXPECT_LE(facebb_trace_queries(trace), 500);
  ASSERT_GE(facebb_trace_step_count(trace), 1u);
  std::int64_t q = 0;
  double d0 = 0;
  ASSERT_EQ(facebb_trace_step(trace, 0, &q, &d0), FACEBB_OK);
  EXPECT_EQ(q, 1);
  EXPECT_NEAR(d0, dist, 1e-12);
  std::int64_t ql = 0;
  double dl = 0;
  ASSERT_EQ(facebb_trace_step(trace, facebb_trace_step_count(trace) - 1, &ql, &dl), FACEBB_OK);
  EXPECT_EQ(facebb_trace_success(trace) == 1, dl >= opts.d_b);
  EXPECT_EQ(facebb_trace_step(trace, 1u << 30, &q, &d0), FACEBB_ERR_INVALID_ARGUMENT);

  const facebb_image* adv = facebb_trace_final_image(trace);
  const double* x = facebb_image_data(adv);
  const double* x0 = facebb_image_data(tp.target);
  for (int i = 0; i < 8 * 8 * 3; ++i) EXPECT_LE(std::fabs(x[i] - x0[i]), 20.0 / 255 + 1e-9);
  double mag = 0;
  ASSERT_EQ(facebb_l2_diff(adv, tp.target, &mag), FACEBB_OK);
  EXPECT_EQ(facebb_trace_magnitude(trace), mag);

  Dir dir;
  EXPECT_EQ(facebb_trace_write_jsonl(trace, (dir / "t.jsonl").c_str()), FACEBB_OK);
  EXPECT_TRUE(fs::exists(dir / "t.jsonl"));

  facebb_trace* none = nullptr;
  EXPECT_EQ(facebb_attack_run("fgsm", tp.source, tp.target, oracle, &opts, &none),
            FACEBB_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(facebb_attack_run("nes", tp.source, tp.target, nullptr, &opts, &none),
            FACEBB_ERR_INVALID_ARGUMENT);
  // NULL options mean the defaults
  ASSERT_EQ(facebb_attack_run("square", tp.source, tp.target, oracle, nullptr, &none), FACEBB_OK);
  EXPECT_LE(facebb_trace_queries(none), 10000);
  facebb_trace_free(none);
  facebb_trace_free(trace);
  facebb_oracle_free(oracle);
}

TEST(CApi, OracleConnectFailures) {
  facebb_oracle* o = nullptr;
  EXPECT_EQ(facebb_oracle_connect("ftp://nowhere", &o), FACEBB_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(facebb_oracle_connect("tcp://127.0.0.1:1", &o), FACEBB_ERR_ORACLE);
  EXPECT_EQ(o, nullptr);
}

TEST(CApi, Threshold) {
  const double d[] = {0.1, 0.2, 0.3, 0.4};
  const int l[] = {1, 1, 0, 0};
  double d_b = 0, f1 = 0;
  ASSERT_EQ(facebb_threshold_select_scores(d, l, 4, &d_b, &f1), FACEBB_OK);
  EXPECT_DOUBLE_EQ(d_b, 0.25);
  EXPECT_EQ(f1, 1.0);
  const int same[] = {1, 1, 1, 1};
  EXPECT_EQ(facebb_threshold_select_scores(d, same, 4, &d_b, &f1), FACEBB_ERR_DEGENERATE);

  ToyPair tp;
  Dir out;
  ASSERT_EQ(facebb_threshold_select(tp.csv.c_str(), "toy", 7, (out / "curve.csv").c_str(), &d_b, &f1),
            FACEBB_OK)
      << facebb_last_error();
  EXPECT_GT(d_b, 0.0);
  EXPECT_GT(f1, 0.0);
  EXPECT_TRUE(fs::exists(out / "curve.csv"));
}

TEST(CApi, SweepReportAndSurvey) {
  ToyPair tp;
  Dir out;
  facebb_sweep_config* cfg = nullptr;
  ASSERT_EQ(facebb_sweep_config_new(&cfg), FACEBB_OK);
  ASSERT_EQ(facebb_sweep_config_set(cfg, "pairs", tp.csv.c_str()), FACEBB_OK);
  ASSERT_EQ(facebb_sweep_config_set(cfg, "output_dir", out.path.c_str()), FACEBB_OK);
  ASSERT_EQ(facebb_sweep_config_set(cfg, "attacks", "[\"square\"]"), FACEBB_OK);
  ASSERT_EQ(facebb_sweep_config_set(cfg, "epsilons", "[20]"), FACEBB_OK);
  ASSERT_EQ(facebb_sweep_config_set(cfg, "query_limit", "200"), FACEBB_OK);
  EXPECT_EQ(facebb_sweep_config_set(cfg, "no_such_key", "1"), FACEBB_ERR_INVALID_ARGUMENT);
  const std::string hash = take([&] {
    char* h = nullptr;
    facebb_sweep_config_hash(cfg, &h);
    return h;
  }());
  EXPECT_EQ(hash.size(), 64u);

  char* result = nullptr;
  ASSERT_EQ(facebb_sweep_run(cfg, &result), FACEBB_OK) << facebb_last_error();
  const std::string json = take(result);
  EXPECT_NE(json.find(hash), std::string::npos);
  EXPECT_NE(json.find("\"rows\""), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "summary.csv"));

  char* rep = nullptr;
  ASSERT_EQ(facebb_report(out.path.c_str(), nullptr, nullptr, 0, &rep), FACEBB_OK);
  EXPECT_NE(take(rep).find("square"), std::string::npos);
  const char* null_manifest[] = {nullptr};
  EXPECT_EQ(facebb_report(out.path.c_str(), null_manifest, null_manifest, 1, &rep),
            FACEBB_ERR_INVALID_ARGUMENT);

  std::size_t written = 0;
  ASSERT_EQ(facebb_survey_pack(out.path.c_str(), "square", 20, 2, 1, (out / "packet").c_str(), &written),
            FACEBB_OK)
      << facebb_last_error();
  EXPECT_EQ(written, 2u);
  double acc = 0;
  EXPECT_EQ(facebb_survey_score((out / "packet/manifest.json").c_str(), (out / "none.csv").c_str(), &acc),
            FACEBB_ERR_FILE_NOT_FOUND);

  facebb_sweep_config_free(cfg);
}
