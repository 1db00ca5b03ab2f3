// facebb command-line front end. Every subcommand prints one JSON object on
// stdout; diagnostics go to stderr with a nonzero exit status.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "facebb/facebb.h"

using json = nlohmann::json;

namespace {

struct Failure {
  facebb_status status;
};

void check(facebb_status s, const std::string& what) {
  if (s != FACEBB_OK) {
    std::cerr << "facebb: " << what << ": " << facebb_last_error() << " [" << facebb_status_name(s)
              << "]\n";
    throw Failure{s};
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  facebb_string_free(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ImagePtr = std::unique_ptr<facebb_image, Deleter<facebb_image, facebb_image_free>>;
using OraclePtr = std::unique_ptr<facebb_oracle, Deleter<facebb_oracle, facebb_oracle_free>>;
using TracePtr = std::unique_ptr<facebb_trace, Deleter<facebb_trace, facebb_trace_free>>;
using ConfigPtr =
    std::unique_ptr<facebb_sweep_config, Deleter<facebb_sweep_config, facebb_sweep_config_free>>;

ImagePtr load(const std::string& path) {
  facebb_image* img = nullptr;
  check(facebb_image_load(path.c_str(), &img), "load " + path);
  return ImagePtr(img);
}

OraclePtr open_oracle(const std::string& spec, std::uint64_t toy_seed, const facebb_image* like) {
  facebb_oracle* o = nullptr;
  if (spec == "toy") {
    int h = 0, w = 0, c = 0;
    check(facebb_image_shape(like, &h, &w, &c), "image shape");
    check(facebb_oracle_toy(toy_seed, h, w, c, 128, &o), "toy oracle");
  } else {
    check(facebb_oracle_connect(spec == "external" ? nullptr : spec.c_str(), &o), "connect");
  }
  return OraclePtr(o);
}

void print(const json& j) { std::cout << j.dump() << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box attacks against face verification models"};
  app.require_subcommand(1);

  // attack
  auto* attack = app.add_subcommand("attack", "Run one attack on one image pair");
  std::string a_name, a_source, a_target, a_oracle = "toy", a_trace, a_output;
  double a_eps = 20.0, a_db = 1.14;
  std::int64_t a_limit = 10000;
  std::uint64_t a_seed = 0, a_toy_seed = 7;
  attack->add_option("--attack", a_name, "nes, bandits, simba or square")->required();
  attack->add_option("--source", a_source, "Reference image (PNG)")->required();
  attack->add_option("--target", a_target, "Image to perturb (PNG)")->required();
  attack->add_option("--eps", a_eps, "l-inf budget in 0-255 units");
  attack->add_option("--d-b", a_db, "Decision threshold");
  attack->add_option("--query-limit", a_limit);
  attack->add_option("--seed", a_seed);
  attack->add_option("--oracle", a_oracle, "toy, external, tcp://host:port or stdio:<cmd>");
  attack->add_option("--toy-seed", a_toy_seed);
  attack->add_option("--trace", a_trace, "Write the trace as JSONL");
  attack->add_option("--output", a_output, "Write the final image as PNG");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run attacks x epsilons over a pair list");
  std::string s_config, s_out;
  std::vector<std::string> s_set;
  sweep->add_option("--config", s_config, "Config file")->check(CLI::ExistingFile);
  sweep->add_option("--set", s_set, "Override a config key (key=value)");
  sweep->add_option("--output-dir", s_out);

  // threshold
  auto* threshold = app.add_subcommand("threshold", "Select d_b by max-F1 over a pair list");
  std::string t_pairs, t_oracle = "toy", t_curve;
  std::uint64_t t_toy_seed = 7;
  threshold->add_option("--pairs", t_pairs)->required();
  threshold->add_option("--oracle", t_oracle);
  threshold->add_option("--toy-seed", t_toy_seed);
  threshold->add_option("--curve", t_curve, "PR curve CSV path (default pr_curve.csv next to pairs)");

  // survey-pack
  auto* pack = app.add_subcommand("survey-pack", "Build a survey packet from a sweep");
  std::string p_dir, p_attack, p_out;
  double p_eps = 20.0;
  int p_images = 10;
  std::uint64_t p_seed = 0;
  pack->add_option("--sweep-dir", p_dir)->required();
  pack->add_option("--attack", p_attack)->required();
  pack->add_option("--eps", p_eps)->required();
  pack->add_option("--images", p_images);
  pack->add_option("--seed", p_seed);
  pack->add_option("--out", p_out)->required();

  // survey-score
  auto* score = app.add_subcommand("survey-score", "Human accuracy from a manifest and votes");
  std::string v_manifest, v_votes;
  score->add_option("--manifest", v_manifest)->required();
  score->add_option("--votes", v_votes)->required();

  // report
  auto* report = app.add_subcommand("report", "Rebuild summary and figure CSVs from traces");
  std::string r_dir;
  std::vector<std::string> r_manifests, r_votes;
  report->add_option("--sweep-dir", r_dir)->required();
  report->add_option("--manifest", r_manifests, "Survey manifest (repeatable)");
  report->add_option("--votes", r_votes, "Votes CSV, paired with --manifest in order");

  // toy-pairs
  auto* toy = app.add_subcommand("toy-pairs", "Write the synthetic toy benchmark");
  std::string y_out;
  std::uint64_t y_seed = 1;
  int y_match = 50, y_non = 50, y_h = 8, y_w = 8, y_c = 3;
  double y_noise = 0.03;
  toy->add_option("--out", y_out)->required();
  toy->add_option("--seed", y_seed);
  toy->add_option("--matching", y_match);
  toy->add_option("--nonmatching", y_non);
  toy->add_option("--height", y_h);
  toy->add_option("--width", y_w);
  toy->add_option("--channels", y_c);
  toy->add_option("--noise", y_noise);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*attack) {
      auto source = load(a_source);
      auto target = load(a_target);
      auto oracle = open_oracle(a_oracle, a_toy_seed, target.get());
      facebb_attack_options opts;
      facebb_attack_options_default(&opts);
      opts.epsilon_255 = a_eps;
      opts.d_b = a_db;
      opts.query_limit = a_limit;
      opts.seed = a_seed;
      facebb_trace* raw = nullptr;
      check(facebb_attack_run(a_name.c_str(), source.get(), target.get(), oracle.get(), &opts, &raw),
            "attack");
      TracePtr trace(raw);
      if (!a_trace.empty()) check(facebb_trace_write_jsonl(trace.get(), a_trace.c_str()), "write trace");
      if (!a_output.empty())
        check(facebb_image_save(facebb_trace_final_image(trace.get()), a_output.c_str()), "write image");
      double final_d = 0.0;
      check(facebb_trace_step(trace.get(), facebb_trace_step_count(trace.get()) - 1, nullptr, &final_d),
            "trace");
      print({{"attack", a_name},
             {"epsilon", a_eps},
             {"seed", a_seed},
             {"outcome", facebb_trace_success(trace.get()) ? "SUCCESS" : "FAILURE"},
             {"queries", facebb_trace_queries(trace.get())},
             {"final_distance", final_d},
             {"magnitude", facebb_trace_magnitude(trace.get())}});
    } else if (*sweep) {
      facebb_sweep_config* raw = nullptr;
      if (s_config.empty())
        check(facebb_sweep_config_new(&raw), "config");
      else
        check(facebb_sweep_config_load(s_config.c_str(), &raw), "config " + s_config);
      ConfigPtr cfg(raw);
      for (const auto& kv : s_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::cerr << "facebb: --set expects key=value, got '" << kv << "'\n";
          return 2;
        }
        check(facebb_sweep_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()),
              "--set " + kv);
      }
      if (!s_out.empty())
        check(facebb_sweep_config_set(cfg.get(), "output_dir", json(s_out).dump().c_str()), "output dir");
      char* result = nullptr;
      check(facebb_sweep_run(cfg.get(), &result), "sweep");
      std::cout << take(result) << std::endl;
    } else if (*threshold) {
      if (t_curve.empty()) {
        const auto slash = t_pairs.find_last_of('/');
        t_curve = (slash == std::string::npos ? std::string() : t_pairs.substr(0, slash + 1)) + "pr_curve.csv";
      }
      double d_b = 0.0, f1 = 0.0;
      check(facebb_threshold_select(t_pairs.c_str(), t_oracle == "external" ? nullptr : t_oracle.c_str(),
                                    t_toy_seed, t_curve.c_str(), &d_b, &f1),
            "threshold");
      print({{"d_b", d_b}, {"f1", f1}, {"pr_curve", t_curve}});
    } else if (*pack) {
      size_t written = 0;
      check(facebb_survey_pack(p_dir.c_str(), p_attack.c_str(), p_eps, p_images, p_seed, p_out.c_str(),
                               &written),
            "survey-pack");
      print({{"images", written}, {"seed", p_seed}, {"manifest", p_out + "/manifest.json"}});
    } else if (*score) {
      double acc = 0.0;
      check(facebb_survey_score(v_manifest.c_str(), v_votes.c_str(), &acc), "survey-score");
      print({{"human_accuracy", acc}});
    } else if (*report) {
      if (r_manifests.size() != r_votes.size()) {
        std::cerr << "facebb: --manifest and --votes must be given the same number of times\n";
        return 2;
      }
      std::vector<const char*> m, v;
      for (const auto& s : r_manifests) m.push_back(s.c_str());
      for (const auto& s : r_votes) v.push_back(s.c_str());
      char* result = nullptr;
      check(facebb_report(r_dir.c_str(), m.data(), v.data(), m.size(), &result), "report");
      std::cout << take(result) << std::endl;
    } else if (*toy) {
      char* path = nullptr;
      check(facebb_write_toy_benchmark(y_out.c_str(), y_seed, y_match, y_non, y_h, y_w, y_c, y_noise, &path),
            "toy-pairs");
      print({{"pairs", take(path)}, {"seed", y_seed}});
    }
  } catch (const Failure& f) {
    return 1;
  }
  return 0;
}
