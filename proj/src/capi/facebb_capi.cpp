#include "facebb/facebb.h"

#include <cstring>
#include <json.hpp>
#include <memory>
#include <new>
#include <string>

#include "attacks/attacks.hpp"
#include "attacks/trace_io.hpp"
#include "core/error.hpp"
#include "harness/harness.hpp"
#include "metrics/metrics.hpp"
#include "survey/survey.hpp"
#include "threshold/threshold.hpp"

struct facebb_image {
  facebb::Image img;
};
struct facebb_oracle {
  std::unique_ptr<facebb::Oracle> oracle;
};
struct facebb_trace {
  facebb::AttackTrace trace;
  facebb_image final_image;
};
struct facebb_sweep_config {
  facebb::SweepConfig cfg;
};

namespace {

using facebb::ErrorCode;
using json = nlohmann::json;

thread_local std::string last_error;

facebb_status set_error(facebb_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

// Runs fn, translating any exception into a status code.
template <typename Fn>
facebb_status guarded(Fn&& fn) {
  try {
    fn();
    return FACEBB_OK;
  } catch (const facebb::Error& e) {
    return set_error(static_cast<facebb_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return set_error(FACEBB_ERR_DECODE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(FACEBB_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(FACEBB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(FACEBB_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(FACEBB_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) facebb::fail(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json rows_json(const std::vector<facebb::SummaryRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"attack", r.attack},
                   {"epsilon", r.epsilon_255},
                   {"success_rate", r.success_rate},
                   {"human_accuracy", optional_json(r.human_accuracy)},
                   {"avg_magnitude", optional_json(r.avg_magnitude)},
                   {"avg_dssim", optional_json(r.avg_dssim)},
                   {"avg_queries", r.avg_queries},
                   {"traces", r.traces},
                   {"successes", r.successes}});
  return out;
}

facebb::AttackConfig to_config(const facebb_attack_options& o) {
  facebb::AttackConfig c;
  c.budget = facebb::EpsilonBudget(o.epsilon_255);
  c.query_limit = o.query_limit;
  c.d_b = o.d_b;
  c.seed = o.seed;
  c.step_rate = o.step_rate;
  c.nes.population = o.nes_population;
  c.nes.sigma = o.nes_sigma;
  c.bandits.tile_size = o.bandits_tile_size;
  c.bandits.exploration = o.bandits_exploration;
  c.bandits.prior_step = o.bandits_prior_step;
  c.bandits.finite_diff_probe = o.bandits_finite_diff_probe;
  c.simba.step = o.simba_step;
  c.simba.basis = o.simba_dct ? facebb::SimbaBasis::Dct : facebb::SimbaBasis::Pixel;
  c.simba.budget_queries = o.simba_budget_queries;
  c.square.p_init = o.square_p_init;
  return c;
}

}  // namespace

extern "C" {

const char* facebb_last_error(void) { return last_error.c_str(); }

const char* facebb_status_name(facebb_status status) {
  switch (status) {
    case FACEBB_OK: return "ok";
    case FACEBB_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case FACEBB_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case FACEBB_ERR_FILE_NOT_FOUND: return "file_not_found";
    case FACEBB_ERR_DECODE: return "decode";
    case FACEBB_ERR_UNSUPPORTED: return "unsupported";
    case FACEBB_ERR_IO: return "io";
    case FACEBB_ERR_ORACLE: return "oracle";
    case FACEBB_ERR_PRECONDITION: return "precondition";
    case FACEBB_ERR_DEGENERATE: return "degenerate";
    case FACEBB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void facebb_string_free(char* s) { std::free(s); }

const char* facebb_version(void) { return "0.1.0"; }

// ---- images

facebb_status facebb_image_create(int height, int width, int channels, const double* data,
                                  facebb_image** out) {
  return guarded([&] {
    require(out, "out");
    auto h = std::make_unique<facebb_image>();
    if (data == nullptr) {
      h->img = facebb::Image(height, width, channels);
    } else {
      if (height <= 0 || width <= 0) facebb::fail(ErrorCode::InvalidArgument, "image dimensions must be > 0");
      const std::size_t n = static_cast<std::size_t>(height) * width * channels;
      h->img = facebb::Image(height, width, channels, std::vector<double>(data, data + n));
    }
    *out = h.release();
  });
}

facebb_status facebb_image_load(const char* path, facebb_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto h = std::make_unique<facebb_image>();
    h->img = facebb::load_image(path);
    *out = h.release();
  });
}

facebb_status facebb_image_save(const facebb_image* img, const char* path) {
  return guarded([&] {
    require(img, "img");
    require(path, "path");
    facebb::save_image(img->img, path);
  });
}

void facebb_image_free(facebb_image* img) { delete img; }

facebb_status facebb_image_shape(const facebb_image* img, int* height, int* width, int* channels) {
  return guarded([&] {
    require(img, "img");
    if (height) *height = img->img.height();
    if (width) *width = img->img.width();
    if (channels) *channels = img->img.channels();
  });
}

const double* facebb_image_data(const facebb_image* img) {
  return img == nullptr ? nullptr : img->img.data().data();
}

facebb_status facebb_project(const facebb_image* origin, const facebb_image* candidate,
                             double epsilon_255, facebb_image** out) {
  return guarded([&] {
    require(origin, "origin");
    require(candidate, "candidate");
    require(out, "out");
    auto h = std::make_unique<facebb_image>();
    h->img = facebb::project(origin->img, candidate->img, facebb::EpsilonBudget(epsilon_255));
    *out = h.release();
  });
}

facebb_status facebb_l2_diff(const facebb_image* a, const facebb_image* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = facebb::l2_diff(a->img, b->img);
  });
}

facebb_status facebb_ssim(const facebb_image* a, const facebb_image* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = facebb::ssim(a->img, b->img);
  });
}

facebb_status facebb_dssim(const facebb_image* a, const facebb_image* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = facebb::dssim(a->img, b->img);
  });
}

// ---- oracles

facebb_status facebb_oracle_toy(uint64_t seed, int height, int width, int channels, int embed_dim,
                                facebb_oracle** out) {
  return guarded([&] {
    require(out, "out");
    facebb::ToyEmbedderSpec spec;
    spec.seed = seed;
    spec.input = {height, width, channels};
    spec.embed_dim = embed_dim;
    auto h = std::make_unique<facebb_oracle>();
    h->oracle = std::make_unique<facebb::ToyOracle>(spec);
    *out = h.release();
  });
}

facebb_status facebb_oracle_connect(const char* endpoint, facebb_oracle** out) {
  return guarded([&] {
    require(out, "out");
    facebb::SweepConfig cfg;
    cfg.oracle.kind = facebb::OracleSpec::Kind::External;
    if (endpoint) cfg.oracle.endpoint = endpoint;
    auto h = std::make_unique<facebb_oracle>();
    h->oracle = facebb::make_oracle_factory(cfg, {})();
    *out = h.release();
  });
}

void facebb_oracle_free(facebb_oracle* oracle) { delete oracle; }

facebb_status facebb_oracle_input_dims(const facebb_oracle* oracle, int* height, int* width,
                                       int* channels) {
  return guarded([&] {
    require(oracle, "oracle");
    const auto d = oracle->oracle->input_dims();
    if (height) *height = d.height;
    if (width) *width = d.width;
    if (channels) *channels = d.channels;
  });
}

int facebb_oracle_embed_dim(const facebb_oracle* oracle) {
  return oracle == nullptr ? 0 : oracle->oracle->embed_dim();
}

facebb_status facebb_oracle_embed(facebb_oracle* oracle, const facebb_image* img, double* out,
                                  size_t capacity, size_t* dim) {
  return guarded([&] {
    require(oracle, "oracle");
    require(img, "img");
    const auto e = oracle->oracle->embed_uncharged(img->img);
    if (dim) *dim = e.dim();
    if (out != nullptr) {
      if (capacity < e.dim())
        facebb::fail(ErrorCode::InvalidArgument, "output buffer holds " + std::to_string(capacity) +
                                                     " values; embedding has " + std::to_string(e.dim()));
      std::copy(e.values().begin(), e.values().end(), out);
    }
  });
}

facebb_status facebb_verify(facebb_oracle* oracle, const facebb_image* source,
                            const facebb_image* target, double d_b, int* match, double* distance) {
  return guarded([&] {
    require(oracle, "oracle");
    require(source, "source");
    require(target, "target");
    const auto v = facebb::verify(*oracle->oracle, {source->img, target->img, 1}, {d_b});
    if (match) *match = v.match ? 1 : 0;
    if (distance) *distance = v.distance;
  });
}

// ---- attacks

void facebb_attack_options_default(facebb_attack_options* o) {
  if (o == nullptr) return;
  const facebb::AttackConfig c;
  o->epsilon_255 = c.budget.epsilon_255();
  o->query_limit = c.query_limit;
  o->d_b = c.d_b;
  o->seed = c.seed;
  o->step_rate = c.step_rate;
  o->nes_population = c.nes.population;
  o->nes_sigma = c.nes.sigma;
  o->bandits_tile_size = c.bandits.tile_size;
  o->bandits_exploration = c.bandits.exploration;
  o->bandits_prior_step = c.bandits.prior_step;
  o->bandits_finite_diff_probe = c.bandits.finite_diff_probe;
  o->simba_step = c.simba.step;
  o->simba_dct = c.simba.basis == facebb::SimbaBasis::Dct;
  o->simba_budget_queries = c.simba.budget_queries;
  o->square_p_init = c.square.p_init;
}

facebb_status facebb_attack_run(const char* attack, const facebb_image* source,
                                const facebb_image* target, facebb_oracle* oracle,
                                const facebb_attack_options* opts, facebb_trace** out) {
  return guarded([&] {
    require(attack, "attack");
    require(source, "source");
    require(target, "target");
    require(oracle, "oracle");
    require(out, "out");
    facebb_attack_options o;
    if (opts)
      o = *opts;
    else
      facebb_attack_options_default(&o);
    auto h = std::make_unique<facebb_trace>();
    h->trace = facebb::run_attack(attack, {source->img, target->img, 1}, *oracle->oracle, to_config(o));
    if (facebb::ssim_applicable(target->img)) h->trace.dssim = facebb::dssim(h->trace.final_image, target->img);
    h->final_image.img = h->trace.final_image;
    *out = h.release();
  });
}

void facebb_trace_free(facebb_trace* trace) { delete trace; }

int facebb_trace_success(const facebb_trace* t) {
  return t != nullptr && t->trace.outcome == facebb::Outcome::Success;
}

int64_t facebb_trace_queries(const facebb_trace* t) { return t == nullptr ? 0 : t->trace.queries_used; }

size_t facebb_trace_step_count(const facebb_trace* t) { return t == nullptr ? 0 : t->trace.steps.size(); }

facebb_status facebb_trace_step(const facebb_trace* t, size_t index, int64_t* query_count,
                                double* distance) {
  return guarded([&] {
    require(t, "trace");
    if (index >= t->trace.steps.size()) facebb::fail(ErrorCode::InvalidArgument, "step index out of range");
    if (query_count) *query_count = t->trace.steps[index].query_count;
    if (distance) *distance = t->trace.steps[index].distance;
  });
}

double facebb_trace_magnitude(const facebb_trace* t) {
  return t == nullptr ? 0.0 : t->trace.magnitude.value_or(0.0);
}

const facebb_image* facebb_trace_final_image(const facebb_trace* t) {
  return t == nullptr ? nullptr : &t->final_image;
}

facebb_status facebb_trace_write_jsonl(const facebb_trace* t, const char* path) {
  return guarded([&] {
    require(t, "trace");
    require(path, "path");
    facebb::write_trace_jsonl(t->trace, std::filesystem::path(path));
  });
}

// ---- threshold

facebb_status facebb_threshold_select_scores(const double* distances, const int* labels, size_t n,
                                             double* d_b, double* f1) {
  return guarded([&] {
    if (n > 0) {
      require(distances, "distances");
      require(labels, "labels");
    }
    std::vector<facebb::ScoredPair> scores(n);
    for (size_t i = 0; i < n; ++i) scores[i] = {distances[i], labels[i]};
    const auto sel = facebb::select_threshold(scores);
    if (d_b) *d_b = sel.d_b;
    if (f1) *f1 = sel.f1;
  });
}

facebb_status facebb_threshold_select(const char* pairs_csv, const char* oracle_spec,
                                      uint64_t toy_seed, const char* curve_csv, double* d_b,
                                      double* f1) {
  return guarded([&] {
    require(pairs_csv, "pairs_csv");
    facebb::SweepConfig cfg;
    cfg.pairs_file = pairs_csv;
    cfg.oracle.toy_seed = toy_seed;
    if (oracle_spec == nullptr)
      cfg.oracle.kind = facebb::OracleSpec::Kind::External;
    else
      facebb::apply_setting(cfg, "oracle", json(std::string(oracle_spec)).dump());
    const auto records = facebb::read_pair_records(cfg.pairs_file);
    if (records.empty()) facebb::fail(ErrorCode::Precondition, "pair list is empty");
    const auto first = facebb::load_image(records.front().source_path);
    auto oracle = facebb::make_oracle_factory(cfg, {first.height(), first.width(), first.channels()})();
    const auto pairs = facebb::load_pairs(cfg.pairs_file, oracle->input_dims().channels == 3 ? 3 : 0);
    const auto sel = facebb::select_threshold(facebb::score_pairs(pairs, *oracle));
    if (curve_csv) facebb::write_curve_csv(sel.curve, curve_csv);
    if (d_b) *d_b = sel.d_b;
    if (f1) *f1 = sel.f1;
  });
}

// ---- sweeps

facebb_status facebb_sweep_config_new(facebb_sweep_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new facebb_sweep_config();
  });
}

facebb_status facebb_sweep_config_load(const char* path, facebb_sweep_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto h = std::make_unique<facebb_sweep_config>();
    h->cfg = facebb::load_sweep_config(path);
    *out = h.release();
  });
}

facebb_status facebb_sweep_config_set(facebb_sweep_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    facebb::apply_setting(cfg->cfg, key, value);
  });
}

void facebb_sweep_config_free(facebb_sweep_config* cfg) { delete cfg; }

facebb_status facebb_sweep_config_hash(const facebb_sweep_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(facebb::config_hash(cfg->cfg));
  });
}

facebb_status facebb_sweep_run(const facebb_sweep_config* cfg, char** result_json) {
  return guarded([&] {
    require(cfg, "cfg");
    const auto r = facebb::run_sweep(cfg->cfg);
    if (result_json) {
      const json j = {{"config_hash", r.config_hash},
                      {"seed", cfg->cfg.seed},
                      {"d_b", r.d_b},
                      {"eligible_pairs", r.eligible_pairs},
                      {"skipped_pairs", r.skipped_pairs},
                      {"computed_cells", r.computed_cells},
                      {"resumed_cells", r.resumed_cells},
                      {"summary_csv", r.summary_csv.string()},
                      {"rows", rows_json(r.rows)}};
      *result_json = dup_string(j.dump());
    }
  });
}

facebb_status facebb_report(const char* sweep_dir, const char* const* manifests,
                            const char* const* votes, size_t n_surveys, char** result_json) {
  return guarded([&] {
    require(sweep_dir, "sweep_dir");
    std::vector<facebb::SurveyInput> surveys;
    for (size_t i = 0; i < n_surveys; ++i) {
      require(manifests ? manifests[i] : nullptr, "manifest path");
      require(votes ? votes[i] : nullptr, "votes path");
      surveys.push_back({manifests[i], votes[i]});
    }
    const auto r = facebb::write_report(sweep_dir, surveys);
    if (result_json) {
      const json j = {{"summary_csv", r.summary_csv.string()},
                      {"magnitude_dssim_pearson", optional_json(r.magnitude_dssim_pearson)},
                      {"rows", rows_json(r.rows)}};
      *result_json = dup_string(j.dump());
    }
  });
}

// ---- surveys

facebb_status facebb_survey_pack(const char* sweep_dir, const char* attack, double epsilon_255,
                                 int images, uint64_t seed, const char* out_dir, size_t* written) {
  return guarded([&] {
    require(sweep_dir, "sweep_dir");
    require(attack, "attack");
    require(out_dir, "out_dir");
    const std::size_t n = facebb::survey_pack({sweep_dir, attack, epsilon_255, images, seed, out_dir});
    if (written) *written = n;
  });
}

facebb_status facebb_survey_score(const char* manifest, const char* votes, double* accuracy) {
  return guarded([&] {
    require(manifest, "manifest");
    require(votes, "votes");
    require(accuracy, "human_accuracy");
    *accuracy = facebb::score_survey({manifest, votes});
  });
}

// ---- toy benchmark

facebb_status facebb_write_toy_benchmark(const char* dir, uint64_t seed, int matching_pairs,
                                         int nonmatching_pairs, int height, int width,
                                         int channels, double noise, char** pairs_csv) {
  return guarded([&] {
    require(dir, "dir");
    facebb::ToyBenchmarkSpec spec;
    spec.seed = seed;
    spec.matching_pairs = matching_pairs;
    spec.nonmatching_pairs = nonmatching_pairs;
    spec.height = height;
    spec.width = width;
    spec.channels = channels;
    spec.within_identity_noise = noise;
    const auto path = facebb::write_toy_benchmark(spec, dir);
    if (pairs_csv) *pairs_csv = dup_string(path.string());
  });
}

}  // extern "C"
