/* facebb: black-box attacks on face verification, C interface.
 *
 * All objects are opaque handles created and released through this API.
 * Every fallible call returns a facebb_status; on failure,
 * facebb_last_error() describes the problem (per thread, valid until the
 * next failing call on that thread). Strings returned through char** must be
 * released with facebb_string_free.
 *
 * Pixel values are in [0, 1], row-major with interleaved channels.
 * Epsilons are given in 0-255 pixel units.
 */
#ifndef FACEBB_FACEBB_H
#define FACEBB_FACEBB_H

#include <stddef.h>
#include <stdint.h>

#if defined(FACEBB_BUILDING_LIBRARY)
#define FACEBB_API __attribute__((visibility("default")))
#else
#define FACEBB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum facebb_status {
  FACEBB_OK = 0,
  FACEBB_ERR_INVALID_ARGUMENT = 1,
  FACEBB_ERR_SHAPE_MISMATCH = 2,
  FACEBB_ERR_FILE_NOT_FOUND = 3,
  FACEBB_ERR_DECODE = 4,
  FACEBB_ERR_UNSUPPORTED = 5,
  FACEBB_ERR_IO = 6,
  FACEBB_ERR_ORACLE = 7,
  FACEBB_ERR_PRECONDITION = 8,
  FACEBB_ERR_DEGENERATE = 9,
  FACEBB_ERR_INTERNAL = 10
} facebb_status;

typedef struct facebb_image facebb_image;
typedef struct facebb_oracle facebb_oracle;
typedef struct facebb_trace facebb_trace;
typedef struct facebb_sweep_config facebb_sweep_config;

FACEBB_API const char* facebb_last_error(void);
FACEBB_API const char* facebb_status_name(facebb_status status);
FACEBB_API void facebb_string_free(char* s);
FACEBB_API const char* facebb_version(void);

/* ---- images ---------------------------------------------------------- */

/* data may be NULL (all zeros); otherwise h*w*c samples. */
FACEBB_API facebb_status facebb_image_create(int height, int width, int channels,
                                             const double* data, facebb_image** out);
FACEBB_API facebb_status facebb_image_load(const char* path, facebb_image** out);
FACEBB_API facebb_status facebb_image_save(const facebb_image* img, const char* path);
FACEBB_API void facebb_image_free(facebb_image* img);
FACEBB_API facebb_status facebb_image_shape(const facebb_image* img, int* height, int* width,
                                            int* channels);
FACEBB_API const double* facebb_image_data(const facebb_image* img);
FACEBB_API facebb_status facebb_project(const facebb_image* origin, const facebb_image* candidate,
                                        double epsilon_255, facebb_image** out);
FACEBB_API facebb_status facebb_l2_diff(const facebb_image* a, const facebb_image* b, double* out);
FACEBB_API facebb_status facebb_ssim(const facebb_image* a, const facebb_image* b, double* out);
FACEBB_API facebb_status facebb_dssim(const facebb_image* a, const facebb_image* b, double* out);

/* ---- oracles --------------------------------------------------------- */

FACEBB_API facebb_status facebb_oracle_toy(uint64_t seed, int height, int width, int channels,
                                           int embed_dim, facebb_oracle** out);
/* "tcp://host:port" or "stdio:<command>"; NULL reads FACEBB_ORACLE. */
FACEBB_API facebb_status facebb_oracle_connect(const char* endpoint, facebb_oracle** out);
FACEBB_API void facebb_oracle_free(facebb_oracle* oracle);
FACEBB_API facebb_status facebb_oracle_input_dims(const facebb_oracle* oracle, int* height,
                                                  int* width, int* channels);
FACEBB_API int facebb_oracle_embed_dim(const facebb_oracle* oracle);
/* Uncharged embedding into out[0..capacity); *dim receives the length. */
FACEBB_API facebb_status facebb_oracle_embed(facebb_oracle* oracle, const facebb_image* img,
                                             double* out, size_t capacity, size_t* dim);
FACEBB_API facebb_status facebb_verify(facebb_oracle* oracle, const facebb_image* source,
                                       const facebb_image* target, double d_b, int* match,
                                       double* distance);

/* ---- attacks --------------------------------------------------------- */

typedef struct facebb_attack_options {
  double epsilon_255;
  int64_t query_limit;
  double d_b;
  uint64_t seed;
  double step_rate;
  int nes_population;
  double nes_sigma;
  int bandits_tile_size;
  double bandits_exploration;
  double bandits_prior_step;
  double bandits_finite_diff_probe;
  double simba_step;
  int simba_dct; /* 0: pixel basis */
  int64_t simba_budget_queries;
  double square_p_init;
} facebb_attack_options;

FACEBB_API void facebb_attack_options_default(facebb_attack_options* opts);

/* attack: "nes", "bandits", "simba" or "square". The target image is
 * perturbed; the source provides the reference embedding. opts may be NULL
 * for the defaults. */
FACEBB_API facebb_status facebb_attack_run(const char* attack, const facebb_image* source,
                                           const facebb_image* target, facebb_oracle* oracle,
                                           const facebb_attack_options* opts, facebb_trace** out);
FACEBB_API void facebb_trace_free(facebb_trace* trace);
FACEBB_API int facebb_trace_success(const facebb_trace* trace);
FACEBB_API int64_t facebb_trace_queries(const facebb_trace* trace);
FACEBB_API size_t facebb_trace_step_count(const facebb_trace* trace);
FACEBB_API facebb_status facebb_trace_step(const facebb_trace* trace, size_t index,
                                           int64_t* query_count, double* distance);
FACEBB_API double facebb_trace_magnitude(const facebb_trace* trace);
/* Borrowed; lives as long as the trace. */
FACEBB_API const facebb_image* facebb_trace_final_image(const facebb_trace* trace);
FACEBB_API facebb_status facebb_trace_write_jsonl(const facebb_trace* trace, const char* path);

/* ---- threshold ------------------------------------------------------- */

FACEBB_API facebb_status facebb_threshold_select_scores(const double* distances, const int* labels,
                                                        size_t n, double* d_b, double* f1);
/* oracle_spec: "toy", "tcp://...", "stdio:..." or NULL (FACEBB_ORACLE).
 * curve_csv may be NULL. */
FACEBB_API facebb_status facebb_threshold_select(const char* pairs_csv, const char* oracle_spec,
                                                 uint64_t toy_seed, const char* curve_csv,
                                                 double* d_b, double* f1);

/* ---- sweeps and reports ----------------------------------------------- */

FACEBB_API facebb_status facebb_sweep_config_new(facebb_sweep_config** out);
FACEBB_API facebb_status facebb_sweep_config_load(const char* path, facebb_sweep_config** out);
/* Same keys and value syntax as the config file. */
FACEBB_API facebb_status facebb_sweep_config_set(facebb_sweep_config* cfg, const char* key,
                                                 const char* value);
FACEBB_API void facebb_sweep_config_free(facebb_sweep_config* cfg);
FACEBB_API facebb_status facebb_sweep_config_hash(const facebb_sweep_config* cfg, char** out);
/* *result_json: {"config_hash","d_b","summary_csv","rows":[...],...} */
FACEBB_API facebb_status facebb_sweep_run(const facebb_sweep_config* cfg, char** result_json);
FACEBB_API facebb_status facebb_report(const char* sweep_dir, const char* const* manifests,
                                       const char* const* votes, size_t n_surveys,
                                       char** result_json);

/* ---- surveys --------------------------------------------------------- */

FACEBB_API facebb_status facebb_survey_pack(const char* sweep_dir, const char* attack,
                                            double epsilon_255, int images, uint64_t seed,
                                            const char* out_dir, size_t* written);
FACEBB_API facebb_status facebb_survey_score(const char* manifest, const char* votes,
                                             double* human_accuracy);

/* ---- toy benchmark --------------------------------------------------- */

FACEBB_API facebb_status facebb_write_toy_benchmark(const char* dir, uint64_t seed,
                                                    int matching_pairs, int nonmatching_pairs,
                                                    int height, int width, int channels,
                                                    double noise, char** pairs_csv);

#ifdef __cplusplus
}
#endif

#endif
