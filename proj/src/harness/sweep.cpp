#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>

#include "attacks/trace_io.hpp"
#include "core/error.hpp"
#include "harness/detail.hpp"
#include "harness/harness.hpp"

namespace facebb {

using json = nlohmann::json;

namespace harness_detail {

namespace {

std::string eps_label(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "eps_%g", e);
  return buf;
}

}  // namespace

std::filesystem::path cell_dir(const std::filesystem::path& out, const std::string& attack,
                               double epsilon_255) {
  return out / "traces" / attack / eps_label(epsilon_255);
}

std::filesystem::path trace_file(const std::filesystem::path& out, const std::string& attack,
                                 double epsilon_255, std::size_t pair_index) {
  return cell_dir(out, attack, epsilon_255) / ("pair_" + std::to_string(pair_index) + ".jsonl");
}

std::filesystem::path image_file(const std::filesystem::path& out, const std::string& attack,
                                 double epsilon_255, std::size_t pair_index) {
  return cell_dir(out, attack, epsilon_255) / ("pair_" + std::to_string(pair_index) + ".png");
}

void write_run_info(const std::filesystem::path& out, const RunInfo& info) {
  const json j = {{"config_hash", info.config_hash},
                  {"seed", info.seed},
                  {"d_b", info.d_b},
                  {"d_b_selected", info.d_b_selected},
                  {"eligible_pairs", info.eligible_pairs},
                  {"skipped_pairs", info.skipped_pairs},
                  {"config", info.config}};
  const auto path = out / "run.json";
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) fail(ErrorCode::Io, "write failed: " + path.string());
}

std::optional<RunInfo> read_run_info(const std::filesystem::path& out) {
  const auto path = out / "run.json";
  std::ifstream f(path);
  if (!f) return std::nullopt;
  const json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::Decode, path.string() + " is not valid JSON");
  RunInfo info;
  try {
    info.config_hash = j.at("config_hash").get<std::string>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.d_b = j.at("d_b").get<double>();
    info.d_b_selected = j.value("d_b_selected", false);
    info.eligible_pairs = j.at("eligible_pairs").get<std::size_t>();
    info.skipped_pairs = j.at("skipped_pairs").get<std::size_t>();
    info.config = j.at("config");
  } catch (const json::exception& e) {
    fail(ErrorCode::Decode, "bad " + path.string() + ": " + e.what());
  }
  return info;
}

std::string provenance_line(const RunInfo& info) {
  return "# seed=" + std::to_string(info.seed) + " config_hash=" + info.config_hash;
}

SweepConfig config_from_canonical(const json& j) {
  SweepConfig cfg;
  try {
    cfg.pairs_file = j.at("pairs").get<std::string>();
    const auto& o = j.at("oracle");
    cfg.oracle.kind = o.at("kind").get<std::string>() == "toy" ? OracleSpec::Kind::Toy
                                                              : OracleSpec::Kind::External;
    cfg.oracle.toy_seed = o.at("toy_seed").get<std::uint64_t>();
    cfg.oracle.toy_embed_dim = o.at("toy_embed_dim").get<int>();
    cfg.oracle.endpoint = o.at("endpoint").get<std::string>();
    if (j.at("d_b").is_number()) cfg.d_b = j.at("d_b").get<double>();
    cfg.attacks = j.at("attacks").get<std::vector<std::string>>();
    cfg.epsilon_grid_255.clear();
    for (const auto& e : j.at("epsilons")) cfg.epsilon_grid_255.push_back(std::stod(e.get<std::string>()));
    cfg.nes_extended = j.at("nes_extended").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.simba_k = j.at("simba_k").get<double>();
    cfg.attack = config_from_json(j.at("attack"));
    cfg.query_limit = cfg.attack.query_limit;
  } catch (const json::exception& e) {
    fail(ErrorCode::Decode, std::string("bad run config record: ") + e.what());
  }
  return cfg;
}

std::vector<FacePair> load_pairs_for(const SweepConfig& cfg, Oracle& oracle) {
  return load_pairs(cfg.pairs_file, oracle.input_dims().channels == 3 ? 3 : 0);
}

}  // namespace harness_detail

using namespace harness_detail;

namespace {

struct Cell {
  std::string attack;
  double epsilon_255;
  std::size_t pair_index;
};

int worker_count(const SweepConfig& cfg, std::size_t cells) {
  int n = cfg.workers;
  if (n == 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(cells, 1)));
}

void prepend_line(const std::filesystem::path& path, const std::string& line) {
  std::string body;
  {
    std::ifstream in(path, std::ios::binary);
    body.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << line << '\n' << body;
  if (!f) fail(ErrorCode::Io, "write failed: " + path.string());
}

bool cell_done(const std::filesystem::path& path, const std::string& hash) {
  if (!std::filesystem::exists(path)) return false;
  try {
    const json h = read_trace_header(path);
    return h.value("config_hash", "") == hash;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

OracleFactory make_oracle_factory(const SweepConfig& cfg, const InputDims& dims) {
  if (cfg.oracle.kind == OracleSpec::Kind::Toy) {
    ToyEmbedderSpec spec;
    spec.seed = cfg.oracle.toy_seed;
    spec.input = dims;
    spec.embed_dim = cfg.oracle.toy_embed_dim;
    return [spec] { return std::unique_ptr<Oracle>(std::make_unique<ToyOracle>(spec)); };
  }
  std::string endpoint = cfg.oracle.endpoint;
  if (endpoint.empty()) {
    const char* env = std::getenv("FACEBB_ORACLE");
    if (env == nullptr || *env == '\0')
      fail(ErrorCode::InvalidArgument,
           "external oracle selected but no endpoint given (set oracle_endpoint or FACEBB_ORACLE)");
    endpoint = env;
  }
  return [endpoint] { return std::unique_ptr<Oracle>(WireOracle::connect(endpoint)); };
}

SweepResult run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const auto records = read_pair_records(cfg.pairs_file);
  if (records.empty()) fail(ErrorCode::Precondition, "pair list is empty: " + cfg.pairs_file.string());
  const Image first = load_image(records.front().source_path);
  return run_sweep(cfg, make_oracle_factory(cfg, {first.height(), first.width(), first.channels()}));
}

SweepResult run_sweep(const SweepConfig& cfg, const OracleFactory& factory) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  const auto& out = cfg.output_dir;
  std::filesystem::create_directories(out);
  if (const auto prior = read_run_info(out); prior && prior->config_hash != hash)
    fail(ErrorCode::Precondition, out.string() + " holds a run with config hash " +
                                      prior->config_hash + "; this config hashes to " + hash +
                                      " (use another output_dir)");

  std::unique_ptr<Oracle> primary = factory();
  const auto pairs = load_pairs_for(cfg, *primary);

  RunInfo info;
  info.config_hash = hash;
  info.seed = cfg.seed;
  info.config = canonical_config(cfg);
  if (cfg.d_b) {
    info.d_b = *cfg.d_b;
  } else {
    const auto selection = select_threshold(score_pairs(pairs, *primary));
    info.d_b = selection.d_b;
    info.d_b_selected = true;
    const auto curve_path = out / "pr_curve.csv";
    write_curve_csv(selection.curve, curve_path);
    prepend_line(curve_path, provenance_line(info));
  }
  VerifierConfig{info.d_b}.validate();

  // Only labelled matches that the oracle verifies as MATCH are attacked.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].label == 1 && verify(*primary, pairs[i], VerifierConfig{info.d_b}).match)
      eligible.push_back(i);
  }
  info.eligible_pairs = eligible.size();
  info.skipped_pairs = pairs.size() - eligible.size();
  write_run_info(out, info);
  if (eligible.empty()) fail(ErrorCode::Precondition, "no pair verifies as MATCH; nothing to attack");

  std::vector<Cell> todo;
  std::size_t resumed = 0;
  for (const auto& attack : cfg.attacks)
    for (double eps : cfg.grid_for(attack))
      for (std::size_t i : eligible) {
        if (cell_done(trace_file(out, attack, eps, i), hash))
          ++resumed;
        else
          todo.push_back({attack, eps, i});
      }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t pixel_count = pairs.front().target.size();

  auto work = [&](Oracle& oracle) {
    while (!stop.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const Cell& cell = todo[k];
      try {
        const FacePair& pair = pairs[cell.pair_index];
        AttackConfig ac = cfg.attack;
        ac.budget = EpsilonBudget(cell.epsilon_255);
        ac.query_limit = cfg.query_limit;
        ac.d_b = info.d_b;
        ac.seed = cell_seed(cfg.seed, cell.attack, cell.epsilon_255, cell.pair_index);
        if (cell.attack == "simba")
          ac.simba.budget_queries =
              simba_budget_for(cell.epsilon_255, pixel_count, ac.simba.step, cfg.simba_k);
        AttackTrace trace = run_attack(cell.attack, pair, oracle, ac);
        if (ssim_applicable(pair.target)) trace.dssim = dssim(trace.final_image, pair.target);

        std::filesystem::create_directories(cell_dir(out, cell.attack, cell.epsilon_255));
        save_image(trace.final_image, image_file(out, cell.attack, cell.epsilon_255, cell.pair_index));
        // The JSONL is written last; its presence marks the cell complete.
        write_trace_jsonl(trace, trace_file(out, cell.attack, cell.epsilon_255, cell.pair_index),
                          json{{"config_hash", hash}, {"pair_index", cell.pair_index}});
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  const int n_workers = worker_count(cfg, todo.size());
  if (!todo.empty()) {
    std::vector<std::unique_ptr<Oracle>> extra;
    if (!primary->concurrency_safe())
      for (int w = 1; w < n_workers; ++w) extra.push_back(factory());
    std::vector<std::thread> threads;
    for (int w = 1; w < n_workers; ++w) {
      Oracle& o = primary->concurrency_safe() ? *primary : *extra[w - 1];
      threads.emplace_back(work, std::ref(o));
    }
    work(*primary);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  const ReportResult report = write_report(out, cfg.surveys);
  SweepResult result;
  result.config_hash = hash;
  result.d_b = info.d_b;
  result.rows = report.rows;
  result.eligible_pairs = info.eligible_pairs;
  result.skipped_pairs = info.skipped_pairs;
  result.computed_cells = todo.size();
  result.resumed_cells = resumed;
  result.summary_csv = report.summary_csv;
  return result;
}

}  // namespace facebb
