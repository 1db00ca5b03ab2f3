#include "attacks/trace_io.hpp"

#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace facebb {

using json = nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

json config_to_json(const AttackConfig& cfg) {
  return {{"epsilon", cfg.budget.epsilon_255()},
          {"query_limit", cfg.query_limit},
          {"step_rate", cfg.step_rate},
          {"d_b", cfg.d_b},
          {"seed", cfg.seed},
          {"nes", {{"population", cfg.nes.population}, {"sigma", cfg.nes.sigma}}},
          {"bandits",
           {{"tile_size", cfg.bandits.tile_size},
            {"exploration", cfg.bandits.exploration},
            {"prior_step", cfg.bandits.prior_step},
            {"finite_diff_probe", cfg.bandits.finite_diff_probe}}},
          {"simba",
           {{"step", cfg.simba.step},
            {"basis", cfg.simba.basis == SimbaBasis::Pixel ? "pixel" : "dct"},
            {"budget_queries", cfg.simba.budget_queries}}},
          {"square", {{"p_init", cfg.square.p_init}}}};
}

AttackConfig config_from_json(const json& j) {
  AttackConfig cfg;
  try {
    cfg.budget = EpsilonBudget(j.at("epsilon").get<double>());
    cfg.query_limit = j.at("query_limit").get<std::int64_t>();
    cfg.step_rate = j.at("step_rate").get<double>();
    cfg.d_b = j.at("d_b").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    const auto& nes = j.at("nes");
    cfg.nes.population = nes.at("population").get<int>();
    cfg.nes.sigma = nes.at("sigma").get<double>();
    const auto& b = j.at("bandits");
    cfg.bandits.tile_size = b.at("tile_size").get<int>();
    cfg.bandits.exploration = b.at("exploration").get<double>();
    cfg.bandits.prior_step = b.at("prior_step").get<double>();
    cfg.bandits.finite_diff_probe = b.at("finite_diff_probe").get<double>();
    const auto& s = j.at("simba");
    cfg.simba.step = s.at("step").get<double>();
    cfg.simba.basis = s.at("basis").get<std::string>() == "dct" ? SimbaBasis::Dct
                                                                : SimbaBasis::Pixel;
    cfg.simba.budget_queries = s.at("budget_queries").get<std::int64_t>();
    cfg.square.p_init = j.at("square").at("p_init").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Decode, std::string("bad attack config record: ") + e.what());
  }
  return cfg;
}

void write_trace_jsonl(const AttackTrace& trace, std::ostream& out, const json& extra) {
  json header = {{"type", "header"},
                       {"attack", trace.attack},
                       {"seed", trace.config.seed},
                       {"config", config_to_json(trace.config)},
                       {"outcome", std::string(to_string(trace.outcome))},
                       {"queries_used", trace.queries_used},
                       {"magnitude", optional_number(trace.magnitude)},
                       {"dssim", optional_number(trace.dssim)},
                       {"steps", trace.steps.size()}};
  for (const auto& [k, v] : extra.items())
    if (!header.contains(k)) header[k] = v;
  out << header.dump() << '\n';
  for (const auto& s : trace.steps) out << json{{"q", s.query_count}, {"d", s.distance}}.dump() << '\n';
}

void write_trace_jsonl(const AttackTrace& trace, const std::filesystem::path& path,
                       const json& extra) {
  // Write-then-rename so an interrupted run never leaves a truncated record.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    write_trace_jsonl(trace, out, extra);
    out.flush();
    if (!out) fail(ErrorCode::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

AttackTrace read_trace_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Decode, "empty trace file");
  const json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("type", "") != "header")
    fail(ErrorCode::Decode, "trace file does not start with a header record");

  AttackTrace t;
  try {
    t.attack = header.at("attack").get<std::string>();
    t.config = config_from_json(header.at("config"));
    t.outcome = header.at("outcome").get<std::string>() == "SUCCESS" ? Outcome::Success
                                                                     : Outcome::Failure;
    t.queries_used = header.at("queries_used").get<std::int64_t>();
    t.magnitude = read_optional(header, "magnitude");
    t.dssim = read_optional(header, "dssim");
    const auto expected = header.at("steps").get<std::size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      t.steps.push_back({rec.at("q").get<std::int64_t>(), rec.at("d").get<double>()});
    }
    if (t.steps.size() != expected) fail(ErrorCode::Decode, "trace file is truncated");
  } catch (const json::exception& e) {
    fail(ErrorCode::Decode, std::string("bad trace record: ") + e.what());
  }
  return t;
}

AttackTrace read_trace_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open trace " + path.string());
  try {
    return read_trace_jsonl(in);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

json read_trace_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open trace " + path.string());
  std::string line;
  std::getline(in, line);
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("type", "") != "header")
    fail(ErrorCode::Decode, path.string() + ": trace file does not start with a header record");
  return header;
}

}  // namespace facebb
