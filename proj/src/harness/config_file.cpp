#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "attacks/trace_io.hpp"
#include "harness/harness.hpp"

namespace facebb {

using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  fail(ErrorCode::InvalidArgument,
       "config key '" + key + "': expected " + want + ", got '" + value + "'");
}

std::string parse_string(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
    return v.substr(1, v.size() - 2);
  if (v.empty() || v.front() == '"' || v.front() == '[') bad_value(key, raw, "a string");
  return v;  // bare words are accepted for CLI convenience
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, raw, "a number");
  }
  if (used != v.size() || !std::isfinite(out)) bad_value(key, raw, "a number");
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    bad_value(key, raw, "an integer");
  }
  if (used != v.size()) bad_value(key, raw, "an integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    bad_value(key, raw, "a non-negative integer");
  }
  if (used != v.size()) bad_value(key, raw, "a non-negative integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, raw, "true or false");
}

// "[a, b, c]" or a bare comma list.
std::vector<std::string> parse_list(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') bad_value(key, raw, "a [list]");
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  std::string cur;
  char quote = 0;
  for (char c : v) {
    if (quote) {
      cur.push_back(c);
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
      cur.push_back(c);
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  for (const auto& item : out)
    if (item.empty()) bad_value(key, raw, "a list without empty items");
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  for (const auto& s : parse_list(key, raw)) out.push_back(parse_double(key, s));
  return out;
}

std::vector<std::string> parse_string_list(const std::string& key, const std::string& raw) {
  std::vector<std::string> out;
  for (const auto& s : parse_list(key, raw)) out.push_back(parse_string(key, s));
  return out;
}

// Strips a trailing # comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string format_eps(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", e);
  return buf;
}

}  // namespace

void apply_setting(SweepConfig& cfg, const std::string& key_in, const std::string& value) {
  const std::string key = trim(key_in);
  auto& a = cfg.attack;
  if (key == "pairs" || key == "pairs_file") {
    cfg.pairs_file = parse_string(key, value);
  } else if (key == "oracle") {
    const std::string v = parse_string(key, value);
    if (v == "toy") {
      cfg.oracle.kind = OracleSpec::Kind::Toy;
    } else if (v == "external") {
      cfg.oracle.kind = OracleSpec::Kind::External;
    } else if (v.rfind("tcp://", 0) == 0 || v.rfind("stdio:", 0) == 0) {
      cfg.oracle.kind = OracleSpec::Kind::External;
      cfg.oracle.endpoint = v;
    } else {
      bad_value(key, value, "toy, external, tcp://host:port or stdio:<cmd>");
    }
  } else if (key == "oracle_endpoint" || key == "oracle.endpoint") {
    cfg.oracle.endpoint = parse_string(key, value);
  } else if (key == "toy_seed" || key == "oracle.toy_seed") {
    cfg.oracle.toy_seed = parse_u64(key, value);
  } else if (key == "toy_embed_dim" || key == "oracle.toy_embed_dim") {
    cfg.oracle.toy_embed_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "d_b") {
    const std::string v = trim(value);
    if (v == "auto" || v == "\"auto\"" || v == "'auto'")
      cfg.d_b.reset();
    else
      cfg.d_b = parse_double(key, value);
  } else if (key == "attacks") {
    cfg.attacks = parse_string_list(key, value);
  } else if (key == "epsilons" || key == "epsilon_grid") {
    cfg.epsilon_grid_255 = parse_double_list(key, value);
  } else if (key == "nes_extended") {
    cfg.nes_extended = parse_bool(key, value);
  } else if (key == "query_limit") {
    cfg.query_limit = parse_int(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "output_dir") {
    cfg.output_dir = parse_string(key, value);
  } else if (key == "workers") {
    cfg.workers = static_cast<int>(parse_int(key, value));
  } else if (key == "step_rate") {
    a.step_rate = parse_double(key, value);
  } else if (key == "nes.population") {
    a.nes.population = static_cast<int>(parse_int(key, value));
  } else if (key == "nes.sigma") {
    a.nes.sigma = parse_double(key, value);
  } else if (key == "bandits.tile_size") {
    a.bandits.tile_size = static_cast<int>(parse_int(key, value));
  } else if (key == "bandits.exploration") {
    a.bandits.exploration = parse_double(key, value);
  } else if (key == "bandits.prior_step") {
    a.bandits.prior_step = parse_double(key, value);
  } else if (key == "bandits.finite_diff_probe") {
    a.bandits.finite_diff_probe = parse_double(key, value);
  } else if (key == "simba.step") {
    a.simba.step = parse_double(key, value);
  } else if (key == "simba.step_255") {
    a.simba.step = parse_double(key, value) / 255.0;
  } else if (key == "simba.basis") {
    const std::string v = parse_string(key, value);
    if (v == "pixel")
      a.simba.basis = SimbaBasis::Pixel;
    else if (v == "dct")
      a.simba.basis = SimbaBasis::Dct;
    else
      bad_value(key, value, "pixel or dct");
  } else if (key == "simba.k") {
    cfg.simba_k = parse_double(key, value);
  } else if (key == "square.p_init") {
    a.square.p_init = parse_double(key, value);
  } else if (key == "survey_manifests" || key == "survey_votes") {
    const auto paths = parse_string_list(key, value);
    if (cfg.surveys.size() < paths.size()) cfg.surveys.resize(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      if (key == "survey_manifests")
        cfg.surveys[i].manifest = paths[i];
      else
        cfg.surveys[i].votes = paths[i];
    }
  } else {
    fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  }
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open config " + path.string());
  SweepConfig cfg;
  std::string section;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    try {
      if (t.front() == '[' && t.back() == ']') {
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::InvalidArgument, "expected key = value");
      std::string key = trim(t.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      apply_setting(cfg, key, t.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }

  const auto base = path.parent_path();
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(cfg.pairs_file);
  resolve(cfg.output_dir);
  for (auto& s : cfg.surveys) {
    resolve(s.manifest);
    resolve(s.votes);
  }
  return cfg;
}

void SweepConfig::validate() const {
  if (pairs_file.empty()) fail(ErrorCode::InvalidArgument, "sweep config needs a pairs file");
  if (attacks.empty()) fail(ErrorCode::InvalidArgument, "sweep config needs at least one attack");
  for (const auto& a : attacks)
    if (!is_attack_name(a)) fail(ErrorCode::InvalidArgument, "unknown attack '" + a + "'");
  if (epsilon_grid_255.empty()) fail(ErrorCode::InvalidArgument, "epsilon grid is empty");
  for (double e : epsilon_grid_255)
    if (!(e >= 0.0)) fail(ErrorCode::InvalidArgument, "epsilon values must be >= 0");
  if (query_limit < 1) fail(ErrorCode::InvalidArgument, "query_limit must be >= 1");
  if (d_b) VerifierConfig{*d_b}.validate();
  if (!(simba_k > 0.0)) fail(ErrorCode::InvalidArgument, "simba.k must be > 0");
  if (oracle.toy_embed_dim <= 0) fail(ErrorCode::InvalidArgument, "toy_embed_dim must be > 0");
  if (workers < 0) fail(ErrorCode::InvalidArgument, "workers must be >= 0");
  for (const auto& s : surveys)
    if (s.manifest.empty() || s.votes.empty())
      fail(ErrorCode::InvalidArgument, "survey_manifests and survey_votes must pair up");
  AttackConfig probe = attack;
  probe.d_b = d_b.value_or(1.0);
  probe.query_limit = query_limit;
  probe.validate();
}

std::vector<double> SweepConfig::grid_for(const std::string& name) const {
  std::set<double> grid(epsilon_grid_255.begin(), epsilon_grid_255.end());
  if (name == "nes" && nes_extended) grid.insert({10.0, 25.0, 30.0, 50.0});
  return {grid.begin(), grid.end()};
}

json canonical_config(const SweepConfig& cfg) {
  json attacks = cfg.attacks;
  json grid = json::array();
  for (double e : cfg.epsilon_grid_255) grid.push_back(format_eps(e));
  AttackConfig a = cfg.attack;
  a.seed = 0;
  a.d_b = 1.0;
  a.budget = EpsilonBudget(0.0);
  a.query_limit = cfg.query_limit;
  return {{"pairs", cfg.pairs_file.lexically_normal().string()},
          {"oracle",
           {{"kind", cfg.oracle.kind == OracleSpec::Kind::Toy ? "toy" : "external"},
            {"toy_seed", cfg.oracle.toy_seed},
            {"toy_embed_dim", cfg.oracle.toy_embed_dim},
            {"endpoint", cfg.oracle.endpoint}}},
          {"d_b", cfg.d_b ? json(*cfg.d_b) : json("auto")},
          {"attacks", attacks},
          {"epsilons", grid},
          {"nes_extended", cfg.nes_extended},
          {"seed", cfg.seed},
          {"simba_k", cfg.simba_k},
          {"attack", config_to_json(a)}};
}

std::string config_hash(const SweepConfig& cfg) {
  const std::string text = canonical_config(cfg).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::Internal, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::int64_t simba_budget_for(double epsilon_255, std::size_t pixel_count, double step, double k) {
  if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "simba step must be > 0");
  const double eps = epsilon_255 / 255.0;
  const double budget = k * k * eps * eps * static_cast<double>(pixel_count) / (step * step);
  return std::max<std::int64_t>(1, std::llround(budget));
}

std::uint64_t cell_seed(std::uint64_t run_seed, const std::string& attack, double epsilon_255,
                        std::size_t pair_index) {
  std::uint64_t s = mix_seed(run_seed, fnv1a(attack));
  s = mix_seed(s, static_cast<std::uint64_t>(std::llround(epsilon_255 * 1000.0)));
  return mix_seed(s, pair_index);
}

}  // namespace facebb
