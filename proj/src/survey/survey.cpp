#include "survey/survey.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace facebb {

using json = nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string random_token(std::mt19937_64& rng) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

struct Slot {
  std::size_t item;
  bool altered;
};

}  // namespace

Answer parse_answer(const std::string& s) {
  const std::string v = lower(trim(s));
  if (v == "altered") return Answer::Altered;
  if (v == "not_altered" || v == "not altered") return Answer::NotAltered;
  if (v == "cannot_tell" || v == "cannot tell") return Answer::CannotTell;
  fail(ErrorCode::InvalidArgument, "unknown survey answer '" + s + "'");
}

std::string to_string(Answer a) {
  switch (a) {
    case Answer::Altered: return "altered";
    case Answer::NotAltered: return "not_altered";
    case Answer::CannotTell: return "cannot_tell";
  }
  return "cannot_tell";
}

std::string to_string(MajorityKind k) {
  switch (k) {
    case MajorityKind::Altered: return "ALTERED";
    case MajorityKind::NotAltered: return "NOT_ALTERED";
    case MajorityKind::NoMajority: return "NO_MAJORITY";
  }
  return "NO_MAJORITY";
}

SurveyManifest build_packet(const std::vector<PacketItem>& items, const CalibrationPair& calibration,
                            int n, std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (n < 0) fail(ErrorCode::InvalidArgument, "survey size must be >= 0");
  if (calibration.unaltered.empty() || calibration.attacked.empty())
    fail(ErrorCode::InvalidArgument, "survey packet needs a calibration pair");
  for (const auto& it : items) {
    if (it.outcome != Outcome::Success)
      fail(ErrorCode::InvalidArgument, "survey packets only use successful attacks");
    if (it.attack != items.front().attack)
      fail(ErrorCode::InvalidArgument, "survey packet items must come from a single attack");
  }

  const std::size_t n_altered = (static_cast<std::size_t>(n) + 1) / 2;
  const std::size_t n_unaltered = static_cast<std::size_t>(n) - n_altered;
  if (items.size() < n_altered)
    fail(ErrorCode::Precondition, "insufficient successful traces for a survey of " +
                                      std::to_string(n) + " images (have " +
                                      std::to_string(items.size()) + ")");

  std::mt19937_64 rng(mix_seed(seed, fnv1a("survey-packet")));
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  // Altered images come first in shuffled order. Unaltered images prefer
  // faces that are not shown altered, falling back to counterparts.
  std::vector<Slot> slots;
  for (std::size_t k = 0; k < n_altered; ++k) slots.push_back({order[k], true});
  for (std::size_t k = 0; k < n_unaltered; ++k) {
    const std::size_t pos = n_altered + k;
    slots.push_back({pos < order.size() ? order[pos] : order[pos - order.size()], false});
  }

  // Tokens decide the presentation order (entries are sorted by token); an
  // image's two versions must never sort next to each other.
  std::vector<std::string> tokens;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000)
      fail(ErrorCode::Precondition, "cannot separate altered/unaltered versions of the same face");
    tokens.clear();
    std::set<std::string> seen;
    while (tokens.size() < slots.size()) {
      std::string t = random_token(rng);
      if (seen.insert(t).second) tokens.push_back(std::move(t));
    }
    std::vector<std::size_t> by_token(slots.size());
    for (std::size_t i = 0; i < by_token.size(); ++i) by_token[i] = i;
    std::sort(by_token.begin(), by_token.end(),
              [&](std::size_t a, std::size_t b) { return tokens[a] < tokens[b]; });
    bool ok = true;
    for (std::size_t i = 1; i < by_token.size() && ok; ++i)
      ok = slots[by_token[i]].item != slots[by_token[i - 1]].item;
    if (ok) break;
  }

  std::filesystem::create_directories(out_dir / "calibration");
  save_image(calibration.unaltered, out_dir / "calibration" / "unaltered.png");
  save_image(calibration.attacked, out_dir / "calibration" / "attacked.png");

  SurveyManifest m;
  m.seed = seed;
  m.attack = items.empty() ? std::string() : items.front().attack;
  std::set<double> eps;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const PacketItem& item = items[slots[i].item];
    ManifestEntry e;
    e.image_id = tokens[i];
    e.altered = slots[i].altered;
    e.source_trace = item.trace_ref;
    if (e.altered) {
      e.attack = item.attack;
      e.epsilon = item.epsilon;
      eps.insert(item.epsilon);
    }
    save_image(e.altered ? item.adversarial : item.original, out_dir / (e.image_id + ".png"));
    m.entries.push_back(std::move(e));
  }
  if (eps.size() == 1) m.epsilon = *eps.begin();
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.image_id < b.image_id; });
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

MajorityLabel majority_label(const std::vector<VoteRecord>& votes) {
  if (votes.empty()) fail(ErrorCode::InvalidArgument, "majority_label: no votes");
  MajorityLabel out;
  out.image_id = votes.front().image_id;
  for (const auto& v : votes) {
    if (v.image_id != out.image_id)
      fail(ErrorCode::InvalidArgument, "majority_label: votes for different images");
    switch (v.answer) {
      case Answer::Altered: ++out.altered_votes; break;
      case Answer::NotAltered: ++out.not_altered_votes; break;
      case Answer::CannotTell: ++out.cannot_tell_votes; break;
    }
  }
  // CANNOT_TELL is tallied but never wins.
  if (out.altered_votes > out.not_altered_votes)
    out.label = MajorityKind::Altered;
  else if (out.not_altered_votes > out.altered_votes)
    out.label = MajorityKind::NotAltered;
  else
    out.label = MajorityKind::NoMajority;
  return out;
}

std::vector<MajorityLabel> majority_labels(const std::vector<VoteRecord>& votes) {
  std::map<std::string, std::vector<VoteRecord>> by_image;
  for (const auto& v : votes) by_image[v.image_id].push_back(v);
  std::vector<MajorityLabel> out;
  out.reserve(by_image.size());
  for (const auto& [id, vs] : by_image) out.push_back(majority_label(vs));
  return out;
}

double human_accuracy(const SurveyManifest& manifest, const std::vector<MajorityLabel>& labels) {
  if (manifest.entries.empty()) fail(ErrorCode::InvalidArgument, "human_accuracy: empty manifest");
  std::map<std::string, MajorityKind> by_id;
  for (const auto& l : labels) by_id[l.image_id] = l.label;
  std::size_t correct = 0;
  for (const auto& e : manifest.entries) {
    const auto it = by_id.find(e.image_id);
    if (it == by_id.end())
      fail(ErrorCode::InvalidArgument, "no votes for survey image " + e.image_id);
    const MajorityKind truth = e.altered ? MajorityKind::Altered : MajorityKind::NotAltered;
    if (it->second == truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(manifest.entries.size());
}

void write_manifest(const SurveyManifest& m, const std::filesystem::path& path) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"image_id", e.image_id},
                       {"attack", e.attack ? json(*e.attack) : json(nullptr)},
                       {"epsilon", e.epsilon ? json(*e.epsilon) : json(nullptr)},
                       {"altered", e.altered},
                       {"source_trace", e.source_trace}});
  }
  const json j = {{"attack", m.attack},
                  {"epsilon", m.epsilon ? json(*m.epsilon) : json(nullptr)},
                  {"seed", m.seed},
                  {"calibration",
                   {{"unaltered", "calibration/unaltered.png"},
                    {"attacked", "calibration/attacked.png"}}},
                  {"entries", entries}};
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::Io, "write failed: " + path.string());
}

SurveyManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open manifest " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::Decode, "manifest is not valid JSON: " + path.string());
  SurveyManifest m;
  try {
    m.attack = j.value("attack", std::string());
    if (j.contains("epsilon") && !j["epsilon"].is_null()) m.epsilon = j["epsilon"].get<double>();
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.image_id = e.at("image_id").get<std::string>();
      me.altered = e.at("altered").get<bool>();
      if (e.contains("attack") && !e["attack"].is_null()) me.attack = e["attack"].get<std::string>();
      if (e.contains("epsilon") && !e["epsilon"].is_null()) me.epsilon = e["epsilon"].get<double>();
      me.source_trace = e.value("source_trace", std::string());
      m.entries.push_back(std::move(me));
    }
  } catch (const json::exception& ex) {
    fail(ErrorCode::Decode, "bad manifest " + path.string() + ": " + ex.what());
  }
  return m;
}

std::vector<VoteRecord> read_votes_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open votes " + path.string());
  std::string line;
  if (!std::getline(in, line) || lower(trim(line)) != "image_id,worker_id,answer")
    fail(ErrorCode::Decode, path.string() + ": expected header image_id,worker_id,answer");
  std::vector<VoteRecord> votes;
  for (int row = 2; std::getline(in, line); ++row) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) cols.push_back(trim(col));
    if (cols.size() != 3)
      fail(ErrorCode::Decode, path.string() + ": row " + std::to_string(row) + ": expected 3 columns");
    try {
      votes.push_back({cols[0], cols[1], parse_answer(cols[2])});
    } catch (const Error& e) {
      fail(ErrorCode::Decode, path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return votes;
}

void write_votes_csv(const std::vector<VoteRecord>& votes, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "image_id,worker_id,answer\n";
  for (const auto& v : votes) out << v.image_id << ',' << v.worker_id << ',' << to_string(v.answer) << '\n';
}

}  // namespace facebb
