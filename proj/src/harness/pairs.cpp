#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "harness/harness.hpp"

namespace facebb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<PairRecord> read_pair_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open pair list " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "source,target,label")
    fail(ErrorCode::Decode, path.string() + ": row 1: expected header source,target,label");

  const auto base = path.parent_path();
  std::vector<PairRecord> out;
  for (int row = 2; std::getline(in, line); ++row) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) cols.push_back(trim(col));
    const std::string where = path.string() + ": row " + std::to_string(row) + ": ";
    if (cols.size() != 3) fail(ErrorCode::Decode, where + "expected 3 columns");
    PairRecord rec;
    rec.source_path = cols[0];
    rec.target_path = cols[1];
    if (rec.source_path.is_relative()) rec.source_path = base / rec.source_path;
    if (rec.target_path.is_relative()) rec.target_path = base / rec.target_path;
    if (cols[2] == "1")
      rec.label = 1;
    else if (cols[2] == "0")
      rec.label = 0;
    else
      fail(ErrorCode::Decode, where + "label must be 0 or 1");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<FacePair> load_pairs(const std::filesystem::path& path, int want_channels) {
  const auto records = read_pair_records(path);
  std::vector<FacePair> pairs;
  pairs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = path.string() + ": row " + std::to_string(i + 2) + ": ";
    try {
      FacePair p;
      p.source = load_image(records[i].source_path);
      p.target = load_image(records[i].target_path);
      p.label = records[i].label;
      if (want_channels == 3) {
        p.source = broadcast_to_rgb(p.source);
        p.target = broadcast_to_rgb(p.target);
      }
      require_same_shape(p.source, p.target, "pair");
      if (!pairs.empty() && !p.source.same_shape(pairs.front().source))
        fail(ErrorCode::ShapeMismatch, "all pairs must share one image shape");
      pairs.push_back(std::move(p));
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
  }
  return pairs;
}

}  // namespace facebb
