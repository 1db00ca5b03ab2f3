#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attacks/attacks.hpp"
#include "core/image.hpp"

namespace facebb {

enum class Answer { Altered, NotAltered, CannotTell };

struct ManifestEntry {
  std::string image_id;  // random token, also the file stem
  std::optional<std::string> attack;
  std::optional<double> epsilon;
  bool altered = false;
  std::string source_trace;
};

struct SurveyManifest {
  std::string attack;
  std::optional<double> epsilon;  // set when every altered image shares one
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;  // sorted by image_id
};

struct VoteRecord {
  std::string image_id;
  std::string worker_id;
  Answer answer = Answer::CannotTell;
};

enum class MajorityKind { Altered, NotAltered, NoMajority };

struct MajorityLabel {
  std::string image_id;
  MajorityKind label = MajorityKind::NoMajority;
  int altered_votes = 0;
  int not_altered_votes = 0;
  int cannot_tell_votes = 0;
};

// One successful attack, with the unaltered image it started from.
struct PacketItem {
  std::string trace_ref;
  std::string attack;
  double epsilon = 0.0;
  Outcome outcome = Outcome::Success;
  Image original;
  Image adversarial;
};

// Shown before the survey: an unaltered face and the same face attacked at a
// clearly visible budget (eps = 50).
struct CalibrationPair {
  Image unaltered;
  Image attacked;
};

// Writes <token>.png for n sampled images (ceil(n/2) altered, the rest
// unaltered), calibration/{unaltered,attacked}.png and manifest.json.
SurveyManifest build_packet(const std::vector<PacketItem>& items, const CalibrationPair& calibration,
                            int n, std::uint64_t seed, const std::filesystem::path& out_dir);

MajorityLabel majority_label(const std::vector<VoteRecord>& votes);

// Groups votes by image and labels each image.
std::vector<MajorityLabel> majority_labels(const std::vector<VoteRecord>& votes);

// Fraction of manifest entries whose majority label matches the altered
// flag. NO_MAJORITY counts as incorrect.
double human_accuracy(const SurveyManifest& manifest, const std::vector<MajorityLabel>& labels);

void write_manifest(const SurveyManifest& manifest, const std::filesystem::path& path);
SurveyManifest read_manifest(const std::filesystem::path& path);

// CSV with header image_id,worker_id,answer; answers are altered,
// not_altered or cannot_tell (case-insensitive).
std::vector<VoteRecord> read_votes_csv(const std::filesystem::path& path);
void write_votes_csv(const std::vector<VoteRecord>& votes, const std::filesystem::path& path);

Answer parse_answer(const std::string& s);
std::string to_string(Answer a);
std::string to_string(MajorityKind k);

}  // namespace facebb
