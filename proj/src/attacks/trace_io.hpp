#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>

#include "attacks/attacks.hpp"

namespace facebb {

nlohmann::json config_to_json(const AttackConfig& cfg);
AttackConfig config_from_json(const nlohmann::json& j);

// JSONL: one header record, then one {"q","d"} record per step. Keys in
// extra (an object) are added to the header, e.g. the sweep's config hash.
void write_trace_jsonl(const AttackTrace& trace, std::ostream& out,
                       const nlohmann::json& extra = nlohmann::json::object());
void write_trace_jsonl(const AttackTrace& trace, const std::filesystem::path& path,
                       const nlohmann::json& extra = nlohmann::json::object());

// Header record only.
nlohmann::json read_trace_header(const std::filesystem::path& path);

// Restores everything except final_image.
AttackTrace read_trace_jsonl(std::istream& in);
AttackTrace read_trace_jsonl(const std::filesystem::path& path);

}  // namespace facebb
