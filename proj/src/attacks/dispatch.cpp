#include <algorithm>

#include "attacks/attacks.hpp"
#include "core/error.hpp"

namespace facebb {

const std::vector<std::string>& attack_names() {
  static const std::vector<std::string> names = {"nes", "bandits", "simba", "square"};
  return names;
}

bool is_attack_name(std::string_view name) {
  const auto& names = attack_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

AttackTrace run_attack(std::string_view name, const FacePair& pair, Oracle& oracle,
                       const AttackConfig& cfg) {
  AttackTrace trace;
  if (name == "nes")
    trace = attack_nes(pair, oracle, cfg);
  else if (name == "bandits")
    trace = attack_bandits(pair, oracle, cfg);
  else if (name == "simba")
    trace = attack_simba(pair, oracle, cfg);
  else if (name == "square")
    trace = attack_square(pair, oracle, cfg);
  else
    fail(ErrorCode::InvalidArgument,
         "unknown attack '" + std::string(name) + "' (expected nes, bandits, simba or square)");
  trace.magnitude = l2_diff(trace.final_image, pair.target);
  return trace;
}

}  // namespace facebb
