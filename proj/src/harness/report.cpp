#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "attacks/trace_io.hpp"
#include "core/error.hpp"
#include "harness/detail.hpp"
#include "harness/harness.hpp"
#include "survey/survey.hpp"

namespace facebb {

using json = nlohmann::json;
using namespace harness_detail;

namespace {

using CellKey = std::pair<std::size_t, double>;  // (attack rank, epsilon)

std::size_t attack_rank(const std::string& name) {
  const auto& names = attack_names();
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_eps(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", e);
  return buf;
}

class CsvFile {
 public:
  explicit CsvFile(std::filesystem::path path) : path_(std::move(path)), out_(path_) {
    if (!out_) fail(ErrorCode::Io, "cannot write " + path_.string());
  }
  ~CsvFile() noexcept(false) {
    out_.flush();
    if (!out_ && std::uncaught_exceptions() == 0) fail(ErrorCode::Io, "write failed: " + path_.string());
  }
  std::ostream& operator*() { return out_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::map<CellKey, std::vector<AttackTrace>> collect_traces(const std::filesystem::path& out,
                                                           const std::string& hash) {
  std::map<CellKey, std::vector<AttackTrace>> cells;
  const auto root = out / "traces";
  if (!std::filesystem::exists(root)) return cells;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    if (read_trace_header(f).value("config_hash", "") != hash) continue;
    AttackTrace t = read_trace_jsonl(f);
    if (!is_attack_name(t.attack)) continue;
    cells[{attack_rank(t.attack), t.config.budget.epsilon_255()}].push_back(std::move(t));
  }
  return cells;
}

}  // namespace

double score_survey(const SurveyInput& survey) {
  const SurveyManifest manifest = read_manifest(survey.manifest);
  return human_accuracy(manifest, majority_labels(read_votes_csv(survey.votes)));
}

ReportResult write_report(const std::filesystem::path& out, const std::vector<SurveyInput>& surveys) {
  const auto info = read_run_info(out);
  if (!info) fail(ErrorCode::FileNotFound, "no run.json under " + out.string() + "; not a sweep directory");
  const std::string prov = provenance_line(*info);

  std::map<CellKey, double> human;
  for (const auto& s : surveys) {
    const SurveyManifest m = read_manifest(s.manifest);
    if (!is_attack_name(m.attack) || !m.epsilon)
      fail(ErrorCode::InvalidArgument,
           s.manifest.string() + ": survey manifest must name one attack and one epsilon");
    const CellKey key{attack_rank(m.attack), *m.epsilon};
    if (human.count(key))
      fail(ErrorCode::InvalidArgument, "two surveys cover " + m.attack + " eps=" + format_eps(*m.epsilon));
    human[key] = human_accuracy(m, majority_labels(read_votes_csv(s.votes)));
  }

  ReportResult result;
  for (const auto& [key, traces] : collect_traces(out, info->config_hash)) {
    const auto h = human.find(key);
    result.rows.push_back(aggregate_summary(
        traces, h == human.end() ? std::nullopt : std::optional<double>(h->second)));
  }

  std::vector<double> mags, dssims;
  for (const auto& r : result.rows)
    if (r.avg_magnitude && r.avg_dssim) {
      mags.push_back(*r.avg_magnitude);
      dssims.push_back(*r.avg_dssim);
    }
  if (mags.size() >= 2) {
    try {
      result.magnitude_dssim_pearson = pearson(mags, dssims);
    } catch (const Error&) {
      // zero variance: no correlation to report
    }
  }

  result.summary_csv = out / "summary.csv";
  {
    CsvFile f(result.summary_csv);
    *f << prov << '\n';
    *f << "# d_b=" << format_exact(info->d_b)
       << (info->d_b_selected ? " (max-F1 over the pair list)" : " (configured)")
       << "; avg_queries is actual spend over all traces, including the d_0 check\n";
    *f << summary_csv_header() << '\n';
    for (const auto& r : result.rows) *f << summary_csv_row(r) << '\n';
    *f << "# skipped_pairs=" << info->skipped_pairs << " of "
       << info->eligible_pairs + info->skipped_pairs
       << " (labelled non-matching or not verified as MATCH; not attacked)\n";
  }
  {
    CsvFile f(out / "fig_succ_eps.csv");
    *f << prov << '\n' << "attack,epsilon,success_rate\n";
    for (const auto& r : result.rows)
      *f << r.attack << ',' << format_eps(r.epsilon_255) << ',' << format_number(r.success_rate) << '\n';
  }
  {
    CsvFile f(out / "fig_mag_dssim.csv");
    *f << prov << '\n';
    if (result.magnitude_dssim_pearson)
      *f << "# pearson_r=" << format_number(*result.magnitude_dssim_pearson) << '\n';
    *f << "attack,epsilon,avg_magnitude,avg_dssim\n";
    for (const auto& r : result.rows)
      *f << r.attack << ',' << format_eps(r.epsilon_255) << ',' << format_optional(r.avg_magnitude)
         << ',' << format_optional(r.avg_dssim) << '\n';
  }
  {
    CsvFile f(out / "fig_succ_human.csv");
    *f << prov << '\n' << "attack,epsilon,success_rate,human_accuracy\n";
    for (const auto& r : result.rows)
      if (r.human_accuracy)
        *f << r.attack << ',' << format_eps(r.epsilon_255) << ',' << format_number(r.success_rate)
           << ',' << format_number(*r.human_accuracy) << '\n';
  }
  const bool any_votes = std::any_of(result.rows.begin(), result.rows.end(),
                                     [](const SummaryRow& r) { return r.human_accuracy.has_value(); });
  if (any_votes) {
    CsvFile f(out / "fig_human_eps.csv");
    *f << prov << '\n' << "attack,epsilon,human_accuracy\n";
    for (const auto& r : result.rows)
      if (r.human_accuracy)
        *f << r.attack << ',' << format_eps(r.epsilon_255) << ',' << format_number(*r.human_accuracy) << '\n';
  } else {
    std::filesystem::remove(out / "fig_human_eps.csv");
  }
  return result;
}

std::size_t survey_pack(const SurveyPackRequest& req) {
  if (!is_attack_name(req.attack)) fail(ErrorCode::InvalidArgument, "unknown attack '" + req.attack + "'");
  const auto info = read_run_info(req.sweep_dir);
  if (!info) fail(ErrorCode::FileNotFound, "no run.json under " + req.sweep_dir.string());
  const SweepConfig cfg = config_from_canonical(info->config);

  const auto records = read_pair_records(cfg.pairs_file);
  if (records.empty()) fail(ErrorCode::Precondition, "pair list is empty");
  const Image first = load_image(records.front().source_path);
  auto oracle = make_oracle_factory(cfg, {first.height(), first.width(), first.channels()})();
  const auto pairs = load_pairs_for(cfg, *oracle);

  std::vector<PacketItem> items;
  const auto dir = cell_dir(req.sweep_dir, req.attack, req.epsilon_255);
  if (std::filesystem::exists(dir)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const json h = read_trace_header(f);
      if (h.value("config_hash", "") != info->config_hash || h.value("outcome", "") != "SUCCESS") continue;
      const auto idx = h.at("pair_index").get<std::size_t>();
      if (idx >= pairs.size()) fail(ErrorCode::Decode, f.string() + ": pair_index out of range");
      PacketItem item;
      item.trace_ref = std::filesystem::relative(f, req.sweep_dir).generic_string();
      item.attack = req.attack;
      item.epsilon = req.epsilon_255;
      item.original = pairs[idx].target;
      item.adversarial = load_image(std::filesystem::path(f).replace_extension(".png"));
      if (item.adversarial.channels() != item.original.channels())
        item.adversarial = broadcast_to_rgb(item.adversarial);
      items.push_back(std::move(item));
    }
  }

  // Calibration exemplar: the first verified pair, attacked by NES at eps = 50.
  std::optional<std::size_t> calib_idx;
  for (std::size_t i = 0; i < pairs.size() && !calib_idx; ++i)
    if (pairs[i].label == 1 && verify(*oracle, pairs[i], VerifierConfig{info->d_b}).match) calib_idx = i;
  if (!calib_idx) fail(ErrorCode::Precondition, "no verified pair for the calibration exemplar");
  AttackConfig ac = cfg.attack;
  ac.budget = EpsilonBudget(50.0);
  ac.query_limit = cfg.query_limit;
  ac.d_b = info->d_b;
  ac.seed = cell_seed(cfg.seed, "nes", 50.0, *calib_idx);
  const AttackTrace calib = run_attack("nes", pairs[*calib_idx], *oracle, ac);

  const SurveyManifest m = build_packet(items, {pairs[*calib_idx].target, calib.final_image},
                                        req.images, req.seed, req.out_dir);
  return m.entries.size();
}

}  // namespace facebb
