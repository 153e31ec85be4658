#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oodkit/common.hpp"
#include "oodkit/data.hpp"
#include "oodkit/detect.hpp"
#include "oodkit/io_util.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/model_io.hpp"
#include "oodkit/train.hpp"

namespace oodkit {

// Experiment orchestration. A single JSON config fully determines every
// emitted byte: dataset builds, training, scoring, aggregation and report
// files are all seeded functions of (config, seeds).

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

struct SourceConfig {
  enum class Type { synthetic, csv, idx };
  Type type = Type::synthetic;
  SyntheticSpec synthetic;
  std::string path;          // csv
  std::string label_column;  // csv, empty = unlabeled
  std::string images, labels;  // idx
  std::vector<std::size_t> select;  // optional class filter
  std::string name;
};

// ID data either as an explicit train/test pair or as one source split by
// a seeded fraction.
struct InDistConfig {
  std::optional<SourceConfig> train, test;
  std::optional<SourceConfig> source;
  double test_fraction = 0.25;
};

// One detector request. `model` picks the backing network for the baseline
// families: "plain" (default) or "oe" (outlier-exposure regularized).
// Optional parameters fall back to the paper's settings; an absent
// temp_softmax temperature is fitted per seed on a held-out ID slice.
struct DetectorConfig {
  DetectorKind kind = DetectorKind::max_softmax;
  std::string model = "plain";
  std::optional<double> temperature;
  std::optional<double> epsilon;
  std::optional<std::size_t> n_passes;
  std::optional<double> dropout_p;
  std::optional<std::size_t> n_members;

  std::string tag() const {
    std::string t = detector_kind_name(kind);
    if (model == "oe") t += "_oe";
    return t;
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  InDistConfig in_distribution;
  SourceConfig outlier_exposure;
  std::string outlier_exposure_name = "outlier_exposure";
  std::vector<std::pair<std::string, SourceConfig>> ood_test_sets;
  std::vector<DetectorConfig> detectors;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::optional<double> delta;
  std::string output_dir = "runs/out";
  bool standardize = true;
  std::size_t hist_bins = 40;
  nlohmann::json echo;  // the parsed config, re-serialized into reports

  void validate() const {
    if (ood_test_sets.empty()) throw ConfigError("config: need at least one OoD test set");
    if (detectors.empty()) throw ConfigError("config: need at least one detector");
    if (seeds.empty()) throw ConfigError("config: seeds must be non-empty");
    std::set<std::string> names;
    for (const auto& [set_name, src] : ood_test_sets) {
      if (set_name.empty()) throw ConfigError("config: OoD test set with empty name");
      for (char c : set_name)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
          throw ConfigError("config: OoD test set name '" + set_name +
                            "' may only contain [A-Za-z0-9_.-] (it names output files)");
      if (set_name == outlier_exposure_name)
        throw ConfigError("config: OoD test set '" + set_name +
                          "' collides with the outlier-exposure name");
      if (!names.insert(set_name).second)
        throw ConfigError("config: duplicate OoD test set name '" + set_name + "'");
    }
    std::set<std::string> tags;
    for (const DetectorConfig& d : detectors)
      if (!tags.insert(d.tag()).second)
        throw ConfigError("config: duplicate detector '" + d.tag() + "'");
    const bool has_pair = in_distribution.train && in_distribution.test;
    const bool has_split = in_distribution.source.has_value();
    if (has_pair == has_split)
      throw ConfigError("config: in_distribution needs either train+test or source+test_fraction");
    if (has_split &&
        !(in_distribution.test_fraction > 0.0 && in_distribution.test_fraction < 1.0))
      throw ConfigError("config: test_fraction must be in (0,1)");
    if (hist_bins < 1) throw ConfigError("config: hist_bins must be >= 1");
    if (delta && !std::isfinite(*delta)) throw ConfigError("config: delta must be finite");
    train.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON parsing (strict: unknown keys are rejected)
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError(ctx + ": unknown key '" + key + "'");
}

template <typename T>
T get_req(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ConfigError(ctx + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_opt(const json& j, const std::string& key, const T& fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + "." + key + ": " + e.what());
  }
}

inline SourceConfig parse_source(const json& j, const std::string& ctx) {
  SourceConfig s;
  const std::string type = get_req<std::string>(j, "type", ctx);
  if (type == "synthetic") {
    s.type = SourceConfig::Type::synthetic;
    check_keys(j, {"type", "kind", "means", "scales", "lo", "hi", "r_inner", "r_outer",
                   "center", "n", "seed", "name"}, ctx);
    const std::string kind = get_req<std::string>(j, "kind", ctx);
    if (kind == "gaussian_clusters") {
      s.synthetic.kind = SyntheticKind::gaussian_clusters;
      s.synthetic.means = get_req<std::vector<std::vector<double>>>(j, "means", ctx);
      s.synthetic.scales = get_req<std::vector<double>>(j, "scales", ctx);
    } else if (kind == "uniform_box") {
      s.synthetic.kind = SyntheticKind::uniform_box;
      s.synthetic.box_lo = get_req<std::vector<double>>(j, "lo", ctx);
      s.synthetic.box_hi = get_req<std::vector<double>>(j, "hi", ctx);
    } else if (kind == "ring") {
      s.synthetic.kind = SyntheticKind::ring;
      s.synthetic.r_inner = get_req<double>(j, "r_inner", ctx);
      s.synthetic.r_outer = get_req<double>(j, "r_outer", ctx);
      s.synthetic.center = get_opt<std::vector<double>>(j, "center", {}, ctx);
    } else {
      throw ConfigError(ctx + ".kind: unknown synthetic kind '" + kind + "'");
    }
    s.synthetic.n = get_req<std::size_t>(j, "n", ctx);
    s.synthetic.seed = get_req<std::uint64_t>(j, "seed", ctx);
    s.synthetic.name = get_opt<std::string>(j, "name", kind, ctx);
    s.name = s.synthetic.name;
    s.synthetic.validate();
  } else if (type == "csv") {
    s.type = SourceConfig::Type::csv;
    check_keys(j, {"type", "path", "label_column", "select_classes", "name"}, ctx);
    s.path = get_req<std::string>(j, "path", ctx);
    s.label_column = get_opt<std::string>(j, "label_column", "", ctx);
    s.select = get_opt<std::vector<std::size_t>>(j, "select_classes", {}, ctx);
    s.name = get_opt<std::string>(j, "name", s.path, ctx);
  } else if (type == "idx") {
    s.type = SourceConfig::Type::idx;
    check_keys(j, {"type", "images", "labels", "select_classes", "name"}, ctx);
    s.images = get_req<std::string>(j, "images", ctx);
    s.labels = get_req<std::string>(j, "labels", ctx);
    s.select = get_opt<std::vector<std::size_t>>(j, "select_classes", {}, ctx);
    s.name = get_opt<std::string>(j, "name", s.images, ctx);
  } else {
    throw ConfigError(ctx + ".type: unknown source type '" + type + "'");
  }
  return s;
}

inline DetectorConfig parse_detector(const json& j, const std::string& ctx) {
  check_keys(j, {"kind", "model", "temperature", "epsilon", "n_passes", "dropout_p", "n_members"},
             ctx);
  DetectorConfig d;
  d.kind = parse_detector_kind(get_req<std::string>(j, "kind", ctx));
  d.model = get_opt<std::string>(j, "model", "plain", ctx);
  if (d.model != "plain" && d.model != "oe")
    throw ConfigError(ctx + ".model: expected 'plain' or 'oe', got '" + d.model + "'");
  if (d.model == "oe" &&
      (d.kind == DetectorKind::abstention || d.kind == DetectorKind::ensemble))
    throw ConfigError(ctx + ": detector '" + std::string(detector_kind_name(d.kind)) +
                      "' does not take a model override");
  if (j.contains("temperature")) d.temperature = get_req<double>(j, "temperature", ctx);
  if (j.contains("epsilon")) d.epsilon = get_req<double>(j, "epsilon", ctx);
  if (j.contains("n_passes")) d.n_passes = get_req<std::size_t>(j, "n_passes", ctx);
  if (j.contains("dropout_p")) d.dropout_p = get_req<double>(j, "dropout_p", ctx);
  if (j.contains("n_members")) d.n_members = get_req<std::size_t>(j, "n_members", ctx);
  if (d.kind == DetectorKind::odin && !d.epsilon)
    throw ConfigError(ctx + ": odin requires epsilon");
  return d;
}

inline TrainConfig parse_train(const json& j, const std::string& ctx) {
  check_keys(j, {"hidden_dims", "learning_rate", "momentum", "batch_size", "epochs",
                 "weight_decay", "dropout_p", "oe_lambda"}, ctx);
  TrainConfig t;
  t.hidden_dims = get_opt<std::vector<std::size_t>>(j, "hidden_dims", t.hidden_dims, ctx);
  t.learning_rate = get_opt<double>(j, "learning_rate", t.learning_rate, ctx);
  t.momentum = get_opt<double>(j, "momentum", t.momentum, ctx);
  t.batch_size = get_opt<std::size_t>(j, "batch_size", t.batch_size, ctx);
  t.epochs = get_opt<std::size_t>(j, "epochs", t.epochs, ctx);
  t.weight_decay = get_opt<double>(j, "weight_decay", t.weight_decay, ctx);
  if (j.contains("dropout_p")) t.dropout_p = get_req<double>(j, "dropout_p", ctx);
  t.oe_lambda = get_opt<double>(j, "oe_lambda", t.oe_lambda, ctx);
  return t;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail::get_opt;
  using detail::get_req;
  detail::check_keys(j, {"name", "in_distribution", "outlier_exposure", "ood_test_sets",
                         "detectors", "train", "seeds", "delta", "output_dir", "standardize",
                         "hist_bins"},
                     "config");
  ExperimentConfig cfg;
  cfg.echo = j;
  cfg.name = get_opt<std::string>(j, "name", cfg.name, "config");

  if (!j.contains("in_distribution")) throw ConfigError("config: missing in_distribution");
  const nlohmann::json& jid = j.at("in_distribution");
  detail::check_keys(jid, {"train", "test", "source", "test_fraction"}, "in_distribution");
  if (jid.contains("train"))
    cfg.in_distribution.train = detail::parse_source(jid.at("train"), "in_distribution.train");
  if (jid.contains("test"))
    cfg.in_distribution.test = detail::parse_source(jid.at("test"), "in_distribution.test");
  if (jid.contains("source"))
    cfg.in_distribution.source = detail::parse_source(jid.at("source"), "in_distribution.source");
  cfg.in_distribution.test_fraction =
      get_opt<double>(jid, "test_fraction", cfg.in_distribution.test_fraction, "in_distribution");

  if (!j.contains("outlier_exposure")) throw ConfigError("config: missing outlier_exposure");
  cfg.outlier_exposure = detail::parse_source(j.at("outlier_exposure"), "outlier_exposure");
  if (!cfg.outlier_exposure.name.empty()) cfg.outlier_exposure_name = cfg.outlier_exposure.name;

  if (!j.contains("ood_test_sets")) throw ConfigError("config: missing ood_test_sets");
  for (std::size_t i = 0; i < j.at("ood_test_sets").size(); ++i) {
    const nlohmann::json& js = j.at("ood_test_sets").at(i);
    const std::string ctx = "ood_test_sets[" + std::to_string(i) + "]";
    SourceConfig src = detail::parse_source(js, ctx);
    if (src.name.empty()) throw ConfigError(ctx + ": needs a name");
    cfg.ood_test_sets.emplace_back(src.name, std::move(src));
  }

  if (!j.contains("detectors")) throw ConfigError("config: missing detectors");
  for (std::size_t i = 0; i < j.at("detectors").size(); ++i)
    cfg.detectors.push_back(
        detail::parse_detector(j.at("detectors").at(i), "detectors[" + std::to_string(i) + "]"));

  if (j.contains("train")) cfg.train = detail::parse_train(j.at("train"), "train");
  cfg.seeds = get_opt<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds, "config");
  if (j.contains("delta")) cfg.delta = get_req<double>(j, "delta", "config");
  if (j.contains("output_dir")) {
    cfg.output_dir = get_req<std::string>(j, "output_dir", "config");
  } else if (const char* env = std::getenv("OODKIT_OUTPUT_DIR")) {
    cfg.output_dir = env;
  }
  cfg.standardize = get_opt<bool>(j, "standardize", cfg.standardize, "config");
  cfg.hist_bins = get_opt<std::size_t>(j, "hist_bins", cfg.hist_bins, "config");
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string ood_set;
  std::string detector;
  double auroc_mean = 0.0, auroc_std = 0.0;
  double fpr95_mean = 0.0, fpr95_std = 0.0;
  std::size_t n_seeds = 0;
  std::vector<double> auroc_per_seed, fpr95_per_seed;
};

struct EvalReport {
  std::string version;
  std::string name;
  std::string arch;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::vector<double>> id_accuracy;  // model tag -> per seed
  std::vector<ReportRow> rows;  // ood_set-major, config order; one row per pair
  std::optional<double> delta;
  nlohmann::json config_echo;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1); 0 for a single value, as labeled in the
// report header.
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline std::string emit_table(const EvalReport& report, const std::string& format) {
  std::ostringstream out;
  if (format == "csv") {
    out << "ood_set,detector,auroc_mean,auroc_std,fpr95_mean,fpr95_std,n_seeds\n";
    for (const ReportRow& r : report.rows)
      out << r.ood_set << ',' << r.detector << ',' << format_double(r.auroc_mean) << ','
          << format_double(r.auroc_std) << ',' << format_double(r.fpr95_mean) << ','
          << format_double(r.fpr95_std) << ',' << r.n_seeds << '\n';
  } else if (format == "markdown" || format == "md") {
    out << "# " << report.name << "\n\n";
    out << "oodkit " << report.version << ", arch " << report.arch << ", "
        << report.seeds.size() << " seeds, std = sample std (n-1) over seeds.\n";
    out << "AUROC higher is better; FPR@95TPR lower is better; OoD is the positive class.\n\n";
    out << "| ood_set | detector | auroc_mean | auroc_std | fpr95_mean | fpr95_std | n_seeds |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const ReportRow& r : report.rows)
      out << "| " << r.ood_set << " | " << r.detector << " | " << format_double(r.auroc_mean)
          << " | " << format_double(r.auroc_std) << " | " << format_double(r.fpr95_mean)
          << " | " << format_double(r.fpr95_std) << " | " << r.n_seeds << " |\n";
  } else {
    throw ConfigError("emit_table: unknown format '" + format + "' (want csv or markdown)");
  }
  return out.str();
}

inline void dump_scores(const std::filesystem::path& path,
                        const std::vector<std::size_t>& sample_ids,
                        const std::vector<double>& scores, const std::vector<int>& is_ood) {
  if (sample_ids.size() != scores.size() || scores.size() != is_ood.size())
    throw ShapeError("dump_scores: sample_ids, scores and is_ood must have equal lengths");
  std::ostringstream out;
  out << "sample_id,score,is_ood\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (is_ood[i] != 0 && is_ood[i] != 1) throw DomainError("dump_scores: is_ood must be 0 or 1");
    out << sample_ids[i] << ',' << format_double(scores[i]) << ',' << is_ood[i] << '\n';
  }
  write_file_atomic(path, out.str());
}

inline void dump_histogram(const std::filesystem::path& path, const Histogram& h) {
  std::ostringstream out;
  out << "bin_left,bin_right,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ','
        << h.counts[i] << '\n';
  write_file_atomic(path, out.str());
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["version"] = report.version;
  j["name"] = report.name;
  j["arch"] = report.arch;
  j["seeds"] = report.seeds;
  j["std_definition"] = "sample std (n-1) over seeds";
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [tag, v] : report.id_accuracy) acc[tag] = v;
  j["id_test_accuracy"] = acc;
  if (report.delta) j["delta"] = *report.delta;
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& r : report.rows) {
    nlohmann::json jr;
    jr["ood_set"] = r.ood_set;
    jr["detector"] = r.detector;
    jr["auroc_mean"] = r.auroc_mean;
    jr["auroc_std"] = r.auroc_std;
    jr["fpr95_mean"] = r.fpr95_mean;
    jr["fpr95_std"] = r.fpr95_std;
    jr["n_seeds"] = r.n_seeds;
    jr["auroc_per_seed"] = r.auroc_per_seed;
    jr["fpr95_per_seed"] = r.fpr95_per_seed;
    rows.push_back(jr);
  }
  j["rows"] = rows;
  j["config"] = report.config_echo;
  return j;
}

inline EvalReport load_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open report " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  EvalReport r;
  try {
    r.version = j.at("version").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.arch = j.at("arch").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& [tag, v] : j.at("id_test_accuracy").items())
      r.id_accuracy[tag] = v.get<std::vector<double>>();
    if (j.contains("delta")) r.delta = j.at("delta").get<double>();
    for (const nlohmann::json& jr : j.at("rows")) {
      ReportRow row;
      row.ood_set = jr.at("ood_set").get<std::string>();
      row.detector = jr.at("detector").get<std::string>();
      row.auroc_mean = jr.at("auroc_mean").get<double>();
      row.auroc_std = jr.at("auroc_std").get<double>();
      row.fpr95_mean = jr.at("fpr95_mean").get<double>();
      row.fpr95_std = jr.at("fpr95_std").get<double>();
      row.n_seeds = jr.at("n_seeds").get<std::size_t>();
      row.auroc_per_seed = jr.at("auroc_per_seed").get<std::vector<double>>();
      row.fpr95_per_seed = jr.at("fpr95_per_seed").get<std::vector<double>>();
      r.rows.push_back(std::move(row));
    }
    if (j.contains("config")) r.config_echo = j.at("config");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

namespace detail {

constexpr std::uint64_t kSplitTag = 0x73706c74;    // ID train/test split
constexpr std::uint64_t kCalibTag = 0x63616c62;    // temperature-fitting slice
constexpr std::uint64_t kBalanceTag = 0x62616c61;  // OoD balancing subsample
constexpr std::uint64_t kMcTag = 0x6d636470;       // MC-dropout pass seeds

inline Dataset build_source(const SourceConfig& src, std::uint64_t run_seed) {
  Dataset d;
  switch (src.type) {
    case SourceConfig::Type::synthetic: {
      SyntheticSpec spec = src.synthetic;
      spec.seed = derive_seed(spec.seed, run_seed);
      d = gen_synthetic(spec);
      break;
    }
    case SourceConfig::Type::csv:
      d = load_csv(src.path, src.label_column.empty()
                                 ? std::nullopt
                                 : std::optional<std::string>(src.label_column));
      break;
    case SourceConfig::Type::idx:
      d = load_idx(src.images, src.labels);
      break;
  }
  if (!src.select.empty()) d = select_classes(d, src.select);
  if (!src.name.empty()) d.name = src.name;
  return d;
}

// Everything a detector needs at scoring time, resolved per seed.
struct ResolvedDetector {
  DetectorConfig cfg;
  DetectorSpec spec;
  const MlpModel* model = nullptr;                 // single-model detectors
  const std::vector<MlpModel>* members = nullptr;  // ensemble
  const MahalanobisStats* maha = nullptr;
  std::uint64_t mc_seed = 0;
  std::optional<std::array<double, 2>> clip;
};

inline std::vector<double> run_detector(const ResolvedDetector& rd, const Matrix& x) {
  switch (rd.spec.kind) {
    case DetectorKind::abstention:
      return score_abstention(*rd.model, x).scores;
    case DetectorKind::max_softmax:
      return score_max_softmax(*rd.model, x).scores;
    case DetectorKind::entropy:
      return score_entropy(*rd.model, x).scores;
    case DetectorKind::temp_softmax:
      return score_temp_softmax(*rd.model, x, *rd.spec.temperature).scores;
    case DetectorKind::odin:
      return score_odin(*rd.model, x, *rd.spec.temperature, *rd.spec.epsilon, rd.clip).scores;
    case DetectorKind::mahalanobis:
      return score_mahalanobis(*rd.model, *rd.maha, x).scores;
    case DetectorKind::mc_dropout:
      return score_mc_dropout(*rd.model, x, *rd.spec.dropout_p, *rd.spec.n_passes, rd.mc_seed)
          .scores;
    case DetectorKind::ensemble:
      return score_ensemble(*rd.members, x).scores;
  }
  throw DomainError("unknown detector kind");
}

inline std::string arch_string(const MlpModel& dac) {
  std::string s = "mlp ";
  for (std::size_t i = 0; i < dac.params.layer_dims.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(dac.params.layer_dims[i]);
  }
  s += " (output " + std::to_string(dac.num_known_classes) + "+1 with abstention)";
  return s;
}

}  // namespace detail

inline EvalReport run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  const fs::path out_dir(cfg.output_dir);

  EvalReport report;
  report.version = kVersion;
  report.name = cfg.name;
  report.seeds = cfg.seeds;
  report.delta = cfg.delta;
  report.config_echo = cfg.echo.is_null() ? nlohmann::json::object() : cfg.echo;

  // Which models this detector set needs, besides the always-trained DAC.
  bool need_plain = false, need_oe = false, need_ensemble = false;
  std::size_t ensemble_members = 5;
  for (const DetectorConfig& d : cfg.detectors) {
    if (d.kind == DetectorKind::ensemble) {
      need_ensemble = true;
      ensemble_members = d.n_members.value_or(5);
      continue;
    }
    if (d.kind == DetectorKind::abstention) continue;
    (d.model == "oe" ? need_oe : need_plain) = true;
  }

  // per (set, detector): one eval per seed
  std::map<std::pair<std::string, std::string>, std::vector<DetectionEval>> evals;

  for (std::size_t seed_idx = 0; seed_idx < cfg.seeds.size(); ++seed_idx) {
    const std::uint64_t seed = cfg.seeds[seed_idx];
    try {
      // Datasets
      Dataset id_train, id_test;
      if (cfg.in_distribution.source) {
        const Dataset whole = detail::build_source(*cfg.in_distribution.source, seed);
        const double f = cfg.in_distribution.test_fraction;
        std::vector<Dataset> parts =
            split(whole, {1.0 - f, f}, derive_seed(seed, detail::kSplitTag));
        id_train = std::move(parts[0]);
        id_test = std::move(parts[1]);
      } else {
        id_train = detail::build_source(*cfg.in_distribution.train, seed);
        id_test = detail::build_source(*cfg.in_distribution.test, seed);
      }
      Dataset oe_data = detail::build_source(cfg.outlier_exposure, seed);
      std::vector<Dataset> ood_sets;
      for (const auto& [set_name, src] : cfg.ood_test_sets) {
        ood_sets.push_back(detail::build_source(src, seed));
        ood_sets.back().name = set_name;
      }

      if (cfg.standardize) {
        const Standardizer st = fit_standardizer(id_train);
        id_train = apply_standardizer(st, id_train);
        id_test = apply_standardizer(st, id_test);
        oe_data = apply_standardizer(st, oe_data);
        for (Dataset& d : ood_sets) d = apply_standardizer(st, d);
      }

      // Hold out a calibration slice before any training so temperature
      // fitting never sees training data. Carved unconditionally to keep the
      // training set independent of which detectors are configured.
      std::vector<Dataset> carved =
          split(id_train, {0.9, 0.1}, derive_seed(seed, detail::kCalibTag));
      const Dataset& fit_set = carved[0];
      const Dataset& calib_set = carved[1];

      // Models
      TrainConfig tcfg = cfg.train;
      tcfg.seed = seed;
      std::map<std::string, MlpModel> models;
      models["dac"] = train_dac(fit_set, oe_data, tcfg);
      if (need_plain) models["plain"] = train_plain(fit_set, tcfg);
      if (need_oe) models["oe"] = train_oe(fit_set, oe_data, tcfg);
      std::vector<MlpModel> ensemble;
      if (need_ensemble)
        ensemble = train_ensemble(
            [&](const TrainConfig& c) { return train_plain(fit_set, c); }, tcfg,
            ensemble_members);

      // Dedicated dropout-trained variants for MC dropout, unless the base
      // training already used dropout.
      std::map<std::string, MahalanobisStats> maha;
      for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
        const DetectorConfig& d = cfg.detectors[di];
        if (d.kind == DetectorKind::mc_dropout && !cfg.train.dropout_p) {
          const std::string tag = d.model + "_dropout";
          if (!models.count(tag)) {
            TrainConfig dcfg = tcfg;
            dcfg.dropout_p = d.dropout_p.value_or(0.5);
            models[tag] = d.model == "oe" ? train_oe(fit_set, oe_data, dcfg)
                                          : train_plain(fit_set, dcfg);
          }
        }
        if (d.kind == DetectorKind::mahalanobis && !maha.count(d.model))
          maha[d.model] = fit_mahalanobis(models.at(d.model), fit_set);
      }

      // Resolve detectors for this seed
      std::vector<detail::ResolvedDetector> resolved;
      for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
        const DetectorConfig& d = cfg.detectors[di];
        detail::ResolvedDetector rd;
        rd.cfg = d;
        rd.spec.kind = d.kind;
        switch (d.kind) {
          case DetectorKind::abstention:
            rd.model = &models.at("dac");
            break;
          case DetectorKind::max_softmax:
          case DetectorKind::entropy:
            rd.model = &models.at(d.model);
            break;
          case DetectorKind::temp_softmax: {
            rd.model = &models.at(d.model);
            if (d.temperature) {
              rd.spec.temperature = *d.temperature;
            } else {
              rd.spec.temperature = fit_temperature(*rd.model, calib_set).temperature;
            }
            break;
          }
          case DetectorKind::odin:
            rd.model = &models.at(d.model);
            rd.spec.temperature = d.temperature.value_or(1000.0);
            rd.spec.epsilon = *d.epsilon;
            rd.clip = id_test.value_bounds;
            break;
          case DetectorKind::mahalanobis:
            rd.model = &models.at(d.model);
            rd.maha = &maha.at(d.model);
            break;
          case DetectorKind::mc_dropout: {
            const std::string tag = cfg.train.dropout_p ? d.model : d.model + "_dropout";
            rd.model = &models.at(tag);
            rd.spec.dropout_p = d.dropout_p.value_or(
                cfg.train.dropout_p ? *cfg.train.dropout_p : 0.5);
            rd.spec.n_passes = d.n_passes.value_or(100);
            rd.mc_seed = derive_seed(seed, detail::kMcTag, di);
            break;
          }
          case DetectorKind::ensemble:
            rd.members = &ensemble;
            rd.spec.n_members = ensemble_members;
            break;
        }
        rd.spec.validate();
        resolved.push_back(std::move(rd));
      }

      // Score ID negatives once per detector, reuse across OoD sets.
      std::vector<std::vector<double>> neg_scores;
      for (const detail::ResolvedDetector& rd : resolved)
        neg_scores.push_back(detail::run_detector(rd, id_test.X));

      for (std::size_t si = 0; si < ood_sets.size(); ++si) {
        const Dataset balanced = subsample(ood_sets[si], id_test.size(),
                                           derive_seed(seed, detail::kBalanceTag, si));
        for (std::size_t di = 0; di < resolved.size(); ++di) {
          const std::vector<double> pos = detail::run_detector(resolved[di], balanced.X);
          const std::string tag = resolved[di].cfg.tag();
          evals[{ood_sets[si].name, tag}].push_back(evaluate_detection(pos, neg_scores[di], tag));

          // Score dump: ID negatives first, then OoD positives.
          std::vector<std::size_t> ids(pos.size() + neg_scores[di].size());
          std::vector<double> all_scores;
          std::vector<int> flags;
          all_scores.reserve(ids.size());
          flags.reserve(ids.size());
          for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
          all_scores.insert(all_scores.end(), neg_scores[di].begin(), neg_scores[di].end());
          flags.insert(flags.end(), neg_scores[di].size(), 0);
          all_scores.insert(all_scores.end(), pos.begin(), pos.end());
          flags.insert(flags.end(), pos.size(), 1);
          const std::string stem =
              std::to_string(seed) + "_" + ood_sets[si].name + "_" + tag;
          dump_scores(out_dir / ("scores_" + stem + ".csv"), ids, all_scores, flags);

          // Histograms on shared binning across the two populations.
          const double lo = std::min(*std::min_element(pos.begin(), pos.end()),
                                     *std::min_element(neg_scores[di].begin(), neg_scores[di].end()));
          const double hi = std::max(*std::max_element(pos.begin(), pos.end()),
                                     *std::max_element(neg_scores[di].begin(), neg_scores[di].end()));
          const std::pair<double, double> range{lo, hi};
          dump_histogram(out_dir / ("hist_" + stem + "_id.csv"),
                         histogram(neg_scores[di], cfg.hist_bins, range));
          dump_histogram(out_dir / ("hist_" + stem + "_ood.csv"),
                         histogram(pos, cfg.hist_bins, range));
        }
      }

      for (const auto& [tag, model] : models)
        report.id_accuracy[tag].push_back(id_accuracy(model, id_test));
      if (seed_idx == 0) report.arch = detail::arch_string(models.at("dac"));
      save_model(out_dir / ("model_" + std::to_string(seed) + ".bin"), models.at("dac"));
    } catch (const Error& e) {
      throw Error("seed " + std::to_string(seed) + ": " + e.what());
    }
  }

  for (const auto& [set_name, src] : cfg.ood_test_sets) {
    for (const DetectorConfig& d : cfg.detectors) {
      const std::vector<DetectionEval>& es = evals.at({set_name, d.tag()});
      ReportRow row;
      row.ood_set = set_name;
      row.detector = d.tag();
      row.n_seeds = es.size();
      for (const DetectionEval& e : es) {
        row.auroc_per_seed.push_back(e.auroc);
        row.fpr95_per_seed.push_back(e.fpr_at_95tpr);
      }
      row.auroc_mean = detail::mean_of(row.auroc_per_seed);
      row.auroc_std = detail::sample_std(row.auroc_per_seed);
      row.fpr95_mean = detail::mean_of(row.fpr95_per_seed);
      row.fpr95_std = detail::sample_std(row.fpr95_per_seed);
      report.rows.push_back(std::move(row));
    }
  }

  write_file_atomic(out_dir / "report.csv", emit_table(report, "csv"));
  write_file_atomic(out_dir / "report.md", emit_table(report, "markdown"));
  write_file_atomic(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace oodkit
