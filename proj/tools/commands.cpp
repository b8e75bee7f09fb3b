#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "cpmoe/csv.hpp"
#include "cpmoe/dataset.hpp"
#include "cpmoe/evaluation.hpp"
#include "cpmoe/moe.hpp"
#include "cpmoe/random.hpp"
#include "cpmoe/serialization.hpp"

namespace cpmoe::cli {
namespace fs = std::filesystem;

namespace {

// Output files are rendered in memory and only written once the command has
// succeeded, so a failing run leaves nothing behind.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  void commit(std::ostream& log) const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    for (const auto& [name, content] : files_) {
      const auto final_path = dir_ / name;
      const auto tmp_path = dir_ / (name + ".tmp");
      {
        std::ofstream os(tmp_path, std::ios::binary | std::ios::trunc);
        os << content;
        if (!os) {
          fs::remove(tmp_path, ec);
          throw DataError("cannot write '" + final_path.string() + "'");
        }
      }
      fs::rename(tmp_path, final_path, ec);
      if (ec) throw DataError("cannot write '" + final_path.string() + "': " + ec.message());
      log << "wrote " << final_path.string() << "\n";
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParsedCohort load_cohort(const std::string& path, std::ostream& err) {
  std::istringstream in(read_file(path));
  auto parsed = parse_cohort(in);
  for (const auto& w : parsed.warnings) err << "warning: " << path << ": " << w << "\n";
  return parsed;
}

std::vector<PatientOutcome> load_outcomes(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse_outcomes(in);
}

// The resolved options of a subcommand, loadable again through --config.
std::string echo_config(const CLI::App& app) {
  return "[" + app.get_name() + "]\n" + app.config_to_str(true, false);
}

std::string model_file(WindowId w) { return "model_" + std::string(to_string(w)) + ".json"; }

struct ClassifierOptions {
  std::string name = "svm-poly";
  double c = 1.0;
  int degree = 3;
  double gamma = 0.0;
  double l2 = 1e-3;

  void add_to(CLI::App& app) {
    app.add_option("--classifier", name, "naive-bayes | logistic | svm-poly | svm-rbf")
        ->check(CLI::IsMember({"naive-bayes", "logistic", "svm-poly", "svm-rbf"}))
        ->capture_default_str();
    app.add_option("--svm-c", c, "SVM box constraint")->capture_default_str();
    app.add_option("--poly-degree", degree, "polynomial kernel degree")->capture_default_str();
    app.add_option("--gamma", gamma, "kernel inner-product scale, 0 means 1/num_features")->capture_default_str();
    app.add_option("--l2", l2, "logistic L2 penalty")->capture_default_str();
  }

  ClassifierSpec spec() const {
    ClassifierSpec s;
    if (name == "naive-bayes") s = ClassifierSpec::naive_bayes();
    else if (name == "logistic") s = ClassifierSpec::logistic();
    else if (name == "svm-rbf") s = ClassifierSpec::svm_rbf();
    else s = ClassifierSpec::svm_poly();
    s.c = c;
    s.l2 = l2;
    if (s.kind == ClassifierKind::Svm) {
      s.kernel.gamma = gamma;
      if (s.kernel.kind == KernelKind::Poly) s.kernel.degree = degree;
    }
    s.validate();
    return s;
  }
};

struct PipelineOptions {
  std::uint64_t seed = 0;
  int max_gap = 45;
  std::size_t k = 5;
  bool no_rebalance = false;
  std::vector<std::size_t> k_grid{3, 6, 9, 12};
  std::size_t selection_folds = 3;
  ClassifierOptions classifier;

  void add_to(CLI::App& app) {
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--max-gap", max_gap, "snapshot clustering span in days")->capture_default_str();
    app.add_option("--k", k, "cross-conformal folds")->capture_default_str();
    app.add_flag("--no-rebalance", no_rebalance, "skip undersampling and SMOTE");
    app.add_option("--k-grid", k_grid, "feature-selection sizes; empty keeps every feature")
        ->delimiter(',')
        ->expected(0, -1)
        ->capture_default_str();
    app.add_option("--selection-folds", selection_folds, "inner folds of feature selection")->capture_default_str();
    classifier.add_to(app);
  }

  void validate() const {
    if (max_gap <= 0) throw ConfigError("--max-gap must be > 0");
    if (k < 2) throw ConfigError("--k must be >= 2");
    if (!k_grid.empty() && selection_folds < 2) throw ConfigError("--selection-folds must be >= 2");
  }
};

SnapshotTable load_snapshots(const std::string& cohort, const std::string& outcomes, int max_gap, std::ostream& out,
                             std::ostream& err) {
  const auto events = load_cohort(cohort, err).events;
  auto table = build_snapshots(events, load_outcomes(outcomes), max_gap);
  out << "read " << events.size() << " events, built " << table.rows.size() << " snapshots over "
      << table.feature_names.size() << " features\n";
  return table;
}

// --- synth ---------------------------------------------------------------

struct SynthCommand {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t patients = 1000;
  SyntheticConfig config;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("synth", "generate a synthetic cohort and its outcome sidecar");
    app->add_option("--out-dir", out_dir, "output directory")->required();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--patients", patients)->capture_default_str();
    app->add_option("--features", config.n_features, "numeric feature count")->capture_default_str();
    app->add_option("--categorical-site", config.categorical_site)->capture_default_str();
    app->add_option("--noise", config.noise)->capture_default_str();
    app->add_option("--visit-interval", config.visit_interval_days)->capture_default_str();
    app->add_option("--visit-jitter", config.visit_jitter_days)->capture_default_str();
    app->add_option("--test-spread", config.test_spread_days)->capture_default_str();
    app->add_option("--censoring-rate", config.censoring_rate)->capture_default_str();
    app->add_option("--max-followup", config.max_followup_days)->capture_default_str();
    app->add_option("--onset-scale", config.onset_scale_days)->capture_default_str();
    app->add_option("--rate-sd", config.rate_sd)->capture_default_str();
    app->add_option("--missing-rate", config.missing_rate)->capture_default_str();
    app->add_option("--label-noise", config.label_noise)->capture_default_str();
  }

  void run(std::ostream& out) const {
    if (patients == 0) throw ConfigError("--patients must be > 0");
    const auto cohort = generate_synthetic_cohort(seed, patients, config);
    std::ostringstream events, outcomes;
    write_cohort_csv(events, cohort.events);
    write_outcomes_csv(outcomes, cohort.outcomes());
    Outputs files(out_dir);
    files.add("cohort.csv", events.str());
    files.add("outcomes.csv", outcomes.str());
    files.add("config.toml", echo_config(*app));
    files.commit(out);
    out << "generated " << cohort.events.size() << " events for " << cohort.truth.size() << " patients\n";
  }
};

// --- snapshots -----------------------------------------------------------

struct SnapshotsCommand {
  std::string cohort, outcomes, out_dir;
  int max_gap = 45;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("snapshots", "cluster assessment events into snapshots");
    app->add_option("--cohort", cohort, "event CSV")->required();
    app->add_option("--outcomes", outcomes, "outcome sidecar; follow-up defaults to the last event");
    app->add_option("--out-dir", out_dir, "output directory")->required();
    app->add_option("--max-gap", max_gap)->capture_default_str();
  }

  void run(std::ostream& out, std::ostream& err) const {
    if (max_gap <= 0) throw ConfigError("--max-gap must be > 0");
    const auto events = load_cohort(cohort, err).events;
    std::vector<PatientOutcome> records;
    if (!outcomes.empty()) {
      records = load_outcomes(outcomes);
    } else {
      std::map<std::string, int> last;
      for (const auto& e : events) last[e.patient_id] = std::max(last[e.patient_id], e.date);
      for (const auto& [id, day] : last) records.push_back({id, std::nullopt, day});
    }
    const auto table = build_snapshots(events, records, max_gap);
    std::ostringstream os;
    write_snapshots_csv(os, table);
    Outputs files(out_dir);
    files.add("snapshots.csv", os.str());
    files.add("config.toml", echo_config(*app));
    files.commit(out);
    out << "built " << table.rows.size() << " snapshots\n";
  }
};

// --- train ---------------------------------------------------------------

struct TrainCommand {
  std::string cohort, outcomes, out_dir;
  PipelineOptions pipeline;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("train", "fit one cross-conformal expert per time window");
    app->add_option("--cohort", cohort, "event CSV")->required();
    app->add_option("--outcomes", outcomes, "outcome sidecar")->required();
    app->add_option("--out-dir", out_dir, "output directory")->required();
    pipeline.add_to(*app);
  }

  void run(std::ostream& out, std::ostream& err) const {
    pipeline.validate();
    const auto spec = pipeline.classifier.spec();
    auto table = load_snapshots(cohort, outcomes, pipeline.max_gap, out, err);
    for (auto& row : table.rows) row.split = SplitTag::Train;
    std::vector<std::size_t> rows(table.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    std::vector<std::string> warnings;
    const auto imputer = Imputer::fit(table, rows, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";

    Outputs files(out_dir);
    for (const auto& window : kWindows) {
      const auto examples = make_examples(table, imputer, window.id, rows, SplitTag::Train);
      std::size_t evol = 0;
      for (const auto& ex : examples) evol += ex.label == Label::Evol;
      if (evol == 0 || evol == examples.size())
        throw DataError("window " + std::string(to_string(window.id)) + " has no " +
                        (evol == 0 ? "Evol" : "NoEvol") + " examples");
      CcpOptions opts;
      opts.k = pipeline.k;
      opts.seed = derive_seed(pipeline.seed, {index_of(window.id)});
      opts.rebalance = pipeline.no_rebalance ? std::nullopt : std::optional<RebalancePlan>(RebalancePlan{});
      opts.selection = {pipeline.k_grid, pipeline.selection_folds};
      opts.window = window.id;
      ExpertBundle bundle{imputer, ccp_fit(spec, examples, opts)};
      bundle.model.feature_names = imputer.encoded_names();
      out << to_string(window.id) << ": " << evol << " Evol / " << examples.size() - evol << " NoEvol\n";
      files.add(model_file(window.id), serialize(bundle));
    }
    files.add("config.toml", echo_config(*app));
    files.commit(out);
  }
};

// --- predict -------------------------------------------------------------

struct PredictCommand {
  std::string models_dir, snapshots, out_dir;
  double tau = 0.9;
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("predict", "run the mixture of experts on snapshots");
    app->add_option("--models", models_dir, "directory holding model_<window>.json files")->required();
    app->add_option("--snapshots", snapshots, "snapshot CSV")->required();
    app->add_option("--out-dir", out_dir, "output directory")->required();
    app->add_option("--tau", tau, "reliability threshold")->capture_default_str();
  }

  void run(std::ostream& out) const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("--tau must lie in [0, 1]");
    std::vector<CcpModel> experts;
    std::optional<Imputer> imputer;
    std::string imputer_text;
    for (const auto& window : kWindows) {
      const auto path = (fs::path(models_dir) / model_file(window.id)).string();
      auto bundle = deserialize_bundle(read_file(path));
      if (bundle.model.window != window.id) throw DataError("'" + path + "' holds a different window");
      const auto text = to_json(bundle.imputer).dump();
      if (imputer && text != imputer_text) throw DataError("model files were trained on different encoders");
      imputer_text = text;
      imputer = std::move(bundle.imputer);
      experts.push_back(std::move(bundle.model));
    }

    std::istringstream in(read_file(snapshots));
    const auto table = align_schema(parse_snapshots_csv(in), imputer->raw_names());
    std::ostringstream os;
    std::vector<std::string> header{"patient_id", "ref_date", "outcome", "credibility"};
    for (const auto& window : kWindows) {
      std::string w(to_string(window.id));
      for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      for (const char* field : {"_label", "_credibility", "_confidence"}) header.push_back(w + field);
    }
    csv::write_row(os, header);
    std::size_t abstained = 0;
    for (const auto& row : table.rows) {
      const auto p = predict_patient(experts, imputer->transform(row), tau);
      abstained += p.decision.outcome == Outcome::NoPrediction;
      std::vector<std::string> fields{row.patient_id, std::to_string(row.ref_date),
                                      std::string(to_string(p.decision.outcome)),
                                      p.decision.credibility ? csv::fixed(*p.decision.credibility, 6) : ""};
      for (const auto& e : p.experts) {
        fields.emplace_back(to_string(e.label));
        fields.push_back(csv::fixed(e.credibility, 6));
        fields.push_back(csv::fixed(e.confidence, 6));
      }
      csv::write_row(os, fields);
    }
    Outputs files(out_dir);
    files.add("predictions.csv", os.str());
    files.add("config.toml", echo_config(*app));
    files.commit(out);
    out << "predicted " << table.rows.size() << " snapshots, " << abstained << " without a prediction\n";
  }
};

// --- evaluate ------------------------------------------------------------

struct EvaluateCommand {
  std::string cohort, outcomes, out_dir;
  PipelineOptions pipeline;
  std::size_t outer_folds = 5;
  std::vector<double> taus{0.80, 0.90, 0.95};
  std::vector<double> epsilons{0.05, 0.10, 0.20};
  CLI::App* app = nullptr;

  void attach(CLI::App& root) {
    app = root.add_subcommand("evaluate", "nested cross-validation of experts and mixture");
    app->add_option("--cohort", cohort, "event CSV")->required();
    app->add_option("--outcomes", outcomes, "outcome sidecar")->required();
    app->add_option("--out-dir", out_dir, "output directory")->required();
    app->add_option("--outer-folds", outer_folds)->capture_default_str();
    app->add_option("--taus", taus)->delimiter(',')->capture_default_str();
    app->add_option("--epsilons", epsilons)->delimiter(',')->capture_default_str();
    pipeline.add_to(*app);
  }

  void run(std::ostream& out, std::ostream& err) const {
    pipeline.validate();
    EvalConfig config;
    config.outer_folds = outer_folds;
    config.inner_folds = pipeline.k;
    config.taus = taus;
    config.epsilons = epsilons;
    config.seed = pipeline.seed;
    config.classifier = pipeline.classifier.spec();
    config.rebalance = pipeline.no_rebalance ? std::nullopt : std::optional<RebalancePlan>(RebalancePlan{});
    config.selection = {pipeline.k_grid, pipeline.selection_folds};
    config.validate();

    const auto table = load_snapshots(cohort, outcomes, pipeline.max_gap, out, err);
    const auto result = evaluate(table, config);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";

    std::ostringstream windows, standard, moe, validity;
    write_window_report_csv(windows, result.windows);
    write_window_report_csv(standard, result.standard);
    write_moe_report_csv(moe, result.moe);
    write_validity_csv(validity, result.validity);
    Outputs files(out_dir);
    files.add("window_report.csv", windows.str());
    files.add("standard_report.csv", standard.str());
    files.add("moe_report.csv", moe.str());
    files.add("validity_report.csv", validity.str());
    files.add("summary.json", summary_json(result, config));
    files.add("config.toml", echo_config(*app));
    files.commit(out);
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App root("Cross-conformal mixture of experts for time-windowed prognosis", "cpmoe");
  root.require_subcommand(1);
  root.set_config("--config", "", "TOML file; keys go under a [<command>] section");
  root.allow_config_extras(CLI::config_extras_mode::error);
  SynthCommand synth;
  SnapshotsCommand snaps;
  TrainCommand train_cmd;
  PredictCommand predict;
  EvaluateCommand evaluate_cmd;
  synth.attach(root);
  snaps.attach(root);
  train_cmd.attach(root);
  predict.attach(root);
  evaluate_cmd.attach(root);

  // Config files are read by the root app, so `--config FILE` may appear anywhere.
  std::vector<const char*> argv;
  if (!args.empty()) argv.push_back(args[0].c_str());
  for (std::size_t i = 1; i + 1 < args.size(); ++i)
    if (args[i] == "--config") {
      argv.push_back(args[i].c_str());
      argv.push_back(args[i + 1].c_str());
    }
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      ++i;
      continue;
    }
    argv.push_back(args[i].c_str());
  }
  try {
    root.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    // Help requests come through here too and exit cleanly.
    return root.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth.app) synth.run(out);
    else if (*snaps.app) snaps.run(out, err);
    else if (*train_cmd.app) train_cmd.run(out, err);
    else if (*predict.app) predict.run(out);
    else if (*evaluate_cmd.app) evaluate_cmd.run(out, err);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace cpmoe::cli
