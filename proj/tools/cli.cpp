#include "emowatch/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "emowatch/errors.hpp"
#include "emowatch/evaluation.hpp"
#include "emowatch/features.hpp"
#include "emowatch/ingestion.hpp"
#include "emowatch/labeling.hpp"
#include "emowatch/models.hpp"
#include "emowatch/service.hpp"
#include "emowatch/synthesis.hpp"

namespace emowatch::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::uint64_t seed = 0;
  bool quiet = false;

  template <typename... Args>
  void log(fmt::format_string<Args...> f, Args&&... args) const {
    if (!quiet) err << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Empty path means stdout. Files are written to a temporary and renamed.
void emit(const Context& ctx, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    ctx.out << text;
    return;
  }
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f << text;
    if (!f.flush()) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, target);
}

DatasetFlavor flavor_from(const std::string& s) {
  auto f = parse_flavor(s);
  if (!f) throw SpecError("unknown flavor \"" + s + "\" (statistical or nonstatistical)");
  return *f;
}

ModelKind kind_from(const std::string& s) {
  auto k = parse_model_kind(s);
  if (!k) throw SpecError("unknown model \"" + s + "\"");
  return *k;
}

std::vector<ModelKind> kinds_from(const std::vector<std::string>& names, DatasetFlavor flavor) {
  if (names.empty()) return default_models(flavor);
  std::vector<ModelKind> out;
  for (const auto& n : names) out.push_back(kind_from(n));
  return out;
}

std::vector<SessionRecording> load_sessions(const fs::path& p) {
  if (fs::is_directory(p)) return load_corpus(p);
  if (p.extension() == ".csv") return parse_session_csv(p);
  return {parse_session(p)};
}

struct DataSource {
  std::string corpus;
  std::string features;
  std::string flavor = "statistical";
  unsigned jobs = 1;

  void add(CLI::App* sub) {
    auto* c = sub->add_option("--corpus", corpus, "Corpus directory of session files");
    auto* f = sub->add_option("--features", features, "Feature CSV written by featurize");
    c->excludes(f);
    sub->add_option("--flavor", flavor, "statistical or nonstatistical")->capture_default_str();
    sub->add_option("--jobs", jobs, "Worker threads; results do not depend on it")->capture_default_str();
  }

  FeatureMatrix load(const Context& ctx) const {
    const DatasetFlavor fl = flavor_from(flavor);
    if (!features.empty()) return parse_feature_csv(read_text(features));
    if (corpus.empty()) throw SpecError("one of --corpus or --features is required");
    const auto sessions = load_corpus(corpus);
    ctx.log("loaded {} sessions from {}", sessions.size(), corpus);
    return build_dataset(sessions, fl, jobs);
  }
};

struct ModelFlags {
  ModelConfig config;

  void add(CLI::App* sub) {
    sub->add_option("--trees", config.rforest.trees, "Random forest size")->capture_default_str();
    sub->add_option("--max-depth", config.dtree.max_depth, "Tree depth cap, 0 for none")->capture_default_str();
    sub->add_option("--knn-k", config.knn.k, "Neighbours for KNN")->capture_default_str();
    sub->add_option("--l2", config.logreg.l2, "L2 penalty for logistic regression")->capture_default_str();
    sub->add_option("--epochs", config.mlp.epochs, "MLP training epochs")->capture_default_str();
    sub->add_option("--batch-size", config.mlp.batch_size, "MLP batch size, 0 for full batch")
        ->capture_default_str();
  }

  ModelConfig resolved() const {
    ModelConfig c = config;
    c.rforest.tree.max_depth = config.dtree.max_depth;
    return c;
  }
};

std::vector<FeatureSetSpec> feature_sets_from(const std::string& text, DatasetFlavor flavor) {
  if (text.empty()) {
    return flavor == DatasetFlavor::statistical ? statistical_feature_sets() : nonstatistical_feature_sets();
  }
  std::vector<FeatureSetSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(';', start), text.size());
    const std::string part = text.substr(start, end - start);
    if (!part.empty()) out.push_back(parse_feature_set(part));
    start = end + 1;
  }
  if (out.empty()) throw SpecError("no feature sets given");
  return out;
}

// ---- subcommands ---------------------------------------------------------

struct SynthCmd {
  GeneratorConfig cfg;
  double effect_size = 1.0;
  std::string out_dir;
  unsigned jobs = 1;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
    s->add_option("--sessions-per-emotion", cfg.sessions_per_emotion, "Sessions per emotion (8 emotions)")
        ->capture_default_str();
    s->add_option("--duration-s", cfg.duration_s, "Session length in seconds")->capture_default_str();
    s->add_option("--sample-rate-hz", cfg.sample_rate_hz, "Samples per second")->capture_default_str();
    s->add_option("--warmup-s", cfg.warmup_s, "Leading seconds without heart rate")->capture_default_str();
    s->add_option("--effect-size", effect_size, "Scale on between-emotion differences")->capture_default_str();
    s->add_option("--out", out_dir, "Output directory")->required();
    s->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  }

  void run(const Context& ctx) {
    cfg.seed = ctx.seed;
    cfg.profile.effect_size = effect_size;
    const auto corpus = write_corpus(cfg, out_dir, jobs);
    ctx.log("wrote {} sessions and manifest.tsv to {}", corpus.size(), out_dir);
  }
};

struct IngestCmd {
  std::string input;
  std::string out_dir;
  std::string report;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("ingest", "Validate session files and report cleaning counts");
    s->add_option("--input", input, "Session file (.jsonl/.csv) or corpus directory")->required();
    s->add_option("--out", out_dir, "Write canonical .jsonl session files here");
    s->add_option("--report", report, "Write the CSV report here instead of stdout");
  }

  void run(const Context& ctx) {
    const auto sessions = load_sessions(input);
    std::string csv =
        "session_id,samples,hr_samples,violations,warmup_dropped,invalid_dropped,nn_intervals_removed\n";
    std::size_t invalid = 0;
    for (const auto& r : sessions) {
      std::size_t hr = 0;
      for (const auto& s : r.samples) hr += s.hr_bpm.has_value();
      const auto violations = validate_recording(r);
      invalid += !violations.empty();
      std::string cleaning = ",,";
      try {
        const auto rep = clean_recording(r).second;
        cleaning = fmt::format("{},{},{}", rep.warmup_samples_dropped, rep.invalid_samples_dropped,
                               rep.nn_intervals_removed);
      } catch (const EmptySessionError& e) {
        ctx.log("{}: {}", r.meta.session_id, e.what());
      }
      for (const auto& v : violations) ctx.log("{}: {}: {}", r.meta.session_id, v.field, v.rule);
      csv += fmt::format("{},{},{},{},{}\n", r.meta.session_id, r.samples.size(), hr, violations.size(), cleaning);
      if (!out_dir.empty()) write_session_file(r, fs::path(out_dir) / (r.meta.session_id + ".jsonl"));
    }
    emit(ctx, report, csv);
    ctx.log("{} sessions, {} with violations", sessions.size(), invalid);
  }
};

struct FeaturizeCmd {
  DataSource src;
  std::string out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("featurize", "Build the statistical or non-statistical feature matrix");
    s->add_option("--corpus", src.corpus, "Corpus directory")->required();
    s->add_option("--flavor", src.flavor, "statistical or nonstatistical")->capture_default_str();
    s->add_option("--jobs", src.jobs, "Worker threads")->capture_default_str();
    s->add_option("--out", out, "Feature CSV path (default stdout)");
  }

  void run(const Context& ctx) {
    const FeatureMatrix m = src.load(ctx);
    emit(ctx, out, write_feature_csv(m));
    ctx.log("{} rows x {} columns", m.rows(), m.cols());
  }
};

struct ClusterCmd {
  std::string corpus;
  std::size_t k = 2;
  std::string out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("cluster", "K-means over self-reported valence and arousal");
    s->add_option("--corpus", corpus, "Corpus directory")->required();
    s->add_option("--k", k, "Number of clusters")->capture_default_str();
    s->add_option("--out", out, "Cluster CSV path (default stdout)");
  }

  void run(const Context& ctx) {
    const auto sessions = load_corpus(corpus);
    const auto points = valence_arousal_points(sessions);
    std::vector<Point2> xy;
    std::vector<BinaryMood> moods;
    for (const auto& p : points) {
      xy.push_back({static_cast<double>(p.valence), static_cast<double>(p.arousal)});
      moods.push_back(p.mood);
    }
    const ClusterModel model = kmeans(xy, k, ctx.seed);
    emit(ctx, out, write_cluster_csv(points, model));
    ctx.log("{} points, {} iterations, inertia {:.4f}", xy.size(), model.iterations, model.inertia);
    if (k == 2) ctx.log("agreement with reported mood: {:.4f}", cluster_label_agreement(model, moods));
  }
};

struct TrainCmd {
  DataSource src;
  ModelFlags flags;
  std::string model = "rforest";
  std::string feature_set = "all";
  std::string out;
  std::string curve;
  double validation_fraction = 0.2;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("train", "Fit one model on a whole dataset and save it");
    src.add(s);
    flags.add(s);
    s->add_option("--model", model, "logreg, dtree, rforest, gnb, knn or mlp")->capture_default_str();
    s->add_option("--feature-set", feature_set, "Feature selector, e.g. \"Hrv,Acc\" or \"PCA(3)\"")
        ->capture_default_str();
    s->add_option("--out", out, "Model file")->required();
    s->add_option("--curve", curve, "MLP only: also fit on a held-out split and write per-epoch curves");
    s->add_option("--validation-fraction", validation_fraction, "Held-out share for --curve")
        ->capture_default_str();
  }

  void run(const Context& ctx) {
    const DatasetFlavor flavor = flavor_from(src.flavor);
    const FeatureMatrix data = src.load(ctx);
    const ModelKind kind = kind_from(model);
    const FeatureSetSpec spec = parse_feature_set(feature_set);
    const ModelConfig config = flags.resolved();
    const TrainedModel m = train_model(kind, data, spec, config, ctx.seed, {src.jobs}, flavor);
    emit(ctx, out, save_model(m));
    ctx.log("trained {} on {} rows, {} inputs ({})", display_name(kind), data.rows(), m.input_width(),
            spec.name());

    if (curve.empty()) return;
    if (kind != ModelKind::mlp) throw SpecError("--curve is only available for --model mlp");
    if (spec.pca_components) throw SpecError("--curve does not support PCA feature sets");
    const FeatureMatrix selected = select_features(data, spec);
    const SplitPlan plan = split_dataset(selected, flavor, validation_fraction, ctx.seed);
    const FeatureMatrix train = selected.subset_rows(plan.train);
    const FeatureMatrix test = selected.subset_rows(plan.test);
    TrainingCurve c;
    fit_mlp(train, config, ctx.seed, &test, &c);
    std::string csv = "epoch,train_loss,train_accuracy,test_loss,test_accuracy\n";
    for (std::size_t e = 0; e < c.train_loss.size(); ++e) {
      csv += fmt::format("{},{},{},{},{}\n", e + 1, c.train_loss[e], c.train_accuracy[e], c.test_loss[e],
                         c.test_accuracy[e]);
    }
    emit(ctx, curve, csv);
  }
};

struct EvaluateCmd {
  DataSource src;
  ModelFlags flags;
  std::vector<std::string> models;
  std::string feature_set = "all";
  std::string model_file;
  std::size_t repeats = 10;
  double test_fraction = 0.2;
  std::string out;
  std::string table;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("evaluate",
                                 "Repeated stratified evaluation of models on one feature set, or score a saved model");
    src.add(s);
    flags.add(s);
    s->add_option("--models", models, "Comma-separated model names (default: all for the flavor)")
        ->delimiter(',');
    s->add_option("--feature-set", feature_set, "Feature selector")->capture_default_str();
    s->add_option("--model-file", model_file, "Score this saved model on the whole dataset instead");
    s->add_option("--repeats", repeats, "Random splits")->capture_default_str();
    s->add_option("--test-fraction", test_fraction, "Test share per class")->capture_default_str();
    s->add_option("--out", out, "CSV report path (default stdout)");
    s->add_option("--table", table, "Also write the aligned text table here");
  }

  void run(const Context& ctx) {
    const DatasetFlavor flavor = flavor_from(src.flavor);
    const FeatureMatrix data = src.load(ctx);
    if (!model_file.empty()) {
      const TrainedModel m = load_model_file(model_file);
      std::vector<BinaryMood> preds(data.rows());
      for (std::size_t r = 0; r < data.rows(); ++r) {
        preds[r] = predict(m, gather_model_inputs(m, data.column_names(), data.row(r)));
      }
      const double acc = flavor == DatasetFlavor::statistical
                             ? standard_accuracy(preds, data.labels())
                             : custom_accuracy(preds, data.labels(), data.group_ids());
      emit(ctx, out,
           fmt::format("model,feature_set,flavor,rows,accuracy\n{},\"{}\",{},{},{}\n", to_string(m.kind),
                       m.feature_set, to_string(flavor), data.rows(), acc));
      return;
    }
    AblationConfig cfg;
    cfg.flavor = flavor;
    cfg.feature_sets = {parse_feature_set(feature_set)};
    cfg.models = kinds_from(models, flavor);
    cfg.repeats = repeats;
    cfg.seed = ctx.seed;
    cfg.test_fraction = test_fraction;
    cfg.model_config = flags.resolved();
    cfg.jobs = src.jobs;
    const EvalReport report = run_ablation(data, cfg);
    emit(ctx, out, write_report_csv(report));
    if (!table.empty()) emit(ctx, table, write_report_table(report));
  }
};

struct AblateCmd {
  DataSource src;
  ModelFlags flags;
  std::vector<std::string> models;
  std::string feature_sets;
  std::size_t repeats = 10;
  double test_fraction = 0.2;
  std::string out;
  std::string table;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("ablate", "Full feature-set x model grid with repeated splits");
    src.add(s);
    flags.add(s);
    s->add_option("--models", models, "Comma-separated model names (default: table columns)")->delimiter(',');
    s->add_option("--feature-sets", feature_sets, "Semicolon-separated selectors (default: table rows)");
    s->add_option("--repeats", repeats, "Random splits per cell")->capture_default_str();
    s->add_option("--test-fraction", test_fraction, "Test share per class")->capture_default_str();
    s->add_option("--out", out, "CSV report path (default stdout)");
    s->add_option("--table", table, "Also write the aligned text table here");
  }

  void run(const Context& ctx) {
    const DatasetFlavor flavor = flavor_from(src.flavor);
    const FeatureMatrix data = src.load(ctx);
    AblationConfig cfg;
    cfg.flavor = flavor;
    cfg.feature_sets = feature_sets_from(feature_sets, flavor);
    cfg.models = kinds_from(models, flavor);
    cfg.repeats = repeats;
    cfg.seed = ctx.seed;
    cfg.test_fraction = test_fraction;
    cfg.model_config = flags.resolved();
    cfg.jobs = src.jobs;
    ctx.log("{} feature sets x {} models x {} repeats", cfg.feature_sets.size(), cfg.models.size(), repeats);
    const EvalReport report = run_ablation(data, cfg);
    emit(ctx, out, write_report_csv(report));
    if (!table.empty()) emit(ctx, table, write_report_table(report));
    if (!ctx.quiet) ctx.err << write_report_table(report);
  }
};

struct SummarizeCmd {
  std::string corpus;
  std::string format = "text";
  std::string out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("summarize", "Mean HR and motion per age group, gender, emotion and mood");
    s->add_option("--corpus", corpus, "Corpus directory")->required();
    s->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
    s->add_option("--out", out, "Output path (default stdout)");
  }

  void run(const Context& ctx) {
    const auto sessions = load_corpus(corpus);
    const GroupSummary s = group_summary(sessions);
    emit(ctx, out, format == "csv" ? write_summary_csv(s) : write_summary_text(s));
  }
};

struct PredictCmd {
  std::string model;
  std::string session;
  std::string path = "statistical";
  std::string out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("predict", "Predict the mood of recorded sessions with a saved model");
    s->add_option("--model", model, "Model file")->required();
    s->add_option("--session", session, "Session file (.jsonl/.csv) or corpus directory")->required();
    s->add_option("--path", path, "statistical or nonstatistical")->capture_default_str();
    s->add_option("--out", out, "JSON lines output (default stdout)");
  }

  void run(const Context& ctx) {
    const TrainedModel m = load_model_file(model);
    const auto sessions = load_sessions(session);
    const DatasetFlavor flavor = flavor_from(path);
    std::string lines;
    for (const auto& r : sessions) {
      const auto p = predict_session(m, r, flavor);
      nlohmann::ordered_json j = {{"session_id", r.meta.session_id},
                                  {"mood", to_string(p.mood)},
                                  {"probability", p.probability},
                                  {"features_used", p.features_used}};
      lines += j.dump() + "\n";
    }
    emit(ctx, out, lines);
  }
};

struct ServeCmd {
  ServiceConfig cfg;
  std::string model;
  std::string corpus_dir;
  int port = 8080;
  std::string host = "127.0.0.1";
  CLI::App* sub = nullptr;

  void add(CLI::App& app) {
    sub = app.add_subcommand("serve", "Run the session collection and prediction HTTP service");
    sub->add_option("--model", model, "Model file used for predictions");
    sub->add_option("--corpus-dir", corpus_dir, "Where finished sessions are written")->capture_default_str();
    sub->add_option("--port", port, "TCP port, 0 for any")->capture_default_str();
    sub->add_option("--host", host, "Bind address")->capture_default_str();
    sub->add_option("--cors-origin", cfg.cors_origin, "Access-Control-Allow-Origin value")->capture_default_str();
  }

  void run(const Context& ctx) {
    // Defaults, then environment, then explicit flags.
    apply_env_overrides(cfg);
    if (sub->count("--model")) cfg.model_file = fs::path(model);
    if (sub->count("--corpus-dir")) cfg.corpus_dir = corpus_dir;
    if (sub->count("--port")) cfg.port = port;
    if (sub->count("--host")) cfg.host = host;

    std::optional<TrainedModel> loaded;
    if (cfg.model_file) {
      loaded = load_model_file(*cfg.model_file);
      ctx.log("model {} ({}, {})", cfg.model_file->string(), to_string(loaded->kind), loaded->feature_set);
    } else {
      ctx.log("no model loaded; prediction requests will return 503");
    }
    SessionService service(cfg.corpus_dir, std::move(loaded));
    HttpServer server(service, cfg.cors_origin);
    const int bound = server.bind(cfg.host, cfg.port);
    ctx.log("listening on http://{}:{} (sessions in {})", cfg.host, bound, cfg.corpus_dir.string());
    server.listen();
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Smartwatch emotion prediction toolkit", "emowatch"};
  app.fallthrough();
  app.require_subcommand(1);
  Context ctx{out, err};
  app.add_option("--seed", ctx.seed, "Master seed for every random choice")->capture_default_str();
  app.add_flag("--quiet", ctx.quiet, "Suppress progress messages");

  SynthCmd synth;
  IngestCmd ingest;
  FeaturizeCmd featurize;
  ClusterCmd cluster;
  TrainCmd train;
  EvaluateCmd evaluate;
  AblateCmd ablate;
  SummarizeCmd summarize;
  PredictCmd predict_cmd;
  ServeCmd serve;
  synth.add(app);
  ingest.add(app);
  featurize.add(app);
  cluster.add(app);
  train.add(app);
  evaluate.add(app);
  ablate.add(app);
  summarize.add(app);
  predict_cmd.add(app);
  serve.add(app);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") synth.run(ctx);
    else if (name == "ingest") ingest.run(ctx);
    else if (name == "featurize") featurize.run(ctx);
    else if (name == "cluster") cluster.run(ctx);
    else if (name == "train") train.run(ctx);
    else if (name == "evaluate") evaluate.run(ctx);
    else if (name == "ablate") ablate.run(ctx);
    else if (name == "summarize") summarize.run(ctx);
    else if (name == "predict") predict_cmd.run(ctx);
    else if (name == "serve") serve.run(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace emowatch::cli
