// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msmix/checkpoint.hpp"
#include "msmix/config.hpp"
#include "msmix/dataset.hpp"
#include "msmix/trainer.hpp"

namespace msmix::cli {

namespace fs = std::filesystem;

/// Usage problems (bad flags, unreadable config, invalid override): exit 1.
class UsageError : public Error {
public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

inline void write_file(const fs::path &path, const std::string &text) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out)
    throw Error("failed writing '" + path.string() + "'");
}

inline std::string seed_record(std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["streams"] = {{"init", derive_seed(seed, SeedStream::init)},
                  {"shuffle", derive_seed(seed, SeedStream::shuffle)},
                  {"augment", derive_seed(seed, SeedStream::augment)},
                  {"occlusion", derive_seed(seed, SeedStream::occlusion)},
                  {"split", derive_seed(seed, SeedStream::split)}};
  return j.dump(2) + "\n";
}

/// Writes effective_config.json and seed.json into the output directory.
inline void write_run_record(const fs::path &dir, const nlohmann::json &effective, std::uint64_t seed) {
  write_file(dir / "effective_config.json", effective.dump(2) + "\n");
  write_file(dir / "seed.json", seed_record(seed));
}

inline std::string steps_csv(const TrainResult &r) {
  std::ostringstream s;
  s << "step,task,mix_mse,sal,total\n";
  for (const auto &st : r.steps)
    s << st.step << ',' << format_double(st.losses.task) << ',' << format_double(st.losses.mix_mse) << ','
      << format_double(st.losses.sal) << ',' << format_double(st.losses.total) << '\n';
  return s.str();
}

inline std::string metric_cells(const MetricsReport &m) {
  std::ostringstream s;
  s << format_double(m.mae) << ',' << format_double(m.acc2) << ',' << format_double(m.w_acc2) << ','
    << format_double(m.acc5) << ',' << format_double(m.acc7) << ',' << format_double(m.f1) << ','
    << format_double(m.w_f1);
  return s.str();
}

inline constexpr const char *kMetricHeader = "MAE,ACC2,w-ACC2,ACC5,ACC7,F1,w-F1";

inline std::string epochs_csv(const TrainResult &r) {
  std::ostringstream s;
  s << "epoch,task,mix_mse,sal,total," << kMetricHeader << "\n";
  for (const auto &e : r.epochs)
    s << e.epoch << ',' << format_double(e.mean_loss.task) << ',' << format_double(e.mean_loss.mix_mse) << ','
      << format_double(e.mean_loss.sal) << ',' << format_double(e.mean_loss.total) << ',' << metric_cells(e.val)
      << '\n';
  return s.str();
}

inline std::string ablation_csv(const std::vector<AblationRow> &rows) {
  std::ostringstream s;
  s << "variant,mode,sass_on,sig_on,sal_on,seed,data_hash," << kMetricHeader << "\n";
  for (const auto &r : rows)
    s << r.variant.name << ',' << mode_name(r.variant.mode) << ',' << r.variant.sass_on << ',' << r.variant.sig_on
      << ',' << r.variant.sal_on << ',' << r.seed << ',' << r.data_hash << ',' << metric_cells(r.metrics) << '\n';
  return s.str();
}

inline std::string occlusion_csv(const std::vector<OcclusionRow> &rows) {
  std::ostringstream s;
  s << "ratio,mode,MAE,ACC2\n";
  for (const auto &r : rows)
    s << format_double(r.ratio) << ',' << mode_name(r.mode) << ',' << format_double(r.metrics.mae) << ','
      << format_double(r.metrics.acc2) << '\n';
  return s.str();
}

inline std::string hyper_csv(const std::vector<HyperRow> &rows) {
  std::ostringstream s;
  s << "delta,xi1,xi2,alpha,heads,MAE,ACC2\n";
  for (const auto &r : rows)
    s << format_double(r.point.delta) << ',' << format_double(r.point.xi1) << ',' << format_double(r.point.xi2)
      << ',' << format_double(r.point.alpha) << ',' << r.point.heads << ',' << format_double(r.metrics.mae) << ','
      << format_double(r.metrics.acc2) << '\n';
  return s.str();
}

inline std::string similarity_csv(const SimilarityReport &s) {
  std::ostringstream o;
  for (std::size_t i = 0; i < s.similarity.rows(); ++i) {
    for (std::size_t j = 0; j < s.similarity.cols(); ++j)
      o << (j ? "," : "") << format_double(s.similarity(i, j));
    o << '\n';
  }
  return o.str();
}

inline nlohmann::json plan_to_json(const MixPlan &plan) {
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t p = 0; p < plan.size(); ++p) {
    nlohmann::json lam;
    for (Modality m : kModalities)
      lam[std::string(modality_key(m))] = plan.ratios[static_cast<std::size_t>(m)][p];
    pairs.push_back({{"i", plan.selection.pairs[p].i},
                     {"j", plan.selection.pairs[p].j},
                     {"lambda_base", plan.lambda_base[p]},
                     {"lambda", lam},
                     {"lambda_label", plan.label_ratio[p]}});
  }
  return pairs;
}

/// Parsed state shared by every subcommand.
struct Invocation {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = ".";
  std::map<std::string, std::string> overrides;
  std::string data_path;

  // gen-data
  std::size_t n = 600;
  double sigma = 0.1;
  std::size_t raw_dim = 16;
  std::uint64_t data_seed = 0;
  std::string data_out;

  // eval / augment-dump
  std::string checkpoint_path;
  std::string split = "val";
  std::size_t batch_index = 0;

  // sweeps
  std::vector<double> ratios;
  std::vector<std::string> modes;
  HyperGrid grid;
};

inline TrainConfig effective_config(const Invocation &inv) {
  TrainConfig c;
  if (!inv.config_path.empty()) {
    std::string text;
    try {
      text = read_text_file(inv.config_path);
    } catch (const Error &) {
      throw UsageError("cannot read config file '" + inv.config_path + "'");
    }
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded())
      throw UsageError("config file '" + inv.config_path + "' is not valid JSON");
    try {
      c = config_from_json(j, c);
    } catch (const ParseError &e) {
      throw UsageError("config file '" + inv.config_path + "': " + e.what());
    }
  }
  for (const auto &[key, value] : inv.overrides) {
    try {
      set_config_value(c, key, override_value(value));
    } catch (const ParseError &e) {
      throw UsageError(std::string("invalid override --") + key + ": " + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ValueError &e) {
    throw UsageError(e.what());
  }
  return c;
}

/// The dataset named by --data, or default synthetic data seeded from the run seed.
inline Dataset input_dataset(const Invocation &inv, const TrainConfig &c) {
  if (!inv.data_path.empty())
    return load_dataset(inv.data_path);
  SynthConfig sc;
  sc.seed = c.seed;
  return generate(sc);
}

inline int cmd_gen_data(const Invocation &inv) {
  SynthConfig sc;
  sc.n = inv.n;
  sc.sigma = inv.sigma;
  sc.raw_dims = {inv.raw_dim, inv.raw_dim, inv.raw_dim};
  sc.seed = inv.data_seed;
  const Dataset d = generate(sc);
  const fs::path out(inv.data_out);
  write_file(out, dataset_to_string(d));
  const fs::path dir = inv.out_dir != "." ? fs::path(inv.out_dir)
                                          : (out.has_parent_path() ? out.parent_path() : fs::path("."));
  write_run_record(dir, {{"n", sc.n}, {"sigma", sc.sigma}, {"raw_dim", inv.raw_dim}, {"seed", sc.seed},
                         {"out", inv.data_out}},
                   sc.seed);
  return kExitOk;
}

inline int cmd_train(const Invocation &inv, std::ostream &out) {
  const TrainConfig c = effective_config(inv);
  const fs::path dir(inv.out_dir);
  write_run_record(dir, config_to_json(c), c.seed);
  const Dataset d = input_dataset(inv, c);
  const TrainResult r = train(c, d);
  write_file(dir / "metrics.csv", steps_csv(r));
  write_file(dir / "epoch_metrics.csv", epochs_csv(r));
  nlohmann::json report = metrics_to_json(r.report);
  report["skipped_batches"] = r.skipped_batches;
  report["clamped_weights"] = r.clamped_weights;
  report["data_hash"] = r.data_hash;
  write_file(dir / "report.json", report.dump(2) + "\n");
  save_checkpoint(r.params, (dir / "checkpoint.json").string());
  out << "val MAE " << format_double(r.report.mae) << " ACC2 " << format_double(r.report.acc2) << "\n";
  return kExitOk;
}

inline int cmd_eval(const Invocation &inv, std::ostream &out) {
  const TrainConfig c = effective_config(inv);
  const fs::path dir(inv.out_dir);
  nlohmann::json eff = config_to_json(c);
  eff["checkpoint"] = inv.checkpoint_path;
  eff["split"] = inv.split;
  write_run_record(dir, eff, c.seed);
  const ModelParams p = load_checkpoint(inv.checkpoint_path);
  const Dataset d = input_dataset(inv, c);
  const Split which = parse_split(inv.split);
  Dataset target = d;
  if (which != Split::all) {
    const DatasetSplits s = split_dataset(d, derive_seed(c.seed, SeedStream::split));
    target = which == Split::train ? s.train : which == Split::val ? s.val : s.test;
  }
  const MetricsReport m = evaluate(p, target);
  write_file(dir / "report.json", metrics_to_json(m).dump(2) + "\n");
  out << inv.split << " MAE " << format_double(m.mae) << " ACC2 " << format_double(m.acc2) << "\n";
  return kExitOk;
}

inline int cmd_augment_dump(const Invocation &inv, std::ostream &out) {
  TrainConfig c = effective_config(inv);
  const fs::path dir(inv.out_dir);
  write_run_record(dir, config_to_json(c), c.seed);
  const Dataset d = input_dataset(inv, c);
  const DatasetSplits s = split_dataset(d, derive_seed(c.seed, SeedStream::split));
  ModelParams p;
  if (!inv.checkpoint_path.empty()) {
    p = load_checkpoint(inv.checkpoint_path);
  } else {
    Rng init_rng(derive_seed(c.seed, SeedStream::init));
    p = ModelParams::init(backbone_dims(c, d), c.heads, init_rng);
  }
  const std::size_t start = inv.batch_index * c.batch_size;
  if (start >= s.train.size())
    throw ValueError("batch index " + std::to_string(inv.batch_index) + " is past the training split");
  std::vector<std::size_t> idx;
  for (std::size_t i = start; i < std::min(start + c.batch_size, s.train.size()); ++i)
    idx.push_back(i);
  const Dataset batch = s.train.subset(idx, Split::train);

  Rng rng(derive_seed(c.seed, SeedStream::augment));
  bool skipped = false;
  const StepPlan step = plan_step(c, p, batch.features, rng, &skipped);
  const StepResult r = evaluate_objective(p, batch.features, batch.labels, step, objective_options(c));
  const FullBatch latent = encode(p.backbone, batch.features);
  const SimilarityReport sim = similarity_matrix(latent, c.delta);

  nlohmann::json j;
  j["mode"] = std::string(mode_name(c.mode));
  j["batch_size"] = batch.size();
  j["threshold"] = sim.threshold;
  j["mean_offdiag"] = sim.mean_offdiag;
  j["skipped"] = skipped;
  j["pairs"] = plan_to_json(r.plan);
  j["mixed_labels"] = mix_labels(r.plan, batch.labels);
  write_file(dir / "augment.json", j.dump(2) + "\n");
  write_file(dir / "similarity.csv", similarity_csv(sim));
  out << r.plan.size() << " mixed pairs\n";
  return kExitOk;
}

inline int cmd_ablate(const Invocation &inv, std::ostream &out) {
  const TrainConfig c = effective_config(inv);
  const fs::path dir(inv.out_dir);
  write_run_record(dir, config_to_json(c), c.seed);
  const auto rows = run_ablation(c, input_dataset(inv, c));
  write_file(dir / "ablation.csv", ablation_csv(rows));
  out << rows.size() << " ablation rows\n";
  return kExitOk;
}

inline int cmd_occlusion(const Invocation &inv, std::ostream &out) {
  const TrainConfig c = effective_config(inv);
  const fs::path dir(inv.out_dir);
  std::vector<AugmentMode> modes;
  try {
    for (const auto &m : inv.modes)
      modes.push_back(parse_mode(m));
  } catch (const ValueError &e) {
    throw UsageError(e.what());
  }
  if (modes.empty())
    modes = all_modes();
  const auto ratios = inv.ratios.empty() ? default_occlusion_ratios() : inv.ratios;
  for (double r : ratios)
    if (!(r >= 0.0 && r <= kMaxOcclusionRatio))
      throw UsageError("occlusion ratio " + format_double(r) + " outside [0, 0.4]");
  nlohmann::json eff = config_to_json(c);
  eff["ratios"] = ratios;
  write_run_record(dir, eff, c.seed);
  const auto rows = run_occlusion_sweep(c, input_dataset(inv, c), ratios, modes);
  write_file(dir / "occlusion.csv", occlusion_csv(rows));
  out << rows.size() << " occlusion rows\n";
  return kExitOk;
}

inline int cmd_hyper(const Invocation &inv, std::ostream &out) {
  const TrainConfig c = effective_config(inv);
  const fs::path dir(inv.out_dir);
  nlohmann::json eff = config_to_json(c);
  eff["grid"] = {{"delta", inv.grid.delta}, {"xi1", inv.grid.xi1}, {"xi2", inv.grid.xi2},
                 {"alpha", inv.grid.alpha}, {"heads", inv.grid.heads}};
  write_run_record(dir, eff, c.seed);
  for (std::size_t h : inv.grid.heads)
    if (h == 0)
      throw UsageError("grid heads must be positive");
  const auto rows = hyper_sweep(c, input_dataset(inv, c), inv.grid);
  write_file(dir / "hyper.csv", hyper_csv(rows));
  out << rows.size() << " grid points\n";
  return kExitOk;
}

inline const std::vector<std::string> &config_keys() {
  static const std::vector<std::string> keys = [] {
    const nlohmann::json defaults = config_to_json(TrainConfig{});
    std::vector<std::string> k;
    for (const auto &[key, _] : defaults.items())
      k.push_back(key);
    return k;
  }();
  return keys;
}

inline void add_config_flags(CLI::App &sub, Invocation &inv) {
  sub.add_option("--config", inv.config_path, "JSON config with flat TrainConfig keys");
  sub.add_option("--out-dir", inv.out_dir, "Output directory");
  for (const auto &key : config_keys()) {
    sub.add_option_function<std::string>(
           "--" + key, [&inv, key](const std::string &v) { inv.overrides[key] = v; },
           "Override config key '" + key + "'")
        ->type_name("VALUE");
  }
}

/// Parses argv, runs the subcommand, and maps failures to exit codes:
/// 0 success, 1 usage error, 2 runtime failure (JSON error on `err`).
inline int parse_and_dispatch(int argc, const char *const *argv, std::ostream &out = std::cout,
                              std::ostream &err = std::cerr) {
  CLI::App app{"Sentiment-aware multimodal mixup: data generation, training, evaluation, sweeps", "msmix"};
  app.require_subcommand(1);
  Invocation inv;

  auto *gen = app.add_subcommand("gen-data", "Generate a synthetic multimodal sentiment dataset");
  gen->add_option("--n", inv.n, "Number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--sigma", inv.sigma, "Feature noise scale")->check(CLI::NonNegativeNumber);
  gen->add_option("--raw-dim", inv.raw_dim, "Raw feature dimension per modality")->check(CLI::PositiveNumber);
  gen->add_option("--seed", inv.data_seed, "Generator seed");
  gen->add_option("--out", inv.data_out, "Dataset JSON path")->required();
  gen->add_option("--out-dir", inv.out_dir, "Directory for the run record (default: next to --out)");

  auto *tr = app.add_subcommand("train", "Train the toy backbone with the configured augmentation");
  auto *ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  auto *dump = app.add_subcommand("augment-dump", "Dump the mix plan and similarity matrix of one batch");
  auto *abl = app.add_subcommand("ablate", "Run the six-variant component ablation");
  auto *occ = app.add_subcommand("occlusion-sweep", "Train every mode at each occlusion ratio");
  auto *hyp = app.add_subcommand("hyper-sweep", "Grid sweep over delta, xi1, xi2, alpha and heads");
  for (auto *s : {tr, ev, dump, abl, occ, hyp}) {
    add_config_flags(*s, inv);
    s->add_option("--data", inv.data_path, "Dataset JSON (default: synthetic data from --seed)");
  }
  ev->add_option("--checkpoint", inv.checkpoint_path, "Checkpoint JSON")->required();
  ev->add_option("--split", inv.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  dump->add_option("--checkpoint", inv.checkpoint_path, "Checkpoint JSON (default: fresh init from --seed)");
  dump->add_option("--batch-index", inv.batch_index, "Which training batch to dump");
  occ->add_option("--ratios", inv.ratios, "Occlusion ratios (default 0 0.1 0.2 0.3 0.4)");
  occ->add_option("--modes", inv.modes, "Modes to compare (default: all)");
  hyp->add_option("--grid-delta", inv.grid.delta, "Similarity thresholds (default 0 0.1 0.2 0.3 0.4)");
  hyp->add_option("--grid-xi1", inv.grid.xi1, "Mixed-loss weights");
  hyp->add_option("--grid-xi2", inv.grid.xi2, "Alignment-loss weights");
  hyp->add_option("--grid-alpha", inv.grid.alpha, "Beta shape parameters");
  hyp->add_option("--grid-heads", inv.grid.heads, "Attention head counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(inv);
    if (tr->parsed())
      return cmd_train(inv, out);
    if (ev->parsed())
      return cmd_eval(inv, out);
    if (dump->parsed())
      return cmd_augment_dump(inv, out);
    if (abl->parsed())
      return cmd_ablate(inv, out);
    if (occ->parsed())
      return cmd_occlusion(inv, out);
    if (hyp->parsed())
      return cmd_hyper(inv, out);
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception &e) {
    const char *type = dynamic_cast<const ParseError *>(&e)       ? "parse_error"
                       : dynamic_cast<const DimensionError *>(&e) ? "dimension_error"
                       : dynamic_cast<const ValueError *>(&e)     ? "value_error"
                                                                  : "runtime_error";
    nlohmann::json j{{"error", {{"type", type}, {"message", e.what()}}}};
    if (const auto *pe = dynamic_cast<const ParseError *>(&e))
      j["error"]["field"] = pe->field();
    err << j.dump() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

} // namespace msmix::cli
