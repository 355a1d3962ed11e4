#include "pcmea/cli.hpp"

#include <iostream>

#include <CLI11.hpp>

#include "pcmea/checkpoint.hpp"
#include "pcmea/dataset.hpp"
#include "pcmea/error.hpp"
#include "text_io.hpp"

namespace pcmea {

namespace {

struct SynthArgs {
  std::size_t entities = 200;
  std::size_t relations = 12;
  std::size_t attributes = 16;
  std::size_t feature_dim = 32;
  double noise = 0.0;
  std::uint64_t seed = 0;
  SyntheticOptions options;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out = "run";
  std::string resume;
  std::vector<std::string> overrides;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string json;
  bool all_targets = false;
  bool bidirectional = false;
};

struct PredictArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  double threshold = -2.0;
};

struct PlotArgs {
  std::string history;
  std::string quantity;
  std::string out;
};

TrainConfig build_config(const TrainArgs& a) {
  std::string text;
  if (!a.config.empty()) {
    auto in = detail::open_input(a.config);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str() + "\n";
  }
  for (const auto& o : a.overrides) text += o + "\n";
  return parse_config(text);
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  const auto bench = generate_synthetic_pair(a.entities, a.relations, a.attributes, a.feature_dim, a.noise, a.seed, a.options);
  write_dataset(bench, a.out);
  out << "wrote " << a.entities << "-entity synthetic pair to " << a.out << "\n";
  return 0;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const auto config = build_config(a);
  const auto data = load_dataset(a.data, config);
  std::optional<TrainState> resume;
  if (!a.resume.empty()) resume = load_checkpoint(a.resume, config).state;
  const auto state = run_training(config, data, a.out, std::move(resume));
  const RunPaths paths{a.out};
  out << "trained " << state.epoch << " epochs; checkpoint " << paths.checkpoint().string() << ", history "
      << paths.history().string() << "\n";
  if (!state.history.empty()) out << "final loss " << state.history.back().loss.total << "\n";
  return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  auto loaded = load_checkpoint(a.checkpoint);
  auto config = loaded.config;
  config.eval_all_targets = config.eval_all_targets || a.all_targets;
  config.eval_bidirectional = config.eval_bidirectional || a.bidirectional;
  const auto data = load_dataset(a.data, config);
  const Trainer trainer(config, data, std::move(loaded.state));
  const auto report = trainer.evaluate();
  out << report.to_table();
  if (!a.json.empty()) {
    auto f = detail::open_output(a.json);
    f << report.to_json() << "\n";
    detail::finish_output(f, a.json);
  }
  return 0;
}

int run_predict(const PredictArgs& a, std::ostream& out) {
  auto loaded = load_checkpoint(a.checkpoint);
  const auto config = loaded.config;
  const auto data = load_dataset(a.data, config);
  const Trainer trainer(config, data, std::move(loaded.state));
  const auto src = trainer.embed(GraphSide::Source);
  const auto tgt = trainer.embed(GraphSide::Target);
  std::vector<EntityIndex> rows, cols;
  for (const auto& p : data.pair.test_seeds.pairs) rows.push_back(p.source);
  if (config.eval_all_targets) {
    for (EntityIndex t = 0; t < data.pair.target.num_entities(); ++t) cols.push_back(t);
  } else {
    for (const auto& p : data.pair.test_seeds.pairs) cols.push_back(p.target);
  }
  std::sort(rows.begin(), rows.end());
  std::sort(cols.begin(), cols.end());
  const auto sim = similarity_matrix(src.joint, tgt.joint, rows, cols);
  export_alignments(sim, data.pair.source, data.pair.target, a.out, a.threshold);
  out << "wrote alignments for " << rows.size() << " source entities to " << a.out << "\n";
  return 0;
}

int run_plot(const PlotArgs& a, std::ostream& out) {
  emit_plot_data(a.history, parse_plot_quantity(a.quantity), a.out);
  out << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised multi-modal entity alignment", "pcmea"};
  app.require_subcommand(0, 1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic aligned graph pair with features");
  s->add_option("--entities", synth.entities, "Entities per graph")->capture_default_str();
  s->add_option("--relations", synth.relations, "Relation vocabulary size")->capture_default_str();
  s->add_option("--attributes", synth.attributes, "Attribute vocabulary size")->capture_default_str();
  s->add_option("--feature-dim", synth.feature_dim, "Text and visual feature width")->capture_default_str();
  s->add_option("--noise", synth.noise, "Structure noise in [0, 1]")->capture_default_str();
  s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  s->add_option("--triples-per-entity", synth.options.triples_per_entity, "Relation triples per entity")
      ->capture_default_str();
  s->add_option("--noisy-fraction", synth.options.noisy_channel_fraction,
                "Fraction of visual channels with amplified noise")
      ->capture_default_str();
  s->add_option("--noisy-gain", synth.options.noisy_channel_gain, "Noise amplification on those channels")
      ->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train on a dataset directory");
  t->add_option("--config", train.config, "Config file (key = value)");
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--out", train.out, "Run directory")->capture_default_str();
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--set", train.overrides, "Config override `key=value` (repeatable)");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on the test seeds");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", eval.data, "Dataset directory")->required();
  e->add_option("--json", eval.json, "Also write the report as JSON");
  e->add_flag("--all-targets", eval.all_targets, "Rank against every target entity");
  e->add_flag("--bidirectional", eval.bidirectional, "Average both ranking directions");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Export top-1 alignments for the test sources");
  p->add_option("--checkpoint", predict.checkpoint, "Checkpoint file")->required();
  p->add_option("--data", predict.data, "Dataset directory")->required();
  p->add_option("--out", predict.out, "Output TSV")->required();
  p->add_option("--threshold", predict.threshold, "Skip predictions scoring below this");

  PlotArgs plot;
  auto* pl = app.add_subcommand("plot-data", "Extract a per-epoch curve from a history file as CSV");
  pl->add_option("--history", plot.history, "history.jsonl")->required();
  pl->add_option("--quantity", plot.quantity, "hits1_vs_epoch | mrr_vs_epoch | loss_vs_epoch")->required();
  pl->add_option("--out", plot.out, "Output CSV")->required();

  if (args.empty()) {
    err << app.help();
    return 1;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (*s) return run_synth(synth, out);
    if (*t) return run_train(train, out);
    if (*e) return run_eval(eval, out);
    if (*p) return run_predict(predict, out);
    if (*pl) return run_plot(plot, out);
    err << app.help();
    return 1;
  } catch (const IoError& ex) {
    err << "I/O error: " << ex.what() << "\n";
    return 2;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace pcmea
