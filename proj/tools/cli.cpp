#include "cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "pcdan/binary_io.hpp"
#include "pcdan/error.hpp"
#include "pcdan/losscheck.hpp"
#include "pcdan/metrics.hpp"
#include "pcdan/model_io.hpp"
#include "pcdan/parallel.hpp"
#include "pcdan/synth.hpp"
#include "pcdan/track_table.hpp"
#include "pcdan/tracker.hpp"
#include "pcdan/training.hpp"

namespace pcdan::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct SynthFlags {
  std::string out;
  std::string config;
  std::string name;
  std::size_t objects = 3;
  std::size_t frames = 20;
  std::uint64_t seed = 0;
  std::size_t points = 200;
  std::vector<std::string> leave;
  std::vector<std::size_t> enter;
  double noise_sigma = 0.0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  double fp_conf_min = 0.0;
  double fp_conf_max = 0.4;
};

struct TrainFlags {
  std::vector<std::string> seqs;
  std::string out;
  std::string init;
  std::string log;
  TrainConfig cfg;
  std::optional<std::size_t> threads;
};

struct TrackFlags {
  std::string seq;
  std::string weights;
  std::string out;
  TrackerConfig cfg;
  std::optional<std::size_t> threads;
};

struct EvalFlags {
  std::string gt;
  std::string pred;
  double radius = kDefaultMatchRadius;
  double seconds_per_frame = 0.0;
};

struct LossCheckFlags {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  double corrupt = 0.0;
};

int cmd_synth(const SynthFlags& f, const CLI::App& sub, std::ostream& out) {
  SynthConfig cfg;
  if (!f.config.empty()) {
    std::istringstream in(binary::read_file(f.config));
    cfg = parse_synth_config(in, f.config);
  }
  if (sub.count("--objects") || f.config.empty()) cfg.n_objects = f.objects;
  if (sub.count("--frames") || f.config.empty()) cfg.n_frames = f.frames;
  if (sub.count("--seed") || f.config.empty()) cfg.seed = f.seed;
  if (sub.count("--points") || f.config.empty()) cfg.points_per_object = f.points;
  if (sub.count("--name")) cfg.name = f.name;
  for (const std::string& l : f.leave) apply_synth_setting(cfg, "leave", l);
  for (const std::size_t e : f.enter) cfg.events.push_back({SynthEvent::Kind::Enter, e, 0});

  const SequenceSource src = generate(cfg, f.out);
  PerturbConfig noise;
  noise.det_noise_sigma = f.noise_sigma;
  noise.fp_rate = f.fp_rate;
  noise.fn_rate = f.fn_rate;
  noise.fp_conf_min = f.fp_conf_min;
  noise.fp_conf_max = f.fp_conf_max;
  noise.seed = cfg.seed;
  noise.arena_min = cfg.arena_min;
  noise.arena_max = cfg.arena_max;
  if (!noise.is_identity()) {
    perturb(src, noise, f.out);
  }
  out << fmt::format("wrote {} frames to {}\n", src.frame_count(), f.out);
  return kExitOk;
}

int cmd_train(TrainFlags f, std::ostream& out) {
  f.cfg.threads = resolve_threads(f.threads);
  std::vector<SequenceSource> sources;
  for (const std::string& s : f.seqs) {
    sources.push_back(SequenceSource::open(s, f.cfg.ingest));
  }
  ModelWeights init = f.init.empty() ? initial_model(f.cfg.seed) : load_model(f.init);

  std::ofstream log_file;
  std::ostream* log = &out;
  if (!f.log.empty()) {
    if (fs::path(f.log).has_parent_path()) fs::create_directories(fs::path(f.log).parent_path());
    log_file.open(f.log, std::ios::trunc);
    if (!log_file) throw Error("cannot write loss log " + f.log);
    log = &log_file;
  }
  const ModelWeights trained = train(sources, f.cfg, std::move(init), log);
  save_model(trained, f.out);
  return kExitOk;
}

int cmd_track(TrackFlags f, std::ostream& out) {
  f.cfg.threads = resolve_threads(f.threads);
  const SequenceSource src = SequenceSource::open(f.seq, f.cfg.ingest);
  const ModelWeights model = load_model(f.weights);
  const TrackingResult result = track_sequence(src, model, f.cfg);
  binary::write_file(f.out, format_track_csv(tracking_rows(result)));
  out << fmt::format("frames={} tracks={} mean_seconds_per_frame={}\n", src.frame_count(),
                     result.tracks.tracks.size(), result.seconds_per_frame);
  return kExitOk;
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  std::vector<TrackRow> gt;
  std::optional<FrameRange> range;
  if (fs::is_directory(f.gt)) {
    const SequenceSource src = SequenceSource::open(f.gt);
    gt = ground_truth_rows(src);
    if (src.frame_count() > 0) {
      range = FrameRange{0, src.frame_count() - 1};
    }
  } else {
    gt = read_track_csv(f.gt);
  }
  const std::vector<TrackRow> pred = read_track_csv(f.pred);
  MotReport report;
  try {
    report = evaluate(gt, pred, f.radius, range);
  } catch (const InvalidArgument& e) {
    // Inputs that disagree on the frame range are a data problem, not a usage error.
    throw DataError(e.what());
  }
  report.seconds_per_frame = f.seconds_per_frame;
  out << format_report_table(report);
  out << report_to_json(report).dump() << '\n';
  return kExitOk;
}

int cmd_losscheck(const LossCheckFlags& f, std::ostream& out) {
  LossCheckOptions opts;
  opts.trials = f.trials;
  opts.seed = f.seed;
  opts.corruption = f.corrupt;
  return run_losscheck(opts, out) ? kExitOk : kExitRuntime;
}

void add_ingest_flags(CLI::App* sub, IngestConfig& cfg) {
  sub->add_option("--conf-threshold", cfg.confidence_threshold,
                  "Keep detections with confidence strictly above this")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--max-objects", cfg.max_objects, "Per-frame object capacity")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point-cloud affinity tracker: synthetic data, training, tracking, evaluation"};
  app.name("pcdan");
  app.require_subcommand(1);

  SynthFlags synth;
  auto* s = app.add_subcommand("synth", "Generate a labelled synthetic sequence");
  s->add_option("--out", synth.out, "Output sequence directory")->required();
  s->add_option("--config", synth.config, "key=value configuration file");
  s->add_option("--objects", synth.objects, "Objects present from frame 0")->capture_default_str();
  s->add_option("--frames", synth.frames, "Number of frames")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--points", synth.points, "Surface points per object")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--name", synth.name, "Sequence name");
  s->add_option("--leave", synth.leave, "Object leaves: <frame>:<gt_id> (repeatable)");
  s->add_option("--enter", synth.enter, "New object enters at <frame> (repeatable)");
  s->add_option("--noise-sigma", synth.noise_sigma, "Gaussian jitter of box centers (m)")->check(CLI::NonNegativeNumber);
  s->add_option("--fp-rate", synth.fp_rate, "False boxes injected per true detection")->check(CLI::Range(0.0, 1.0));
  s->add_option("--fn-rate", synth.fn_rate, "Probability of dropping a true detection")->check(CLI::Range(0.0, 1.0));
  s->add_option("--fp-conf-min", synth.fp_conf_min, "Lowest false-box confidence")->check(CLI::Range(0.0, 1.0));
  s->add_option("--fp-conf-max", synth.fp_conf_max, "Upper bound of false-box confidence")->check(CLI::Range(0.0, 1.0));

  TrainFlags train_flags;
  auto* t = app.add_subcommand("train", "Fit the compression network on labelled sequences");
  t->add_option("--seq", train_flags.seqs, "Training sequence directory (repeatable)")->required();
  t->add_option("--out", train_flags.out, "Output weights file")->required();
  t->add_option("--init", train_flags.init, "Start from this weights file instead of a seeded init");
  t->add_option("--log", train_flags.log, "Loss log CSV (default: stdout)");
  t->add_option("--steps", train_flags.cfg.steps, "Gradient steps")->capture_default_str();
  t->add_option("--lr", train_flags.cfg.learning_rate, "Learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  t->add_option("--batch", train_flags.cfg.batch_pairs, "Frame pairs per step")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--seed", train_flags.cfg.seed, "Random seed")->capture_default_str();
  t->add_option("--gap-min", train_flags.cfg.gap_min, "Smallest frame gap")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--gap-max", train_flags.cfg.gap_max, "Largest frame gap")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--points", train_flags.cfg.points_per_object, "Points per cropped object")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--threads", train_flags.threads, "Worker threads (default: PCDAN_THREADS or all cores)")->check(CLI::PositiveNumber);
  add_ingest_flags(t, train_flags.cfg.ingest);

  TrackFlags track;
  auto* k = app.add_subcommand("track", "Track a sequence with trained weights");
  k->add_option("--seq", track.seq, "Sequence directory")->required();
  k->add_option("--weights", track.weights, "Weights file")->required();
  k->add_option("--out", track.out, "Output track CSV")->required();
  k->add_option("--birth-threshold", track.cfg.birth_threshold, "Minimum fused score to link")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  k->add_option("--points", track.cfg.points_per_object, "Points per cropped object")->check(CLI::PositiveNumber)->capture_default_str();
  k->add_option("--seed", track.cfg.seed, "Crop sampling seed")->capture_default_str();
  k->add_option("--threads", track.threads, "Worker threads (default: PCDAN_THREADS or all cores)")->check(CLI::PositiveNumber);
  add_ingest_flags(k, track.cfg.ingest);

  EvalFlags eval;
  auto* e = app.add_subcommand("eval", "CLEAR-MOT evaluation of predicted tracks");
  e->add_option("--gt", eval.gt, "Ground truth: labelled sequence directory or track CSV")->required();
  e->add_option("--pred", eval.pred, "Predicted track CSV")->required();
  e->add_option("--radius", eval.radius, "Center-distance gate (m)")->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--seconds-per-frame", eval.seconds_per_frame, "Tracker timing to include in the report")->check(CLI::NonNegativeNumber);

  LossCheckFlags lc;
  auto* l = app.add_subcommand("losscheck", "Verify loss identities and analytic gradients");
  l->add_option("--trials", lc.trials, "Random instances")->check(CLI::PositiveNumber)->capture_default_str();
  l->add_option("--seed", lc.seed, "Random seed")->capture_default_str();
  l->add_option("--corrupt-gradient", lc.corrupt, "Offset added to one analytic gradient entry")->group("");

  std::vector<std::string> argv_store{"pcdan"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    const CLI::App* failing = &app;
    for (const CLI::App* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, *s, out);
    if (t->parsed()) return cmd_train(std::move(train_flags), out);
    if (k->parsed()) return cmd_track(std::move(track), out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (l->parsed()) return cmd_losscheck(lc, out);
  } catch (const InvalidArgument& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace pcdan::cli
