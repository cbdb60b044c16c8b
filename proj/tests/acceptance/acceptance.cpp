// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <fmt/format.h>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "pcdan/affinity.hpp"
#include "pcdan/association.hpp"
#include "pcdan/featurizer.hpp"
#include "pcdan/hungarian.hpp"
#include "pcdan/ingestion.hpp"
#include "pcdan/losscheck.hpp"
#include "pcdan/losses.hpp"
#include "pcdan/metrics.hpp"
#include "pcdan/track_table.hpp"
#include "test_support.hpp"

namespace pcdan {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Eigen::Index;
using Eigen::MatrixXd;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

// ---------------------------------------------------------------- helpers

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string tool() { return PCDAN_TOOL_PATH; }

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// Runs the tool, stdout to `out` (if given), stderr to a log; returns exit code.
int pcdan(const std::string& args, const fs::path& out = {}, const std::string& env = {}) {
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += quote(tool()) + " " + args;
  cmd += out.empty() ? " >/dev/null" : " >" + quote(out);
  cmd += " 2>>" + quote(fs::temp_directory_path() / "pcdan_acceptance_stderr.log");
  return shell(cmd);
}

bool mota_consistent(const MotReport& r) {
  const double recomputed = 1.0 - static_cast<double>(r.false_neg + r.false_pos + r.id_switches) /
                                      static_cast<double>(r.gt_count);
  return std::abs(recomputed - r.mota) <= 1e-12;
}

// Reports parsed from `eval` output (last line is the JSON object).
std::vector<MotReport> g_reports;

std::optional<MotReport> eval_cli(const fs::path& gt, const fs::path& pred, const fs::path& out) {
  if (pcdan(fmt::format("eval --gt {} --pred {} --radius 1.0", quote(gt), quote(pred)), out) != 0) {
    return std::nullopt;
  }
  std::istringstream lines(testing::slurp(out));
  std::string line, last;
  while (std::getline(lines, line)) {
    if (!line.empty()) last = line;
  }
  MotReport r = report_from_json(nlohmann::json::parse(last));
  g_reports.push_back(r);
  return r;
}

// ------------------------------------------------------- criterion 1: gradients

double relative(double a, double n) {
  const double scale = std::max(std::abs(a), std::abs(n));
  return scale == 0.0 ? 0.0 : std::abs(a - n) / scale;
}

Verdict gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  const double h = 1e-5;
  const int instances = 25;
  double worst = 0.0;
  std::size_t largest = 0;
  for (int k = 0; k < instances; ++k) {
    const LossInstance inst = random_loss_instance(rng, 8);
    const GroundTruthAssignment& gt = inst.gt;
    largest = std::max(largest, gt.capacity());
    const MatrixXd m1 = append_dummy_column(inst.m, inst.dummy_score);
    const MatrixXd m2 = append_dummy_row(inst.m, inst.dummy_score);
    const LossGradients g = loss_gradients(m1, m2, gt);
    for (Index i = 0; i < m1.rows(); ++i) {
      for (Index j = 0; j < m1.cols(); ++j) {
        MatrixXd up = m1, down = m1;
        up(i, j) += h;
        down(i, j) -= h;
        const double fd = (loss_from_augmented(up, m2, gt).total - loss_from_augmented(down, m2, gt).total) / (2 * h);
        worst = std::max(worst, relative(g.d_m1(i, j), fd));
      }
    }
    for (Index i = 0; i < m2.rows(); ++i) {
      for (Index j = 0; j < m2.cols(); ++j) {
        MatrixXd up = m2, down = m2;
        up(i, j) += h;
        down(i, j) -= h;
        const double fd = (loss_from_augmented(m1, up, gt).total - loss_from_augmented(m1, down, gt).total) / (2 * h);
        worst = std::max(worst, relative(g.d_m2(i, j), fd));
      }
    }
    const LossGradients shared = loss_gradients(inst.m, inst.dummy_score, gt);
    auto at = [&](double d) {
      return loss_from_augmented(append_dummy_column(inst.m, d), append_dummy_row(inst.m, d), gt).total;
    };
    const double fd = (at(inst.dummy_score + h) - at(inst.dummy_score - h)) / (2 * h);
    worst = std::max(worst, relative(shared.d_dummy, fd));
  }
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = worst < 1e-4 && elapsed < 10.0 && instances >= 20;
  v.detail = fmt::format("instances={} max_capacity={} max_rel_err={:.3e} (<1e-4) time={:.2f}s (<10s)",
                         instances, largest, worst, elapsed);
  return v;
}

// -------------------------------------------------- criterion 2: loss identities

Verdict loss_identities() {
  std::mt19937_64 rng(7);
  double worst_perfect = 0.0;
  for (int k = 0; k < 100; ++k) {
    const LossInstance inst = random_loss_instance(rng, 8);
    const GroundTruthAssignment& gt = inst.gt;
    // Logits that put probability 1 (in double precision) on every ground-truth cell.
    MatrixXd m = MatrixXd::Constant(gt.g3.rows(), gt.g3.cols(), -800.0);
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (gt.g3(i, j) == 1.0) m(i, j) = 800.0;
      }
    }
    const LossBreakdown l = compute_losses(augment_and_softmax(m, gt.count_prev, gt.count_cur, 0.0), gt);
    worst_perfect = std::max({worst_perfect, l.l_f, l.l_b, l.l_c, l.l_a, l.total});
    worst_perfect = std::max({worst_perfect, loss_forward(gt.g1, gt.g1), loss_backward(gt.g2, gt.g2),
                              loss_assemble(gt.g3, gt.g3, gt.g3)});
  }
  // N_m = 100: one ground-truth match against a uniform row of 101 entries.
  const AffinityMatrices uniform = augment_and_softmax(MatrixXd::Zero(100, 100), 100, 100, 0.0);
  MatrixXd g1 = MatrixXd::Zero(100, 101);
  g1(0, 0) = 1.0;
  const double l_f = loss_forward(g1, uniform.a1);
  const double ln101 = std::log(101.0);
  Verdict v;
  v.pass = worst_perfect <= 1e-12 && std::abs(l_f - ln101) <= 1e-9;
  v.detail = fmt::format("perfect max_loss={:.3e} (<=1e-12) uniform L_f={:.12f} ln(101)={:.12f} |diff|={:.3e} (<=1e-9)",
                         worst_perfect, l_f, ln101, std::abs(l_f - ln101));
  return v;
}

// ------------------------------------------------ criterion 3: softmax contracts

Verdict softmax_contracts() {
  std::mt19937_64 rng(11);
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t cap = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const std::size_t np = std::uniform_int_distribution<std::size_t>(1, cap)(rng);
    const std::size_t nc = std::uniform_int_distribution<std::size_t>(1, cap)(rng);
    const MatrixXd m = testing::random_matrix(rng, static_cast<Index>(cap), static_cast<Index>(cap), -30, 30);
    const double dummy = std::uniform_real_distribution<double>(-5, 5)(rng);
    const AffinityMatrices a = augment_and_softmax(m, np, nc, dummy);
    for (Index i = 0; i < static_cast<Index>(np); ++i) worst_sum = std::max(worst_sum, std::abs(a.a1.row(i).sum() - 1.0));
    for (Index j = 0; j < static_cast<Index>(nc); ++j) worst_sum = std::max(worst_sum, std::abs(a.a2.col(j).sum() - 1.0));
    const double c = std::uniform_real_distribution<double>(-100, 100)(rng);
    const AffinityMatrices s = augment_and_softmax((m.array() + c).matrix(), np, nc, dummy + c);
    worst_shift = std::max({worst_shift, (s.a1 - a.a1).cwiseAbs().maxCoeff(), (s.a2 - a.a2).cwiseAbs().maxCoeff()});
  }
  Verdict v;
  v.pass = worst_sum <= 1e-9 && worst_shift <= 1e-12;
  v.detail = fmt::format("matrices=1000 max|sum-1|={:.3e} (<=1e-9) max_shift_diff={:.3e} (<=1e-12)",
                         worst_sum, worst_shift);
  return v;
}

// -------------------------------------------- criterion 4: assignment optimality

double brute_max_partial(const MatrixXd& s, double threshold, Index row, std::vector<bool>& used) {
  if (row == s.rows()) return 0.0;
  double best = brute_max_partial(s, threshold, row + 1, used);
  const Index leave = s.cols() - 1;
  for (Index j = 0; j < leave; ++j) {
    if (used[static_cast<std::size_t>(j)] || !(s(row, j) > s(row, leave) && s(row, j) > threshold)) continue;
    used[static_cast<std::size_t>(j)] = true;
    best = std::max(best, s(row, j) + brute_max_partial(s, threshold, row + 1, used));
    used[static_cast<std::size_t>(j)] = false;
  }
  return best;
}

double brute_min_full(const MatrixXd& c) {
  const MatrixXd m = c.rows() > c.cols() ? MatrixXd(c.transpose()) : c;
  std::vector<Index> cols(static_cast<std::size_t>(m.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  double best = INFINITY;
  do {
    double t = 0.0;
    for (Index r = 0; r < m.rows(); ++r) t += m(r, cols[static_cast<std::size_t>(r)]);
    best = std::min(best, t);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

Verdict assignment_optimality() {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<Index> dim(1, 7);
  double worst = 0.0;
  double solver_seconds = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Index np = dim(rng), nc = dim(rng);
    // Score matrices shaped like the tracker's: probabilities plus a leave column.
    const MatrixXd s = testing::random_matrix(rng, np, nc + 1, 0.0, 1.0);
    const MatrixXd cost = testing::random_matrix(rng, np, nc, -10.0, 10.0);
    auto t0 = Clock::now();
    const AssignmentResult r = solve_assignment(s, kDefaultBirthThreshold);
    const std::vector<int> a = solve_min_cost_assignment(cost);
    solver_seconds += seconds_since(t0);

    std::vector<bool> used(static_cast<std::size_t>(nc), false);
    worst = std::max(worst, std::abs(r.total_score - brute_max_partial(s, kDefaultBirthThreshold, 0, used)));
    double total = 0.0;
    for (Index i = 0; i < np; ++i) {
      if (a[static_cast<std::size_t>(i)] >= 0) total += cost(i, a[static_cast<std::size_t>(i)]);
    }
    worst = std::max(worst, std::abs(total - brute_min_full(cost)));
  }
  Verdict v;
  v.pass = worst <= 1e-12 && solver_seconds < 5.0;
  v.detail = fmt::format("instances=200 (n<=7, gated partial + full rectangular) max|diff|={:.3e} (<=1e-12) solver_time={:.4f}s (<5s)",
                         worst, solver_seconds);
  return v;
}

// -------------------------------------------- criterion 5: permutation invariance

Verdict permutation_invariance() {
  std::mt19937_64 rng(17);
  const PointNetWeights w = PointNetWeights::random(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  int mismatches = 0;
  for (int obj = 0; obj < 100; ++obj) {
    ObjectPoints o;
    o.points.assign(kDefaultPointsPerObject, Point3{});
    o.valid_count = std::uniform_int_distribution<std::size_t>(1, kDefaultPointsPerObject)(rng);
    for (std::size_t i = 0; i < o.valid_count; ++i) o.points[i] = {u(rng), u(rng), u(rng)};
    const FeatureVec ref = pointnet_forward(o, w);
    for (int p = 0; p < 10; ++p) {
      ObjectPoints q = o;
      std::shuffle(q.points.begin(), q.points.begin() + static_cast<std::ptrdiff_t>(q.valid_count), rng);
      const FeatureVec f = pointnet_forward(q, w);
      mismatches += std::memcmp(f.data(), ref.data(), sizeof(double) * static_cast<std::size_t>(f.size())) != 0;
    }
  }
  Verdict v;
  v.pass = mismatches == 0;
  v.detail = fmt::format("objects=100 permutations=10 bitwise_mismatches={}", mismatches);
  return v;
}

// ------------------------------------------ shared scene set for criteria 6, 7, 9

struct Scenes {
  fs::path root;
  std::vector<fs::path> train;
  fs::path held_out;
  fs::path weights;
  fs::path tracks;
  double train_seconds = 0.0;
  bool ok = true;
  std::string error;
};

constexpr int kTrainSteps = 2000;

Scenes build_scenes(const fs::path& root) {
  Scenes s;
  s.root = root;
  for (int seed = 1; seed <= 3; ++seed) {
    const fs::path dir = root / fmt::format("train_{}", seed);
    if (pcdan(fmt::format("synth --out {} --objects 4 --frames 30 --seed {}", quote(dir), seed)) != 0) {
      s.ok = false;
      s.error = "synth (training) failed";
    }
    s.train.push_back(dir);
  }
  s.held_out = root / "held_out";
  if (pcdan(fmt::format("synth --out {} --objects 5 --frames 30 --seed 100 --leave 12:2 --enter 18",
                        quote(s.held_out))) != 0) {
    s.ok = false;
    s.error = "synth (held-out) failed";
  }
  s.weights = root / "weights.bin";
  std::string seqs;
  for (const fs::path& p : s.train) seqs += " --seq " + quote(p);
  const auto t0 = Clock::now();
  if (pcdan(fmt::format("train{} --out {} --steps {} --seed 1 --log {}", seqs, quote(s.weights),
                        kTrainSteps, quote(root / "loss.csv"))) != 0) {
    s.ok = false;
    s.error = "train failed";
  }
  s.train_seconds = seconds_since(t0);
  s.tracks = root / "tracks.csv";
  if (pcdan(fmt::format("track --seq {} --weights {} --out {}", quote(s.held_out), quote(s.weights),
                        quote(s.tracks))) != 0) {
    s.ok = false;
    s.error = "track failed";
  }
  return s;
}

// -------------------------------------------------- criterion 6: end to end

Verdict end_to_end(const Scenes& s) {
  Verdict v;
  if (!s.ok) return {false, s.error};
  const auto r = eval_cli(s.held_out, s.tracks, s.root / "eval.txt");
  if (!r) return {false, "eval failed"};
  v.pass = r->mota >= 0.90 && r->id_switches <= 2 && s.train_seconds < 300.0;
  v.detail = fmt::format("train_steps={} train_time={:.1f}s (<300s) MOTA={:.4f} (>=0.90) IDS={} (<=2) FP={} FN={} GT={}",
                         kTrainSteps, s.train_seconds, r->mota, r->id_switches, r->false_pos,
                         r->false_neg, r->gt_count);
  return v;
}

// ------------------------------------------------ criterion 7: confidence filter

Verdict confidence_filter(const Scenes& s) {
  if (!s.ok) return {false, s.error};
  const std::string clean = testing::slurp(s.tracks);
  // Two noisy variants of the held-out scene: confidences drawn below 0.4,
  // and every injected box at exactly 0.4.
  const std::vector<std::pair<std::string, std::string>> variants = {
      {"fp_below", "--fp-rate 1.0"},
      {"fp_at_threshold", "--fp-rate 1.0 --fp-conf-min 0.4 --fp-conf-max 0.4"}};
  int identical = 0;
  std::size_t injected = 0;
  for (const auto& [name, flags] : variants) {
    const fs::path dir = s.root / name;
    if (pcdan(fmt::format("synth --out {} --objects 5 --frames 30 --seed 100 --leave 12:2 --enter 18 {}",
                          quote(dir), flags)) != 0) {
      return {false, "synth with false positives failed"};
    }
    const SequenceSource src = SequenceSource::open(dir);
    for (std::size_t f = 0; f < src.frame_count(); ++f) {
      for (const Detection& d : src.load_frame(f).detections) {
        if (!d.gt_id) {
          ++injected;
          if (d.confidence > 0.4) return {false, "an injected box exceeds confidence 0.4"};
        }
      }
    }
    const fs::path out = s.root / (name + ".csv");
    if (pcdan(fmt::format("track --seq {} --weights {} --out {}", quote(dir), quote(s.weights), quote(out))) != 0) {
      return {false, "track on noisy scene failed"};
    }
    identical += testing::slurp(out) == clean;
  }
  Verdict v;
  v.pass = identical == static_cast<int>(variants.size()) && injected > 0;
  v.detail = fmt::format("injected_boxes={} variants={} bitwise_identical={}", injected, variants.size(), identical);
  return v;
}

// ---------------------------------------------------- criterion 8: MOTA identity

TrackRow at(std::size_t frame, std::uint32_t id, double x) {
  TrackRow r;
  r.frame = frame;
  r.track_id = id;
  r.box.center = {x, 0.0, 0.0};
  return r;
}

Verdict mota_consistency() {
  // Two ground-truth tracks 5 m apart over three frames; the predicted ids
  // swap at frame 2.
  const std::vector<TrackRow> gt = {at(0, 1, 0), at(0, 2, 5), at(1, 1, 0), at(1, 2, 5), at(2, 1, 0), at(2, 2, 5)};
  const std::vector<TrackRow> pred = {at(0, 7, 0), at(0, 8, 5), at(1, 7, 0), at(1, 8, 5), at(2, 8, 0), at(2, 7, 5)};
  const MotReport swap = evaluate(gt, pred);
  g_reports.push_back(swap);

  // Random noisy predictions add coverage of the identity.
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 0.6);
  for (int k = 0; k < 300; ++k) {
    std::vector<TrackRow> g, p;
    const std::size_t frames = 3 + k % 15;
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::uint32_t id = 0; id < 1 + k % 5; ++id) {
        g.push_back(at(f, id, 8.0 * id));
        if (std::bernoulli_distribution(0.9)(rng)) {
          p.push_back(at(f, id + (std::bernoulli_distribution(0.1)(rng) ? 40u : 0u), 8.0 * id + noise(rng)));
        }
      }
      if (std::bernoulli_distribution(0.3)(rng)) p.push_back(at(f, 500 + static_cast<std::uint32_t>(f), -30.0));
    }
    g_reports.push_back(evaluate(g, p, 1.0, FrameRange{0, frames - 1}));
  }
  std::size_t inconsistent = 0;
  for (const MotReport& r : g_reports) inconsistent += !mota_consistent(r);
  Verdict v;
  v.pass = inconsistent == 0 && swap.id_switches == 2 && swap.false_pos == 0 && swap.false_neg == 0 &&
           std::abs(swap.mota - 2.0 / 3.0) <= 1e-15;
  v.detail = fmt::format("reports_checked={} inconsistent={} swap_case IDS={} MOTA={:.17g} (2/3={:.17g})",
                         g_reports.size(), inconsistent, swap.id_switches, swap.mota, 2.0 / 3.0);
  return v;
}

// -------------------------------------------------------- criterion 9: determinism

Verdict determinism(const Scenes& s) {
  if (!s.ok) return {false, s.error};
  std::vector<std::string> failures;
  auto check = [&](bool same, const std::string& what) {
    if (!same) failures.push_back(what);
  };

  // synth: same seed twice, then under different thread settings.
  const fs::path a = s.root / "det_synth_a", b = s.root / "det_synth_b";
  const std::string synth_args = "synth --objects 5 --frames 30 --seed 100 --leave 12:2 --enter 18 --out ";
  check(pcdan(synth_args + quote(a)) == 0 && pcdan(synth_args + quote(b), {}, "PCDAN_THREADS=3") == 0, "synth ran");
  check(testing::tree_contents(a) == testing::tree_contents(b), "synth bytes");
  check(testing::tree_contents(a) == testing::tree_contents(s.held_out), "synth bytes vs first run");

  // train: shorter runs at 1, 2 and 8 threads, plus the environment fallback.
  std::string seqs;
  for (const fs::path& p : s.train) seqs += " --seq " + quote(p);
  std::vector<std::string> weights, logs;
  const std::vector<std::pair<std::string, std::string>> train_modes = {
      {"--threads 1", ""}, {"--threads 2", ""}, {"--threads 8", ""}, {"", "PCDAN_THREADS=5"}};
  for (std::size_t k = 0; k < train_modes.size(); ++k) {
    const fs::path w = s.root / fmt::format("det_w{}.bin", k);
    const fs::path l = s.root / fmt::format("det_l{}.csv", k);
    check(pcdan(fmt::format("train{} --out {} --steps 200 --seed 9 --log {} {}", seqs, quote(w), quote(l),
                            train_modes[k].first),
                {}, train_modes[k].second) == 0,
          "train ran");
    weights.push_back(testing::slurp(w));
    logs.push_back(testing::slurp(l));
  }
  for (std::size_t k = 1; k < weights.size(); ++k) {
    check(weights[k] == weights[0], "train weights");
    check(logs[k] == logs[0], "train loss log");
  }

  // track: the shared model under several thread settings and a rerun.
  const std::string clean = testing::slurp(s.tracks);
  const std::vector<std::pair<std::string, std::string>> track_modes = {
      {"--threads 1", ""}, {"--threads 4", ""}, {"", "PCDAN_THREADS=2"}, {"", ""}};
  for (std::size_t k = 0; k < track_modes.size(); ++k) {
    const fs::path out = s.root / fmt::format("det_t{}.csv", k);
    check(pcdan(fmt::format("track --seq {} --weights {} --out {} {}", quote(s.held_out), quote(s.weights),
                            quote(out), track_modes[k].first),
                {}, track_modes[k].second) == 0,
          "track ran");
    check(testing::slurp(out) == clean, "track csv");
  }
  Verdict v;
  v.pass = failures.empty();
  v.detail = failures.empty() ? "synth x3, train x4 (threads 1/2/8/env), track x5 (threads default/1/4/env): byte-identical"
                              : "differs: " + failures.front();
  return v;
}

}  // namespace
}  // namespace pcdan

int main() {
  using namespace pcdan;
  testing::TempDir work("acceptance");
  int failed = 0;
  auto report = [&](int id, const char* name, const Verdict& v) {
    std::cout << fmt::format("[{}] criterion {} {:<28} {}", v.pass ? "PASS" : "FAIL", id, name, v.detail)
              << std::endl;
    failed += !v.pass;
  };

  report(1, "gradient_correctness", gradient_check());
  report(2, "loss_identities", loss_identities());
  report(3, "softmax_contracts", softmax_contracts());
  report(4, "assignment_optimality", assignment_optimality());
  report(5, "permutation_invariance", permutation_invariance());
  const Scenes scenes = build_scenes(work.path());
  report(6, "end_to_end_tracking", end_to_end(scenes));
  report(7, "confidence_filter", confidence_filter(scenes));
  report(8, "mota_self_consistency", mota_consistency());
  report(9, "determinism", determinism(scenes));
  std::cout << fmt::format("{} of 9 criteria passed", 9 - failed) << std::endl;
  return failed == 0 ? 0 : 1;
}
