// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance <config.json> <scratch dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "orchestra/config.hpp"
#include "orchestra/jsonl.hpp"
#include "orchestra/pipeline.hpp"
#include "orchestra/training.hpp"

using namespace orchestra;
namespace fs = std::filesystem;

namespace {

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Line> lines;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  lines.push_back({id, name, pass, detail});
  std::printf("[%s] %d. %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

void gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  bool ok = true;
  for (LossKind kind : {LossKind::Sft, LossKind::Dpo, LossKind::Disc}) {
    const auto r = gradient_check(kind, 20, 1e-4);
    worst = std::max(worst, r.max_rel_error);
    ok = ok && r.passed;
  }
  const double secs = seconds_since(t0);
  report(1, "gradient fidelity", ok && secs < 60.0,
         fmt("max relative error %.2e over 3x20 trials (bound 1e-4), %.1fs (bound 60s)", worst, secs));
}

void dpo_identity(const RunConfig& config) {
  const Environment env = make_environment(config);
  const Vocabulary vocab(env.registry());
  const PolicyModel model = init_model(vocab, config.orchestrator, 1);
  const FrozenPolicy ref = snapshot_reference(model);
  const auto instrs = oracle::small_instructions(10, 1);
  const auto pool = env.registry().enumerate_calls();
  Rng rng(2);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto traj = [&] {
      std::vector<ToolCall> calls{{"init_room", std::nullopt}};
      const auto n = rng.uniform_int(0, 8);
      for (int k = 0; k < n; ++k) calls.push_back(pool[rng.index(pool.size())]);
      return encode_trajectory(vocab, calls);
    };
    const std::vector<DpoTriplet> one{{encode_context(vocab, instrs[rng.index(instrs.size())]), traj(),
                                       traj(), ExampleKind::Trajectory, 0.0, "x"}};
    worst = std::max(worst, std::abs(dpo_loss_and_grad(model, *ref, one, 0.1).loss - std::log(2.0)));
  }
  report(2, "DPO identity", worst <= 1e-9,
         fmt("max |loss - ln 2| = %.2e over 100 triplets (bound 1e-9)", worst));
}

void curation_oracles() {
  std::string first_error;
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::string err = oracle::check_builders(seed, 100);
    if (err.empty())
      ++ok;
    else if (first_error.empty())
      first_error = fmt("seed %d: ", static_cast<int>(seed)) + err;
  }
  report(3, "curation oracle equivalence", ok == 10,
         fmt("%d/10 seeds match on all five builders (100 rollouts, boundary thresholds included)", ok) +
             (first_error.empty() ? "" : "; " + first_error));
}

void determinism(const RunConfig& base, const fs::path& root) {
  PipelineOptions opts;
  opts.write_files = true;
  RunConfig a = base, b = base;
  a.output_dir = root / "det-a";
  b.output_dir = root / "det-b";
  fs::remove_all(a.output_dir);
  fs::remove_all(b.output_dir);
  run_pipeline(a, opts);
  run_pipeline(b, opts);
  const auto ta = read_tree(a.output_dir), tb = read_tree(b.output_dir);
  std::size_t differing = 0, checkpoints = 0, datasets = 0, evals = 0;
  for (const auto& [name, bytes] : ta) {
    auto it = tb.find(name);
    if (it == tb.end() || it->second != bytes) ++differing;
    checkpoints += name.rfind("checkpoints", 0) == 0;
    datasets += name.rfind("data", 0) == 0;
    evals += name.rfind("eval", 0) == 0;
  }
  const bool ok = differing == 0 && ta.size() == tb.size() && checkpoints > 0 && datasets > 0 && evals > 0;
  report(4, "determinism", ok,
         fmt("%zu files (%zu datasets, %zu checkpoints, %zu eval) compared, %zu differ", ta.size(),
             datasets, checkpoints, evals, differing));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <config.json> <scratch dir>\n");
    return 2;
  }
  const RunConfig config = load_run_config(argv[1]);
  const fs::path root = argv[2];
  fs::create_directories(root);
  const auto& seeds = config.ablation_seeds;
  if (seeds.size() < 5) {
    std::fprintf(stderr, "config must list at least five ablation seeds\n");
    return 2;
  }

  gradient_fidelity();
  dpo_identity(config);
  curation_oracles();

  RunConfig first = config;
  first.seed = seeds[0];
  determinism(first, root);

  std::vector<PipelineResult> runs;
  for (std::size_t i = 0; i < 5; ++i) {
    RunConfig c = config;
    c.seed = seeds[i];
    c.output_dir = root / ("seed-" + std::to_string(seeds[i]));
    fs::remove_all(c.output_dir);
    PipelineOptions opts;
    opts.ablation = true;
    runs.push_back(run_pipeline(c, opts));
    std::printf("  seed %llu: composition ours %.3f baseline %.3f, runtime ratio %.3f, %zu retried, %.1fs\n",
                static_cast<unsigned long long>(seeds[i]), runs.back().ours.mean.composition,
                runs.back().baseline.mean.composition, runs.back().runtime_ratio,
                runs.back().ours.retries, runs.back().wall_seconds);
    std::fflush(stdout);
  }

  {
    int wins = 0;
    double slowest = 0;
    std::size_t min_test = SIZE_MAX;
    bool unseen = true;
    std::string ratios;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& r = runs[i];
      const double ratio = r.ours.mean.composition / r.baseline.mean.composition;
      wins += ratio >= 1.10;
      slowest = std::max(slowest, r.wall_seconds);
      min_test = std::min(min_test, r.ours.rows.size());
      bool has_unseen = false;
      for (const auto& in : r.splits.test)
        for (const auto& room : unseen_room_types()) has_unseen = has_unseen || in.room_type == room;
      unseen = unseen && has_unseen;
      ratios += fmt("%s%.3f", i ? ", " : "", ratio);
    }
    report(5, "learning effect", wins >= 2 && min_test >= 50 && unseen && slowest <= 1800.0,
           fmt("composition ratio vs baseline [%s] (>=1.10 on %d/3 seeds, need 2); %zu test "
               "instructions incl. unseen rooms; slowest pipeline %.0fs (bound 1800s)",
               ratios.c_str(), wins, min_test, slowest));
  }

  {
    double mean_ratio = 0;
    for (const auto& r : runs) mean_ratio += r.runtime_ratio / static_cast<double>(runs.size());
    const Environment env = make_environment(first);
    double worst = 0;
    std::size_t reviews = 0;
    for (const auto& in : runs[0].splits.test) {
      const Rollout r = run_heuristic(env, in, first.rollout, derive_seed(first.seed, "review-check"));
      const Rollout s = strip_reviews(env, in, r);
      std::size_t k = 0;
      for (const auto& st : r.steps) k += st.call.tool == tools::kReview;
      reviews += k;
      worst = std::max(worst, std::abs((r.steps.back().t_cum - s.steps.back().t_cum) - 2.5 * k));
      worst = std::max(worst, std::abs(r.steps.back().q.q_total - s.steps.back().q.q_total));
    }
    report(6, "runtime reduction", mean_ratio <= 0.5 && worst <= 1e-9,
           fmt("one-shot / baseline mean runtime %.3f over %zu seeds (bound 0.50); review removal "
               "exact to %.1e over %zu reviews",
               mean_ratio, runs.size(), worst, reviews));
  }

  {
    double acc_sum = 0;
    std::string accs;
    std::size_t sets = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      RunConfig c = config;
      c.seed = seeds[i];
      const Environment env = make_environment(c);
      const Vocabulary vocab(env.registry());
      const auto& test = runs[i].splits.test;
      const DiscScorer disc =
          load_disc(root / ("seed-" + std::to_string(seeds[i])) / "checkpoints/disc-sft.json", vocab);
      const std::uint64_t s = derive_seed(c.seed, "heldout-disc");
      const auto rollouts = collect_rollouts(env, test, c.rollouts_per_instruction, s, c.rollout);
      const CurationContext ctx(vocab, env, test);
      const auto data = build_disc_data(ctx, rollouts, 4, s).examples;
      std::size_t hits = 0;
      for (const auto& ex : data)
        hits += static_cast<int>(disc_select(disc, ex.context, ex.candidates)) == ex.label;
      const double acc = data.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
      acc_sum += acc / 3.0;
      sets += data.size();
      accs += fmt("%s%.3f", i ? ", " : "", acc);
    }
    report(7, "discriminator skill", acc_sum >= 0.60,
           fmt("held-out top-1 at k=4 [%s], mean %.3f over %zu sets (bound 0.60, chance 0.25)",
               accs.c_str(), acc_sum, sets));
  }

  {
    std::map<std::string, double> mean;
    bool order = true;
    for (const auto& r : runs) {
      order = order && r.ablation.size() == kAblationRows.size();
      for (std::size_t k = 0; k < r.ablation.size() && k < kAblationRows.size(); ++k) {
        order = order && r.ablation[k].setting == kAblationRows[k];
        mean[r.ablation[k].setting] += r.ablation[k].report.mean.composition / static_cast<double>(runs.size());
      }
    }
    const double full = mean["Full"], indep = mean["Indep. only"], wo_dpo = mean["w/o DPO"];
    const bool ok = order && full >= 0.98 * indep && indep >= 0.98 * wo_dpo;
    report(8, "ablation ordering", ok,
           fmt("mean composition over %zu seeds: w/o DPO %.3f, w/o Stepwise %.3f, w/o Disc %.3f, "
               "Indep. only %.3f, Full %.3f; Full >= Indep. >= w/o DPO within 2%%; table order %s",
               runs.size(), wo_dpo, mean["w/o Stepwise"], mean["w/o Discriminator"], indep, full,
               order ? "ok" : "wrong"));
    std::printf("%s", format_ablation(runs[0].ablation).c_str());
  }

  {
    bool ok = true;
    std::string parts;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& rows = runs[i].ours.rows;
      std::size_t clean = 0;
      for (const auto& r : rows) clean += !r.retried;
      const double frac = rows.empty() ? 0.0 : static_cast<double>(clean) / static_cast<double>(rows.size());
      ok = ok && rows.size() >= 100 && frac >= 0.95;
      parts += fmt("%s%zu/%zu", i ? ", " : "", clean, rows.size());
    }
    report(9, "invalid-generation handling", ok,
           fmt("generations executed without retry per seed [%s] (bound 95%% of >=100)", parts.c_str()));
  }

  int failed = 0;
  for (const auto& l : lines) failed += !l.pass;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(lines.size()) - failed, lines.size());
  return failed == 0 ? 0 : 1;
}
