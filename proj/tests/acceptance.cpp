// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "msmix/cli.hpp"
#include "test_util.hpp"

using namespace msmix;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kSeeds = 5;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << std::fixed << x;
  return o.str();
}

/// Default synthetic data and training seed for paired run `s`.
Dataset paired_data(std::size_t s) {
  SynthConfig c;
  c.seed = 1000 + s;
  return generate(c);
}

TrainConfig paired_config(std::size_t s, AugmentMode mode) {
  TrainConfig c;
  c.seed = s;
  c.mode = mode;
  return c;
}

// ---------------------------------------------------------------------------

/// Reference augmentation step: similarity, eligibility, intensities, weights,
/// ratios and mixed samples by scalar loops; pair draws and base ratios are
/// taken from the library so both sides mix the same pairs.
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t mismatched_pools = 0, mixed_pairs = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, SeedStream::augment));
    const std::size_t b = 4, d = 6;
    const FullBatch batch = testing::random_batch(b, d, rng);
    const Vector labels = testing::random_vector(b, rng, -3, 3);
    PerModality<IntensityPredictorParams> preds;
    for (auto &p : preds)
      p = testing::random_predictor(d, 1 + seed % 3, rng);
    const double delta = -0.2 + 0.02 * static_cast<double>(seed);

    const SimilarityReport sim = similarity_matrix(batch, delta);
    const PairSelection sel = select_pairs(sim, b, rng);
    PerModality<IntensityOutput> outs;
    for (std::size_t m = 0; m < kNumModalities; ++m)
      outs[m] = make_intensity_output(predict_intensity(preds[m], batch[m]));
    const MixPlan plan = build_mix_plan(sel, outs, rng);
    const MixedBatch mixed = apply_mix_plan(plan, batch, labels);

    std::vector<ref::Rows> z;
    for (const auto &mb : batch)
      z.push_back(ref::to_rows(mb.features));
    const ref::Rows s = ref::similarity(z);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j)
        worst = std::max(worst, std::abs(s[i][j] - sim.similarity(i, j)));
    worst = std::max(worst, std::abs(ref::mean_offdiag(s) - sim.mean_offdiag));
    const auto pool = ref::eligible(s, delta);
    const auto lib_pool = eligible_pairs(sim);
    bool same_pool = pool.size() == lib_pool.size();
    for (std::size_t k = 0; same_pool && k < pool.size(); ++k)
      same_pool = pool[k].first == lib_pool[k].i && pool[k].second == lib_pool[k].j;
    mismatched_pools += !same_pool;
    if (pool.empty() != sel.skipped())
      ++mismatched_pools;
    for (const auto &pr : sel.pairs)
      if (std::find(pool.begin(), pool.end(), std::make_pair(pr.i, pr.j)) == pool.end())
        ++mismatched_pools;

    PerModality<std::vector<double>> w;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const auto in = ref::intensity(testing::to_reference(preds[m]), z[m]);
      for (std::size_t i = 0; i < b; ++i)
        worst = std::max(worst, std::abs(in[i] - outs[m].intensities[i]));
      w[m] = ref::weights(in);
      for (std::size_t i = 0; i < b; ++i)
        worst = std::max(worst, std::abs(w[m][i] - outs[m].weights[i]));
    }
    for (std::size_t p = 0; p < plan.size(); ++p) {
      const auto [i, j] = sel.pairs[p];
      double label_ratio = 0.0;
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        const double lam = ref::ratio(w[m][i], w[m][j], plan.lambda_base[p]);
        label_ratio += lam / 3.0;
        worst = std::max(worst, std::abs(lam - plan.ratios[m][p]));
        for (std::size_t c = 0; c < d; ++c) {
          const double expect = lam * z[m][i][c] + (1.0 - lam) * z[m][j][c];
          worst = std::max(worst, std::abs(expect - mixed.features[m](p, c)));
        }
      }
      worst = std::max(worst, std::abs(label_ratio - plan.label_ratio[p]));
      const double y = label_ratio * labels[i] + (1.0 - label_ratio) * labels[j];
      worst = std::max(worst, std::abs(y - mixed.labels[p]));
      ++mixed_pairs;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-10 && mismatched_pools == 0 && secs < 5.0,
          "max abs dev " + fmt(worst * 1e12, 3) + "e-12, pool mismatches " + std::to_string(mismatched_pools) +
              ", mixed pairs " + std::to_string(mixed_pairs) + ", " + fmt(secs, 2) + " s"};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(derive_seed(seed, SeedStream::init));
    const BackboneDims dims;
    const ModelParams params = testing::random_model(dims, 4, rng);
    const auto raw = testing::random_raw(4, dims, rng);
    const Vector y = testing::random_vector(4, rng, -3, 3);
    const StepPlan step{PairSelection{{{0, 1}, {2, 3}, {0, 2}, {1, 3}}, 4}, draw_base_ratios(4, rng, 2.0)};
    const ObjectiveOptions opt; // default weights, beta = 1000
    ModelParams g;
    evaluate_objective(params, raw, y, step, opt, &g);
    const Vector num = finite_diff_grad(
        [&](std::span<const double> v) {
          ModelParams q = params;
          q.assign_flat(v);
          return evaluate_objective(q, raw, y, step, opt).losses.total;
        },
        params.flatten(), 1e-5);

    std::size_t offset = 0;
    g.for_each_tensor([&](const std::string &name, const Matrix &m) {
      const std::span<const double> n(num.data() + offset, m.size());
      const double e = relative_error(m.values(), n);
      if (e > worst) {
        worst = e;
        worst_name = name + " (seed " + std::to_string(seed) + ")";
      }
      offset += m.size();
    });
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0,
          "worst per-tensor rel err " + fmt(worst * 1e6, 3) + "e-6 at " + worst_name + ", " + fmt(secs, 2) + " s"};
}

Outcome invariant_suite() {
  const auto t0 = Clock::now();
  std::map<std::string, std::size_t> violations;
  auto check = [&](bool ok, const char *what) {
    violations[what] += !ok;
  };
  Rng rng(derive_seed(7, SeedStream::augment));
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t b = 2 + rng.index(7), d = 1 + rng.index(8);
    const FullBatch batch = testing::random_batch(b, d, rng);
    const Vector labels = testing::random_vector(b, rng, -3, 3);
    const double delta = rng.uniform(-0.5, 0.5);

    const SimilarityReport sim = similarity_matrix(batch, delta);
    bool sym = true;
    for (std::size_t i = 0; i < b; ++i) {
      sym &= std::abs(sim.similarity(i, i) - 1.0) < 1e-12;
      for (std::size_t j = 0; j < b; ++j)
        sym &= sim.similarity(i, j) == sim.similarity(j, i);
    }
    check(sym, "similarity symmetric, unit diagonal");

    const PairSelection sel = select_pairs(sim, b, rng);
    bool above = true;
    for (const auto &p : sel.pairs)
      above &= sim.similarity(p.i, p.j) > delta;
    check(above, "selected pairs above delta");

    PerModality<IntensityOutput> outs;
    bool in_range = true;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const auto pred = testing::random_predictor(d, 1 + rng.index(4), rng, rng.uniform(0.1, 3.0));
      outs[m] = make_intensity_output(predict_intensity(pred, batch[m]));
      for (double x : outs[m].intensities)
        in_range &= x > -1.0 && x < 1.0;
    }
    check(in_range, "intensity inside (-1, 1)");

    const MixPlan plan = build_mix_plan(sel.skipped() ? random_pairs(b, b, rng) : sel, outs, rng, rng.uniform(0.2, 5));
    bool ratios = true;
    for (std::size_t p = 0; p < plan.size(); ++p) {
      double mean = 0.0;
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        ratios &= plan.ratios[m][p] >= 0.0 && plan.ratios[m][p] <= 1.0;
        mean += plan.ratios[m][p] / 3.0;
      }
      ratios &= plan.label_ratio[p] >= 0.0 && plan.label_ratio[p] <= 1.0;
      ratios &= std::abs(plan.label_ratio[p] - mean) < 1e-12;
    }
    check(ratios, "lambda in [0,1], label ratio is mean");

    const MixedBatch mixed = apply_mix_plan(plan, batch, labels);
    bool inside = true;
    for (std::size_t m = 0; m < kNumModalities; ++m)
      for (std::size_t p = 0; p < plan.size(); ++p)
        for (std::size_t c = 0; c < d; ++c) {
          const double a = batch[m].features(plan.selection.pairs[p].i, c);
          const double e = batch[m].features(plan.selection.pairs[p].j, c);
          inside &= mixed.features[m](p, c) >= std::min(a, e) && mixed.features[m](p, c) <= std::max(a, e);
        }
    for (std::size_t p = 0; p < plan.size(); ++p) {
      const double a = labels[plan.selection.pairs[p].i], e = labels[plan.selection.pairs[p].j];
      inside &= mixed.labels[p] >= std::min(a, e) && mixed.labels[p] <= std::max(a, e);
    }
    check(inside, "mixed values inside source interval");

    const Vector pdist = batch_softmax(testing::random_vector(b, rng, -4, 4));
    const Vector qdist = batch_softmax(testing::random_vector(b, rng, -4, 4));
    check(kl_divergence(pdist, qdist) >= 0.0 && kl_divergence(pdist, pdist) == 0.0, "KL >= 0, KL(P,P) = 0");

    PerModality<Vector> in, shifted;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      in[m] = outs[m].intensities;
      shifted[m] = in[m];
      const double c = rng.uniform(-5, 5);
      for (double &x : shifted[m])
        x += c;
    }
    check(std::abs(sal_loss(in, labels, 1000.0) - sal_loss(shifted, labels, 1000.0)) < 1e-10, "SAL shift invariance");
  }
  std::size_t total = 0;
  std::string detail;
  for (const auto &[k, v] : violations) {
    total += v;
    if (v)
      detail += " [" + k + ": " + std::to_string(v) + "]";
  }
  return {total == 0, std::to_string(violations.size()) + " invariants x 1000 trials, " + std::to_string(total) +
                          " violations" + detail + ", " + fmt(seconds_since(t0), 2) + " s"};
}

Outcome endpoint_identities() {
  double worst = 0.0;
  Rng rng(derive_seed(11, SeedStream::augment));
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 2 + rng.index(6), d = 1 + rng.index(6);
    const FullBatch batch = testing::random_batch(b, d, rng);
    const Vector labels = testing::random_vector(b, rng, -3, 3);
    const PairSelection sel = random_pairs(b, b, rng);
    for (double lam : {1.0, 0.0}) {
      const MixedBatch mixed = apply_mix_plan(plan_shared_ratio(sel, Vector(b, lam)), batch, labels);
      for (std::size_t p = 0; p < b; ++p) {
        const std::size_t src = lam == 1.0 ? sel.pairs[p].i : sel.pairs[p].j;
        for (std::size_t m = 0; m < kNumModalities; ++m)
          for (std::size_t c = 0; c < d; ++c)
            worst = std::max(worst, std::abs(mixed.features[m](p, c) - batch[m].features(src, c)));
        worst = std::max(worst, std::abs(mixed.labels[p] - labels[src]));
      }
    }
  }
  return {worst < 1e-15, "max abs deviation " + fmt(worst, 17)};
}

struct ModeRuns {
  std::map<std::string, std::vector<double>> mae;
};

/// Validation MAE for every ablation variant and no_augment, seeds 0..4.
ModeRuns directional_runs(double &secs_modes) {
  ModeRuns r;
  const auto t0 = Clock::now();
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const Dataset d = paired_data(s);
    for (AugmentMode m : all_modes())
      r.mae[std::string(mode_name(m))].push_back(train(paired_config(s, m), d).report.mae);
  }
  secs_modes = seconds_since(t0);
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const Dataset d = paired_data(s);
    for (const auto &v : ablation_grid()) {
      if (v.name == "baseline" || v.name == "full") {
        r.mae[v.name].push_back(r.mae[v.name == "full" ? "ms_mix" : "vanilla_mix"][s]);
        continue;
      }
      r.mae[v.name].push_back(train(apply_variant(paired_config(s, AugmentMode::ms_mix), v), d).report.mae);
    }
  }
  return r;
}

Outcome directional_efficacy(const ModeRuns &r, double secs) {
  const double ms = median(r.mae.at("ms_mix")), va = median(r.mae.at("vanilla_mix")),
               no = median(r.mae.at("no_augment"));
  const bool ok = ((ms < va && va < no) || (ms < no && ms <= va + 0.005)) && secs < 180.0;
  return {ok, "median val MAE ms_mix " + fmt(ms) + ", vanilla_mix " + fmt(va) + ", no_augment " + fmt(no) + ", " +
                  fmt(secs, 1) + " s"};
}

Outcome ablation_trend(const ModeRuns &r) {
  const double full = median(r.mae.at("full"));
  bool ok = true;
  std::string detail = "median val MAE full " + fmt(full);
  for (const auto &v : ablation_grid()) {
    if (v.name == "full")
      continue;
    const double m = median(r.mae.at(v.name));
    ok &= full <= m + 0.01;
    detail += ", " + v.name + " " + fmt(m);
  }
  return {ok, detail};
}

Outcome occlusion_sweep() {
  const auto t0 = Clock::now();
  const auto &ratios = default_occlusion_ratios();
  std::map<double, std::vector<double>> ms, no;
  bool rows_ok = true;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    const auto rows = run_occlusion_sweep(paired_config(s, AugmentMode::ms_mix), paired_data(s), ratios);
    const std::string csv = cli::occlusion_csv(rows);
    rows_ok &= static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) ==
               1 + ratios.size() * all_modes().size();
    for (const auto &row : rows) {
      if (row.mode == AugmentMode::ms_mix)
        ms[row.ratio].push_back(row.metrics.acc2);
      if (row.mode == AugmentMode::no_augment)
        no[row.ratio].push_back(row.metrics.acc2);
    }
  }
  bool ok = rows_ok;
  std::string detail = rows_ok ? "csv rows ok" : "csv row count wrong";
  for (double r : ratios) {
    const double a = median(ms[r]), b = median(no[r]);
    ok &= a >= b - 0.02;
    detail += "; " + fmt(r, 1) + ": ms_mix " + fmt(a, 3) + " vs no_augment " + fmt(b, 3);
  }
  return {ok, detail + ", " + fmt(seconds_since(t0), 1) + " s"};
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string("\"") + MSMIX_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "msmix_acceptance_determinism";
  fs::remove_all(root);
  struct Case {
    std::string args;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases{
      {"train --epochs 3 --seed 4", {"metrics.csv", "epoch_metrics.csv", "report.json"}},
      {"train --epochs 2 --seed 9 --mode vanilla_mix", {"metrics.csv", "epoch_metrics.csv"}},
      {"ablate --epochs 1 --seed 2", {"ablation.csv"}},
      {"occlusion-sweep --epochs 1 --ratios 0 0.2 --seed 3", {"occlusion.csv"}},
      {"hyper-sweep --epochs 1 --grid-delta 0.1 0.3 --seed 1", {"hyper.csv"}},
  };
  bool ok = true;
  std::size_t compared = 0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const fs::path a = root / (std::to_string(k) + "a"), b = root / (std::to_string(k) + "b");
    if (run_cli(cases[k].args + " --out-dir " + a.string()) != 0 ||
        run_cli(cases[k].args + " --out-dir " + b.string()) != 0) {
      ok = false;
      continue;
    }
    for (const auto &f : cases[k].files) {
      ok &= read_text_file((a / f).string()) == read_text_file((b / f).string());
      ++compared;
    }
  }
  fs::remove_all(root);
  return {ok, std::to_string(compared) + " output files compared across " + std::to_string(cases.size()) +
                  " repeated CLI runs"};
}

} // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char *name, const Outcome &o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  };
  report(1, "oracle equivalence", oracle_equivalence());
  report(2, "gradient suite", gradient_suite());
  report(3, "invariant suite", invariant_suite());
  report(4, "endpoint identities", endpoint_identities());
  double secs = 0.0;
  const ModeRuns runs = directional_runs(secs);
  report(5, "directional efficacy", directional_efficacy(runs, secs));
  report(6, "ablation trend", ablation_trend(runs));
  report(7, "occlusion sweep", occlusion_sweep());
  report(8, "determinism", determinism());
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed;
}
