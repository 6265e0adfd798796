// SPDX-License-Identifier: Apache-2.0
//
// One augmentation step on a batch of synthetic data: encode, pick similar
// pairs, predict intensities, and print the per-modality ratios.
#include <cstdio>

#include "msmix/msmix.hpp"

int main() {
  using namespace msmix;

  SynthConfig sc;
  sc.n = 8;
  sc.seed = 3;
  const Dataset data = generate(sc);

  Rng rng(derive_seed(3, SeedStream::init));
  ModelParams p = ModelParams::init(BackboneDims{}, 4, rng);
  // A freshly initialised predictor outputs zero intensity for every sample;
  // perturb the layer-norm gains so the ratios have something to show.
  for (auto &pred : p.predictors)
    for (double &g : pred.ln_gain.values())
      g = rng.uniform(-2.0, 2.0);

  const FullBatch latent = encode(p.backbone, data.features);
  const SimilarityReport sim = similarity_matrix(latent, 0.2);
  Rng aug(derive_seed(3, SeedStream::augment));
  const PairSelection sel = select_pairs(sim, data.size(), aug);
  if (sel.skipped()) {
    std::puts("no pair above the similarity threshold");
    return 0;
  }

  PerModality<IntensityOutput> intensities;
  for (std::size_t m = 0; m < kNumModalities; ++m)
    intensities[m] = make_intensity_output(predict_intensity(p.predictors[m], latent[m]));
  const MixPlan plan = build_mix_plan(sel, intensities, aug);
  const Vector mixed = mix_labels(plan, data.labels);

  std::printf("mean off-diagonal similarity %.4f\n", sim.mean_offdiag);
  std::printf("%4s %4s %8s %8s %8s %8s %8s\n", "i", "j", "lam_t", "lam_v", "lam_a", "lam_L", "y_mix");
  for (std::size_t k = 0; k < plan.size(); ++k)
    std::printf("%4zu %4zu %8.4f %8.4f %8.4f %8.4f %8.4f\n", plan.selection.pairs[k].i, plan.selection.pairs[k].j,
                plan.ratios[0][k], plan.ratios[1][k], plan.ratios[2][k], plan.label_ratio[k], mixed[k]);
}
