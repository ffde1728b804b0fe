// SPDX-License-Identifier: Apache-2.0
// Full-length training runs; slow, so kept apart from the unit suite.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "antlab/trainer.hpp"

using namespace antlab;

TEST_CASE("training reduces validation loss below 0.3x its initial value") {
  const CorpusSplit split = split_corpus(generate_corpus(512, 41));
  for (std::uint64_t seed : {0, 1, 2}) {
    CAPTURE(seed);
    TrainConfig cfg;
    cfg.seed = derive_seed(seed, "train");
    REQUIRE(cfg.iterations == 2000);
    TrainState state{make_model(derive_seed(seed, "model")), {}, {}};
    train(state, split.train, split.val, cfg, cfg.iterations);
    REQUIRE(state.log.front().has_val);
    REQUIRE(state.log.back().has_val);
    const double initial = state.log.front().val_loss, final_loss = state.log.back().val_loss;
    MESSAGE("seed " << seed << ": val loss " << initial << " -> " << final_loss);
    CHECK(final_loss < 0.3 * initial);

    if (seed == 0) {
      // The trained conditioner still reads the timestep.
      double gap = 0.0, scale = 0.0;
      for (const auto& p : split.val) {
        const TextFeatures text = encode_prompt(p.prompt, state.model.cond);
        const Tensor early = sta_forward(text, 45, state.model.cond), late = sta_forward(text, 5, state.model.cond);
        double d2 = 0.0, n2 = 0.0;
        for (std::size_t i = 0; i < early.numel(); ++i) {
          d2 += (early[i] - late[i]) * (early[i] - late[i]);
          n2 += early[i] * early[i];
        }
        gap += std::sqrt(d2);
        scale += std::sqrt(n2);
      }
      gap /= static_cast<double>(split.val.size());
      scale /= static_cast<double>(split.val.size());
      MESSAGE("mean token gap between t = 45 and t = 5: " << gap << " (token norm " << scale << ")");
      CHECK(gap > 1e-6 * scale);
    }
  }
}
