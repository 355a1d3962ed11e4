#pragma once

#include "pcmea/params.hpp"

namespace pcmea {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates for one parameter store.
struct AdamMoments {
  ParameterStore m{StoreRole::Auxiliary};
  ParameterStore v{StoreRole::Auxiliary};

  static AdamMoments for_store(const ParameterStore& params);
};

/// One bias-corrected Adam step. `step` is the 1-based update count.
void adam_step(ParameterStore& params, const ParameterStore& grads, AdamMoments& moments, long step,
               const AdamConfig& config);

}  // namespace pcmea
