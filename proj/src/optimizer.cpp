#include "pcmea/optimizer.hpp"

#include <cmath>

#include "pcmea/error.hpp"

namespace pcmea {

AdamMoments AdamMoments::for_store(const ParameterStore& params) {
  AdamMoments out;
  out.m = params.zeros_like();
  out.m.set_role(StoreRole::Auxiliary);
  out.v = params.zeros_like();
  out.v.set_role(StoreRole::Auxiliary);
  return out;
}

void adam_step(ParameterStore& params, const ParameterStore& grads, AdamMoments& moments, long step,
               const AdamConfig& config) {
  if (step < 1) throw ArgumentError("Adam step count starts at 1");
  if (!params.same_schema(grads) || !params.same_schema(moments.m) || !params.same_schema(moments.v)) {
    throw ConfigError("Adam state does not match the parameter schema");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  auto p = params.entries();
  auto g = grads.entries();
  auto m = moments.m.entries();
  auto v = moments.v.entries();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i].value = config.beta1 * m[i].value + (1.0 - config.beta1) * g[i].value;
    v[i].value = config.beta2 * v[i].value + (1.0 - config.beta2) * g[i].value.cwiseAbs2();
    p[i].value.array() -=
        config.learning_rate * (m[i].value.array() / c1) / ((v[i].value.array() / c2).sqrt() + config.eps);
  }
}

}  // namespace pcmea
