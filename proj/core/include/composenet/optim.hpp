#pragma once

#include <map>
#include <string>
#include <vector>

#include "composenet/params.hpp"
#include "composenet/tape.hpp"

namespace composenet {

struct RmsPropConfig {
  float lr = 7e-4f;
  float decay = 0.99f;
  float epsilon = 1e-5f;
};

// RMSProp with a per-coordinate running second moment:
//   s <- decay * s + (1 - decay) * g^2
//   p <- p - lr * g / sqrt(s + epsilon)
// The moment state persists across calls, keyed by parameter name.
class RmsProp {
public:
  explicit RmsProp(RmsPropConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update. The gradient map must reference only existing,
  // non-frozen parameters; a NaN/Inf gradient aborts the whole step with
  // nothing mutated.
  void step(ParamSet& params, const GradMap& grads);

  const RmsPropConfig& config() const { return cfg_; }
  const std::vector<float>* moment(const std::string& name) const;

private:
  RmsPropConfig cfg_;
  std::map<std::string, std::vector<float>> second_moment_;
};

// Scales all gradients in place so their global L2 norm is at most
// `max_norm`; returns the pre-clip norm. Throws NumericError if the norm is
// not finite.
float clip_global_norm(GradMap& grads, float max_norm);

}  // namespace composenet
