#include "composenet/optim.hpp"

#include <cmath>

#include "composenet/errors.hpp"

namespace composenet {

void RmsProp::step(ParamSet& params, const GradMap& grads) {
  // Validate the whole step before mutating anything.
  for (const auto& [name, g] : grads) {
    if (!params.contains(name))
      throw ConfigError("RmsProp: gradient for unknown parameter " + name);
    if (params.is_frozen(name))
      throw UsageError("RmsProp: gradient entry for frozen parameter " + name);
    if (!params.at(name).same_shape(g))
      throw ConfigError("RmsProp: gradient shape " + g.shape_str() + " does not match " +
                        name + " " + params.at(name).shape_str());
    for (int i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i]))
        throw NumericError("RmsProp: non-finite gradient for " + name + "[" +
                           std::to_string(i) + "]; step aborted");
  }

  for (const auto& [name, g] : grads) {
    Tensor& p = params.mutable_at(name);
    auto [it, fresh] = second_moment_.try_emplace(name, static_cast<size_t>(g.size()), 0.0f);
    std::vector<float>& s = it->second;
    for (int i = 0; i < g.size(); ++i) {
      const float gi = g[i];
      s[static_cast<size_t>(i)] = cfg_.decay * s[static_cast<size_t>(i)] +
                                  (1.0f - cfg_.decay) * gi * gi;
      p[i] -= cfg_.lr * gi / std::sqrt(s[static_cast<size_t>(i)] + cfg_.epsilon);
    }
  }
}

const std::vector<float>* RmsProp::moment(const std::string& name) const {
  auto it = second_moment_.find(name);
  return it == second_moment_.end() ? nullptr : &it->second;
}

float clip_global_norm(GradMap& grads, float max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads)
    for (int i = 0; i < g.size(); ++i) sq += static_cast<double>(g[i]) * g[i];
  const float norm = static_cast<float>(std::sqrt(sq));
  if (!std::isfinite(norm)) throw NumericError("clip_global_norm: non-finite gradient norm");
  if (norm > max_norm && norm > 0.0f) {
    const float scale = max_norm / norm;
    for (auto& [_, g] : grads)
      for (int i = 0; i < g.size(); ++i) g[i] *= scale;
  }
  return norm;
}

}  // namespace composenet
