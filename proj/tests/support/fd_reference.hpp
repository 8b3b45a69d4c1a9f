// Test-only double-precision replica of the network math, used as the
// independent oracle for finite-difference gradient checks. Deliberately
// written with plain loops and no code shared with the Tape implementation.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "composenet/model.hpp"
#include "composenet/params.hpp"

namespace fdref {

// Reads parameter coordinates as double, with one coordinate optionally
// perturbed (for central differences).
struct Probe {
  const composenet::ParamSet* params = nullptr;
  std::string name;
  int coord = -1;
  double delta = 0.0;

  double at(const std::string& pname, int i) const {
    double v = static_cast<double>(params->at(pname)[i]);
    if (pname == name && i == coord) v += delta;
    return v;
  }
};

inline std::vector<double> dense(const Probe& p, const std::vector<double>& x,
                                 const std::string& layer, bool relu) {
  const composenet::Tensor& w = p.params->at(layer + ".weight");
  const int out = w.shape()[0];
  const int in = w.shape()[1];
  std::vector<double> y(static_cast<size_t>(out));
  for (int o = 0; o < out; ++o) {
    double acc = p.at(layer + ".bias", o);
    for (int i = 0; i < in; ++i) acc += p.at(layer + ".weight", o * in + i) * x[static_cast<size_t>(i)];
    y[static_cast<size_t>(o)] = (relu && acc < 0.0) ? 0.0 : acc;
  }
  return y;
}

inline std::vector<double> obs_vector(const composenet::Observation& obs) {
  return std::vector<double>(obs.pixels.begin(), obs.pixels.end());
}

inline std::vector<double> tree_embedding(const Probe& p, const std::vector<double>& input,
                                          const composenet::CompositionTree::Node& node) {
  if (node.is_leaf()) {
    std::vector<double> h = input;
    for (int layer = 1; layer <= 3; ++layer)
      h = dense(p, h, composenet::trunk_layer_name(*node.skill, layer), true);
    return h;
  }
  std::vector<double> a = tree_embedding(p, input, *node.slot1);
  const std::vector<double> b = tree_embedding(p, input, *node.slot2);
  a.insert(a.end(), b.begin(), b.end());
  return dense(p, a, composenet::comp_layer_name(node.path), true);
}

inline double log_softmax_at(const std::vector<double>& logits, int index) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return logits[static_cast<size_t>(index)] - (mx + std::log(sum));
}

// The probe loss used by gradient checks: -logpi(a) + 0.5*(R - V)^2.
// Smooth in every trunk, composition, policy and value parameter.
inline double tree_loss(const Probe& p, const composenet::Observation& obs,
                        const composenet::CompositionTree& tree, const std::string& value_slug,
                        int action, double target_return) {
  const std::vector<double> emb = tree_embedding(p, obs_vector(obs), tree.root);
  const std::vector<double> logits =
      dense(p, emb, composenet::kPolicyLayerName, false);
  const std::vector<double> v =
      dense(p, emb, composenet::value_head_name(value_slug), false);
  const double diff = target_return - v[0];
  return -log_softmax_at(logits, action) + 0.5 * diff * diff;
}

// `smooth` is false when a finite-difference probe straddles a relu kink
// (the one-sided slopes disagree), where central differences are invalid.
struct FdResult {
  double fd = 0.0;
  bool smooth = true;
};

// One-transition actor-critic loss with entropy regularization:
//   -logpi(a)*A + c_v*(R - V)^2 + c_e*sum_i p_i log p_i
inline double a3c_loss(const Probe& p, const composenet::Observation& obs,
                       const composenet::CompositionTree& tree, const std::string& value_slug,
                       int action, double ret, double advantage, double value_coef,
                       double entropy_coef) {
  const std::vector<double> emb = tree_embedding(p, obs_vector(obs), tree.root);
  const std::vector<double> logits = dense(p, emb, composenet::kPolicyLayerName, false);
  const std::vector<double> v =
      dense(p, emb, composenet::value_head_name(value_slug), false);
  double neg_entropy = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double lp = log_softmax_at(logits, static_cast<int>(i));
    neg_entropy += std::exp(lp) * lp;
  }
  const double diff = ret - v[0];
  return -log_softmax_at(logits, action) * advantage + value_coef * diff * diff +
         entropy_coef * neg_entropy;
}

struct A3cProbeSpec {
  const composenet::Observation* obs;
  const composenet::CompositionTree* tree;
  std::string value_slug;
  int action;
  double ret;
  double advantage;
  double value_coef;
  double entropy_coef;
};

inline FdResult a3c_loss_fd(const composenet::ParamSet& params, const A3cProbeSpec& s,
                            const std::string& pname, int coord, double h) {
  auto eval = [&](double delta) {
    Probe p{&params, pname, coord, delta};
    return a3c_loss(p, *s.obs, *s.tree, s.value_slug, s.action, s.ret, s.advantage,
                    s.value_coef, s.entropy_coef);
  };
  const double fp = eval(h), fm = eval(-h), f0 = eval(0.0);
  FdResult r;
  r.fd = (fp - fm) / (2.0 * h);
  const double right = (fp - f0) / h;
  const double left = (f0 - fm) / h;
  r.smooth = std::fabs(right - left) <= 1e-3 * std::max({1.0, std::fabs(right), std::fabs(left)});
  return r;
}

// Central difference of tree_loss with respect to one parameter coordinate.
inline FdResult tree_loss_fd(const composenet::ParamSet& params,
                             const composenet::Observation& obs,
                             const composenet::CompositionTree& tree,
                             const std::string& value_slug, int action, double target_return,
                             const std::string& pname, int coord, double h) {
  Probe plus{&params, pname, coord, h};
  Probe minus{&params, pname, coord, -h};
  Probe center{&params, pname, coord, 0.0};
  const double fp = tree_loss(plus, obs, tree, value_slug, action, target_return);
  const double fm = tree_loss(minus, obs, tree, value_slug, action, target_return);
  const double f0 = tree_loss(center, obs, tree, value_slug, action, target_return);
  FdResult r;
  r.fd = (fp - fm) / (2.0 * h);
  const double right = (fp - f0) / h;
  const double left = (f0 - fm) / h;
  r.smooth = std::fabs(right - left) <= 1e-3 * std::max({1.0, std::fabs(right), std::fabs(left)});
  return r;
}

inline double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-3});
  return std::fabs(a - b) / denom;
}

}  // namespace fdref
