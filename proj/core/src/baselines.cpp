#include "composenet/baselines.hpp"

#include <cmath>

#include "composenet/errors.hpp"

namespace composenet {

namespace {

constexpr const char* kScratchTrunk = "scratch.fc";     // scratch.fc1..3
constexpr const char* kScratchPolicy = "scratch.policy";
constexpr const char* kMetaTrunk = "meta.fc";           // meta.fc1..3
constexpr const char* kMetaOut = "meta.out";

Tensor dense_chain(const ParamSet& params, const Tensor& input, const std::string& base) {
  Tensor h = input;
  for (int layer = 1; layer <= 3; ++layer) {
    const std::string name = base + std::to_string(layer);
    h = dense_forward(h, params.at(name + ".weight"), params.at(name + ".bias"),
                      Activation::Relu);
  }
  return h;
}

Tape::NodeId dense_chain_taped(Tape& tape, Tape::NodeId input, const std::string& base) {
  Tape::NodeId h = input;
  for (int layer = 1; layer <= 3; ++layer)
    h = tape.dense(h, base + std::to_string(layer), Activation::Relu);
  return h;
}

}  // namespace

std::vector<SkillId> relevant_skills_for(const TaskSpec& spec) {
  return build_tree(spec).leaves();
}

// --- scratch -------------------------------------------------------------------

ScratchAgent::ScratchAgent(TaskSpec spec) : spec_(std::move(spec)), value_slug_(spec_.slug()) {}

void ScratchAgent::add_params(ParamSet& params, const std::string& task_slug, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5C7A));
  add_dense_params(params, std::string(kScratchTrunk) + "1", ModelDims::kHidden,
                   ModelDims::kInput, rng);
  add_dense_params(params, std::string(kScratchTrunk) + "2", ModelDims::kHidden,
                   ModelDims::kHidden, rng);
  add_dense_params(params, std::string(kScratchTrunk) + "3", ModelDims::kEmbedding,
                   ModelDims::kHidden, rng);
  add_dense_params(params, kScratchPolicy, ModelDims::kActions, ModelDims::kEmbedding, rng);
  add_value_head_params(params, task_slug, rng);
}

long long ScratchAgent::parameter_count() {
  // fc1 + fc2 + fc3 + policy (weights and biases)
  const long long fc1 = ModelDims::kHidden * (ModelDims::kInput + 1);
  const long long fc2 = ModelDims::kHidden * (ModelDims::kHidden + 1);
  const long long fc3 = ModelDims::kEmbedding * (ModelDims::kHidden + 1);
  const long long pol = ModelDims::kActions * (ModelDims::kEmbedding + 1);
  return fc1 + fc2 + fc3 + pol;
}

ScratchAgent::Heads ScratchAgent::forward(const ParamSet& params, const Observation& obs) const {
  const Tensor emb = dense_chain(params, obs.to_tensor(), kScratchTrunk);
  const Tensor logits =
      dense_forward(emb, params.at(std::string(kScratchPolicy) + ".weight"),
                    params.at(std::string(kScratchPolicy) + ".bias"), Activation::None);
  const std::string vh = value_head_name(value_slug_);
  const float value = dense_forward(emb, params.at(vh + ".weight"), params.at(vh + ".bias"),
                                    Activation::None)[0];
  return {softmax(logits), value};
}

Agent::ActResult ScratchAgent::act(const ParamSet& params, const Observation& obs, Rng& rng,
                                   bool greedy) const {
  const Heads h = forward(params, obs);
  ActResult r;
  r.action = greedy ? argmax_index(h.probs) : sample_categorical(h.probs.span(), rng);
  r.env_action = r.action;
  r.log_prob = std::log(h.probs[r.action]);
  r.value = h.value;
  r.entropy = entropy_of(h.probs);
  return r;
}

float ScratchAgent::state_value(const ParamSet& params, const Observation& obs) const {
  return forward(params, obs).value;
}

TapedPolicyValue ScratchAgent::forward_taped(Tape& tape, const Observation& obs) const {
  const Tape::NodeId input = tape.constant(obs.to_tensor());
  const Tape::NodeId emb = dense_chain_taped(tape, input, kScratchTrunk);
  TapedPolicyValue out;
  out.logits = tape.dense(emb, kScratchPolicy, Activation::None);
  out.value = tape.pick(tape.dense(emb, value_head_name(value_slug_), Activation::None), 0);
  return out;
}

ParamSet prepare_scratch_params(const TaskSpec& spec, uint64_t seed) {
  ParamSet params;
  ScratchAgent::add_params(params, spec.slug(), seed);
  return params;
}

TrainOutcome scratch_train(const TaskSpec& spec, ParamSet& params, const TrainConfig& cfg,
                           const EvalCallback& on_eval) {
  ScratchAgent agent(spec);
  return train_agents({&agent}, params, cfg, run_seed_for(spec, cfg.seed), on_eval);
}

// --- meta-controller -------------------------------------------------------------

MetaControllerAgent::MetaControllerAgent(TaskSpec spec)
    : spec_(std::move(spec)), skills_(relevant_skills_for(spec_)), value_slug_(spec_.slug()) {}

void MetaControllerAgent::add_params(ParamSet& params, const TaskSpec& spec, uint64_t seed) {
  const auto skills = relevant_skills_for(spec);
  Rng rng(mix_seed(seed, 0x3E7A));
  add_dense_params(params, std::string(kMetaTrunk) + "1", ModelDims::kHidden, ModelDims::kInput,
                   rng);
  add_dense_params(params, std::string(kMetaTrunk) + "2", ModelDims::kHidden,
                   ModelDims::kHidden, rng);
  add_dense_params(params, std::string(kMetaTrunk) + "3", ModelDims::kEmbedding,
                   ModelDims::kHidden, rng);
  add_dense_params(params, kMetaOut, static_cast<int>(skills.size()), ModelDims::kEmbedding,
                   rng);
  add_value_head_params(params, spec.slug(), rng);
}

MetaControllerAgent::Heads MetaControllerAgent::forward(const ParamSet& params,
                                                        const Observation& obs) const {
  const Tensor emb = dense_chain(params, obs.to_tensor(), kMetaTrunk);
  const Tensor logits =
      dense_forward(emb, params.at(std::string(kMetaOut) + ".weight"),
                    params.at(std::string(kMetaOut) + ".bias"), Activation::None);
  const std::string vh = value_head_name(value_slug_);
  const float value = dense_forward(emb, params.at(vh + ".weight"), params.at(vh + ".bias"),
                                    Activation::None)[0];
  return {softmax(logits), value};
}

Agent::ActResult MetaControllerAgent::act(const ParamSet& params, const Observation& obs,
                                          Rng& rng, bool greedy) const {
  const Heads h = forward(params, obs);
  ActResult r;
  r.action = greedy ? argmax_index(h.selector_probs)
                    : sample_categorical(h.selector_probs.span(), rng);
  r.log_prob = std::log(h.selector_probs[r.action]);
  r.value = h.value;
  r.entropy = entropy_of(h.selector_probs);
  // The chosen skill's frozen policy produces the environment action; it is
  // sampled during training to preserve exploration, argmax under greedy
  // evaluation.
  const SkillId skill = skills_[static_cast<size_t>(r.action)];
  const Tensor probs = policy_forward(params, trunk_forward(params, obs, skill));
  r.env_action = greedy ? argmax_index(probs) : sample_categorical(probs.span(), rng);
  return r;
}

float MetaControllerAgent::state_value(const ParamSet& params, const Observation& obs) const {
  return forward(params, obs).value;
}

TapedPolicyValue MetaControllerAgent::forward_taped(Tape& tape, const Observation& obs) const {
  const Tape::NodeId input = tape.constant(obs.to_tensor());
  const Tape::NodeId emb = dense_chain_taped(tape, input, kMetaTrunk);
  TapedPolicyValue out;
  out.logits = tape.dense(emb, kMetaOut, Activation::None);
  out.value = tape.pick(tape.dense(emb, value_head_name(value_slug_), Activation::None), 0);
  return out;
}

ParamSet prepare_metacontroller_params(const TaskSpec& spec, const ParamSet& skills,
                                       uint64_t seed) {
  for (SkillId s : relevant_skills_for(spec)) {
    if (!skills.contains(trunk_layer_name(s, 1) + ".weight"))
      throw MissingPrerequisiteError("meta-controller: skills checkpoint lacks trunk for " +
                                     std::string(to_string(s)));
  }
  ParamSet params;
  for (const auto& [name, t] : skills.entries()) {
    if (name.rfind("trunk.", 0) == 0 || name.rfind("policy.", 0) == 0) params.insert(name, t);
  }
  params.freeze_prefix("trunk.");
  params.freeze_prefix("policy.");
  MetaControllerAgent::add_params(params, spec, seed);
  return params;
}

TrainOutcome metacontroller_train(const TaskSpec& spec, ParamSet& params,
                                  const TrainConfig& cfg, const EvalCallback& on_eval) {
  MetaControllerAgent agent(spec);
  return train_agents({&agent}, params, cfg, run_seed_for(spec, cfg.seed), on_eval);
}

}  // namespace composenet
