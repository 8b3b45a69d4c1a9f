#pragma once

#include "composenet/trainer.hpp"

namespace composenet {

// A single trunk-shaped network (225 -> 128 -> 128 -> 128) with its own
// policy layer and value head, all trainable; capacity matches one skill
// trunk plus the shared policy layer.
class ScratchAgent : public Agent {
public:
  explicit ScratchAgent(TaskSpec spec);

  ActResult act(const ParamSet& params, const Observation& obs, Rng& rng,
                bool greedy) const override;
  float state_value(const ParamSet& params, const Observation& obs) const override;
  TapedPolicyValue forward_taped(Tape& tape, const Observation& obs) const override;
  const TaskSpec& task() const override { return spec_; }

  static void add_params(ParamSet& params, const std::string& task_slug, uint64_t seed);
  // Trainable coordinate count of one scratch network (the fairness bound).
  static long long parameter_count();

private:
  struct Heads {
    Tensor probs;
    float value;
  };
  Heads forward(const ParamSet& params, const Observation& obs) const;

  TaskSpec spec_;
  std::string value_slug_;
};

// Selector network (trunk-shaped, softmax over the task's relevant skills)
// trained by actor-critic; environment actions are sampled every step from
// the chosen frozen skill policy.
class MetaControllerAgent : public Agent {
public:
  explicit MetaControllerAgent(TaskSpec spec);

  ActResult act(const ParamSet& params, const Observation& obs, Rng& rng,
                bool greedy) const override;
  float state_value(const ParamSet& params, const Observation& obs) const override;
  TapedPolicyValue forward_taped(Tape& tape, const Observation& obs) const override;
  const TaskSpec& task() const override { return spec_; }

  const std::vector<SkillId>& relevant_skills() const { return skills_; }
  static void add_params(ParamSet& params, const TaskSpec& spec, uint64_t seed);

private:
  struct Heads {
    Tensor selector_probs;  // [k]
    float value;
  };
  Heads forward(const ParamSet& params, const Observation& obs) const;

  TaskSpec spec_;
  std::vector<SkillId> skills_;
  std::string value_slug_;
};

// The skills a task's composition tree would consume, in slot order (2 for
// flat templates, 3 for hierarchies).
std::vector<SkillId> relevant_skills_for(const TaskSpec& spec);

// Fresh scratch parameters + training on the composed task.
ParamSet prepare_scratch_params(const TaskSpec& spec, uint64_t seed);
TrainOutcome scratch_train(const TaskSpec& spec, ParamSet& params, const TrainConfig& cfg,
                           const EvalCallback& on_eval = {});

// Frozen skills + fresh selector; ConfigError if a relevant skill is missing
// from the skills parameter set.
ParamSet prepare_metacontroller_params(const TaskSpec& spec, const ParamSet& skills,
                                       uint64_t seed);
TrainOutcome metacontroller_train(const TaskSpec& spec, ParamSet& params,
                                  const TrainConfig& cfg, const EvalCallback& on_eval = {});

}  // namespace composenet
