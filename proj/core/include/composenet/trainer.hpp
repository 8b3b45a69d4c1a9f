#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "composenet/model.hpp"
#include "composenet/optim.hpp"

namespace composenet {

struct TrainConfig {
  int workers = 1;
  bool async_workers = false;  // lockstep (summed gradients) when false
  int rollout_length = 20;
  float gamma = 0.99f;
  float entropy_coef = 0.01f;
  float value_coef = 0.5f;
  float grad_clip = 40.0f;
  RmsPropConfig optimizer;
  long long total_steps = 1'000'000;
  long long eval_interval = 25'000;
  int eval_episodes = 200;
  int plateau_window = 0;  // eval points; 0 disables early stopping
  float plateau_tolerance = 0.02f;
  uint64_t seed = 0;
};

struct Transition {
  Observation obs;
  int action = 0;  // the trained head's choice (selector index for the meta-controller)
  float reward = 0.0f;
  bool done = false;
  float value = 0.0f;     // V(s) under the acting snapshot
  float log_prob = 0.0f;  // log pi(action|s) under the acting snapshot
};

struct RolloutBatch {
  std::vector<Transition> transitions;
  bool terminal_tail = true;     // episode ended at the last transition
  float bootstrap_value = 0.0f;  // V of the state after the last transition; 0 if terminal
};

struct ReturnsAdvantages {
  std::vector<float> returns;
  std::vector<float> advantages;
};

// R_t = r_t + gamma * R_{t+1}, seeded with the batch bootstrap (0 at
// terminal); A_t = R_t - V(s_t).
ReturnsAdvantages compute_returns_advantages(const RolloutBatch& batch, float gamma);

// One acting policy: how to choose actions in the environment and how to
// rebuild taped logits/value for the update.
class Agent {
public:
  virtual ~Agent() = default;

  struct ActResult {
    int action = 0;      // index for the training loss
    int env_action = 0;  // what the environment executes
    float log_prob = 0.0f;
    float value = 0.0f;
    float entropy = 0.0f;
  };

  virtual ActResult act(const ParamSet& params, const Observation& obs, Rng& rng,
                        bool greedy) const = 0;
  virtual float state_value(const ParamSet& params, const Observation& obs) const = 0;
  virtual TapedPolicyValue forward_taped(Tape& tape, const Observation& obs) const = 0;
  virtual const TaskSpec& task() const = 0;
};

// ComposeNet acting path: a composition tree over skill trunks feeding the
// shared policy layer and a per-task value head. Also covers single skills
// via degenerate one-leaf trees.
class TreeAgent : public Agent {
public:
  TreeAgent(TaskSpec spec, CompositionTree tree, std::string value_slug);
  static TreeAgent for_task(const TaskSpec& spec);
  static TreeAgent for_skill(SkillId s);

  ActResult act(const ParamSet& params, const Observation& obs, Rng& rng,
                bool greedy) const override;
  float state_value(const ParamSet& params, const Observation& obs) const override;
  TapedPolicyValue forward_taped(Tape& tape, const Observation& obs) const override;
  const TaskSpec& task() const override { return spec_; }
  const CompositionTree& tree() const { return tree_; }
  const std::string& value_slug() const { return value_slug_; }

private:
  TaskSpec spec_;
  CompositionTree tree_;
  std::string value_slug_;
};

// Shared helpers for categorical heads.
int argmax_index(const Tensor& probs);
float entropy_of(const Tensor& probs);

// Owns one environment + monitor and collects n-step rollout segments,
// continuing episodes across calls. Environment seeds are derived from
// (run_seed, worker stream, episode index) so distinct methods trained with
// the same run seed see identical episode layouts.
class EpisodeRunner {
public:
  EpisodeRunner(const Agent& agent, uint64_t run_seed, int worker_id);

  RolloutBatch collect(const ParamSet& params, int max_transitions, long long& step_counter);
  long long episodes_started() const { return episode_index_; }

private:
  void begin_episode();

  const Agent* agent_;
  GridWorld env_;
  MonitorState monitor_;
  Observation obs_;
  Rng action_rng_;
  uint64_t run_seed_;
  int worker_id_;
  long long episode_index_ = 0;
  bool episode_open_ = false;
};

struct UpdateStats {
  float policy_loss = 0.0f;
  float value_loss = 0.0f;
  float mean_entropy = 0.0f;
  float grad_norm = 0.0f;
  int transitions = 0;
};

// Builds the summed actor-critic loss over the given batches on one tape,
// backpropagates, clips to the global-norm bound and applies one optimizer
// step. Advantages enter the policy term as constants.
UpdateStats actor_critic_update(const Agent& agent, ParamSet& params, RmsProp& opt,
                                std::span<const RolloutBatch> batches, const TrainConfig& cfg);
UpdateStats actor_critic_update(const Agent& agent, ParamSet& params, RmsProp& opt,
                                const RolloutBatch& batch, const TrainConfig& cfg);

struct EvalResult {
  float mean_return = 0.0f;
  float mean_length = 0.0f;
  float mean_entropy = 0.0f;
};

// Greedy (argmax) evaluation over fresh episodes.
EvalResult evaluate_greedy(const Agent& agent, const ParamSet& params, int episodes,
                           uint64_t seed);
// Uniform-random policy on the same environment/monitor stack.
EvalResult random_policy_eval(const TaskSpec& spec, int episodes, uint64_t seed);

struct EvalPoint {
  long long steps = 0;
  EvalResult eval;
  double wall_seconds = 0.0;
};

using EvalCallback =
    std::function<void(const std::string& tag, const EvalPoint& point)>;

struct TrainOutcome {
  long long steps = 0;
  std::map<std::string, std::vector<EvalPoint>> curves;  // keyed by task slug
  bool plateau_stopped = false;
};

// Seed for a training run on a task. Depends only on (config seed, task),
// never on the method, so ComposeNet, baselines and ablations trained on the
// same task share environment seeds at equal episode indices.
uint64_t run_seed_for(const TaskSpec& spec, uint64_t config_seed);

// Generic training driver. Episodes rotate round-robin over `agents` within
// each worker; workers either run in lockstep on one thread (summed
// gradients, deterministic) or as asynchronous snapshot workers with
// serialized updates. Budget is total environment steps across everything.
TrainOutcome train_agents(const std::vector<const Agent*>& agents, ParamSet& params,
                          const TrainConfig& cfg, uint64_t run_seed,
                          const EvalCallback& on_eval = {});

// Phase 1: all six skill trunks and the shared policy layer trained jointly;
// per-skill value heads. Returns the trained parameters.
TrainOutcome train_skills(ParamSet& params, const TrainConfig& cfg,
                          const EvalCallback& on_eval = {});

// Copies skill parameters, freezes trunks + policy layer, adds composition
// layers (randomly initialized, or copied from transfer sources per node
// path) and a fresh value head.
struct TransferInit {
  struct Entry {
    const ParamSet* source = nullptr;
    std::string source_path;  // comp node path inside the source
  };
  std::map<std::string, Entry> by_path;  // dest comp path -> source entry
};
ParamSet prepare_composition_params(const TaskSpec& spec, const ParamSet& skills,
                                    uint64_t seed, const TransferInit* transfer = nullptr);

// Phase 2 on one composed task.
TrainOutcome train_composition(const TaskSpec& spec, ParamSet& params, const TrainConfig& cfg,
                               const EvalCallback& on_eval = {});

// One composition layer trained across several tasks of the same template
// type, fresh value head per task. ConfigError on mixed templates.
ParamSet prepare_multitask_params(const std::vector<TaskSpec>& tasks, const ParamSet& skills,
                                  uint64_t seed);
TrainOutcome train_multitask_composition(const std::vector<TaskSpec>& tasks, ParamSet& params,
                                         const TrainConfig& cfg,
                                         const EvalCallback& on_eval = {});

}  // namespace composenet
