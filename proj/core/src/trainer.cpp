#include "composenet/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "composenet/errors.hpp"

namespace composenet {

namespace {

// Seed streams (see mix_seed).
constexpr uint64_t kEnvStream = 101;
constexpr uint64_t kActionStream = 202;
constexpr uint64_t kEvalStream = 303;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ReturnsAdvantages compute_returns_advantages(const RolloutBatch& batch, float gamma) {
  const size_t n = batch.transitions.size();
  ReturnsAdvantages out;
  out.returns.resize(n);
  out.advantages.resize(n);
  float running = batch.terminal_tail ? 0.0f : batch.bootstrap_value;
  for (size_t i = n; i-- > 0;) {
    running = batch.transitions[i].reward + gamma * running;
    out.returns[i] = running;
    out.advantages[i] = running - batch.transitions[i].value;
  }
  return out;
}

int argmax_index(const Tensor& probs) {
  int best = 0;
  for (int i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

float entropy_of(const Tensor& probs) {
  float h = 0.0f;
  for (int i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0f) h -= probs[i] * std::log(probs[i]);
  return h;
}

// --- TreeAgent ---------------------------------------------------------------

TreeAgent::TreeAgent(TaskSpec spec, CompositionTree tree, std::string value_slug)
    : spec_(std::move(spec)), tree_(std::move(tree)), value_slug_(std::move(value_slug)) {}

TreeAgent TreeAgent::for_task(const TaskSpec& spec) {
  return TreeAgent(spec, build_tree(spec), spec.slug());
}

TreeAgent TreeAgent::for_skill(SkillId s) {
  TaskSpec spec = skill_task(s);
  return TreeAgent(spec, leaf_tree(s), spec.slug());
}

Agent::ActResult TreeAgent::act(const ParamSet& params, const Observation& obs, Rng& rng,
                                bool greedy) const {
  const PolicyValue pv = tree_forward(params, obs, tree_, value_slug_);
  ActResult r;
  r.action = greedy ? argmax_index(pv.probs) : sample_categorical(pv.probs.span(), rng);
  r.env_action = r.action;
  r.log_prob = std::log(pv.probs[r.action]);
  r.value = pv.value;
  r.entropy = entropy_of(pv.probs);
  return r;
}

float TreeAgent::state_value(const ParamSet& params, const Observation& obs) const {
  return tree_forward(params, obs, tree_, value_slug_).value;
}

TapedPolicyValue TreeAgent::forward_taped(Tape& tape, const Observation& obs) const {
  return tree_forward_taped(tape, obs, tree_, value_slug_);
}

// --- rollouts ----------------------------------------------------------------

EpisodeRunner::EpisodeRunner(const Agent& agent, uint64_t run_seed, int worker_id)
    : agent_(&agent),
      env_(agent.task().grid_config(), mix_seed(run_seed, kEnvStream + worker_id, 0)),
      action_rng_(mix_seed(run_seed, kActionStream + worker_id)),
      run_seed_(run_seed),
      worker_id_(worker_id) {}

void EpisodeRunner::begin_episode() {
  env_.reset(mix_seed(run_seed_, kEnvStream + worker_id_, static_cast<uint64_t>(episode_index_)));
  monitor_ = MonitorState{};
  obs_ = env_.render();
  episode_open_ = true;
}

RolloutBatch EpisodeRunner::collect(const ParamSet& params, int max_transitions,
                                    long long& step_counter) {
  if (!episode_open_) begin_episode();
  RolloutBatch batch;
  batch.transitions.reserve(static_cast<size_t>(max_transitions));
  for (int i = 0; i < max_transitions; ++i) {
    const Agent::ActResult act = agent_->act(params, obs_, action_rng_, /*greedy=*/false);
    const StepResult sr = env_.step(static_cast<Action>(act.env_action));
    const MonitorOutcome mo = monitor_step(monitor_, agent_->task(), sr.events, sr.truncated);
    Transition tr;
    tr.obs = obs_;
    tr.action = act.action;
    tr.reward = mo.reward;
    tr.done = mo.done;
    tr.value = act.value;
    tr.log_prob = act.log_prob;
    batch.transitions.push_back(std::move(tr));
    obs_ = sr.obs;
    ++step_counter;
    if (mo.done) {
      episode_open_ = false;
      ++episode_index_;
      batch.terminal_tail = true;
      batch.bootstrap_value = 0.0f;
      return batch;
    }
  }
  batch.terminal_tail = false;
  batch.bootstrap_value = agent_->state_value(params, obs_);
  return batch;
}

// --- update -------------------------------------------------------------------

namespace {

// Appends one batch's loss terms to the tape; returns the new running loss
// node (or the old one for an empty batch).
Tape::NodeId add_batch_loss(Tape& tape, const Agent& agent, const RolloutBatch& batch,
                            const TrainConfig& cfg, UpdateStats& stats, Tape::NodeId loss) {
  if (batch.transitions.empty()) return loss;
  const ReturnsAdvantages ra = compute_returns_advantages(batch, cfg.gamma);
  for (size_t t = 0; t < batch.transitions.size(); ++t) {
    const Transition& tr = batch.transitions[t];
    const TapedPolicyValue tpv = agent.forward_taped(tape, tr.obs);
    const Tape::NodeId logp = tape.log_softmax(tpv.logits);
    const Tape::NodeId logp_a = tape.pick(logp, tr.action);
    const Tape::NodeId vdiff =
        tape.sub(tape.constant(Tensor::scalar(ra.returns[t])), tpv.value);
    const Tape::NodeId sq = tape.square(vdiff);
    const Tape::NodeId probs = tape.softmax(tpv.logits);
    const Tape::NodeId neg_ent = tape.sum(tape.mul(probs, logp));
    // -logpi*A + c_v*(R-V)^2 + c_e*sum(p*logp)
    Tape::NodeId term = tape.scale(logp_a, -ra.advantages[t]);
    term = tape.add(term, tape.scale(sq, cfg.value_coef));
    term = tape.add(term, tape.scale(neg_ent, cfg.entropy_coef));
    loss = (loss < 0) ? term : tape.add(loss, term);

    stats.policy_loss -= tape.scalar_value(logp_a) * ra.advantages[t];
    stats.value_loss += tape.scalar_value(sq);
    stats.mean_entropy -= tape.scalar_value(neg_ent);
    ++stats.transitions;
  }
  return loss;
}

// One (agent, batch) pair per lockstep slot; gradients are summed over all
// slots before the single optimizer step.
struct AgentBatch {
  const Agent* agent;
  const RolloutBatch* batch;
};

// Gradients of the summed loss with respect to `params` (which may be a
// snapshot distinct from the master set).
std::pair<GradMap, UpdateStats> compute_actor_critic_grads(std::span<const AgentBatch> slots,
                                                           const ParamSet& params,
                                                           const TrainConfig& cfg) {
  Tape tape(params);
  Tape::NodeId loss = -1;
  UpdateStats stats;
  for (const AgentBatch& slot : slots)
    loss = add_batch_loss(tape, *slot.agent, *slot.batch, cfg, stats, loss);
  if (loss < 0) return {GradMap{}, stats};
  if (!std::isfinite(tape.scalar_value(loss)))
    throw NumericError("actor_critic_update: non-finite loss (policy=" +
                       std::to_string(stats.policy_loss) +
                       " value=" + std::to_string(stats.value_loss) + ")");
  GradMap grads = tape.backward(loss);
  stats.grad_norm = clip_global_norm(grads, cfg.grad_clip);
  if (stats.transitions > 0) stats.mean_entropy /= static_cast<float>(stats.transitions);
  return {std::move(grads), stats};
}

}  // namespace

UpdateStats actor_critic_update(const Agent& agent, ParamSet& params, RmsProp& opt,
                                std::span<const RolloutBatch> batches, const TrainConfig& cfg) {
  std::vector<AgentBatch> slots;
  slots.reserve(batches.size());
  for (const RolloutBatch& b : batches) slots.push_back({&agent, &b});
  auto [grads, stats] = compute_actor_critic_grads(slots, params, cfg);
  if (!grads.empty()) opt.step(params, grads);
  return stats;
}

UpdateStats actor_critic_update(const Agent& agent, ParamSet& params, RmsProp& opt,
                                const RolloutBatch& batch, const TrainConfig& cfg) {
  return actor_critic_update(agent, params, opt, std::span<const RolloutBatch>(&batch, 1), cfg);
}

// --- evaluation ----------------------------------------------------------------

EvalResult evaluate_greedy(const Agent& agent, const ParamSet& params, int episodes,
                           uint64_t seed) {
  EvalResult res;
  Rng rng(mix_seed(seed, kEvalStream));
  double entropy_sum = 0.0;
  long long entropy_ticks = 0;
  for (int e = 0; e < episodes; ++e) {
    GridWorld env(agent.task().grid_config(), mix_seed(seed, kEvalStream, static_cast<uint64_t>(e) + 1));
    MonitorState mon;
    Observation obs = env.render();
    float ep_return = 0.0f;
    int length = 0;
    while (true) {
      const Agent::ActResult act = agent.act(params, obs, rng, /*greedy=*/true);
      entropy_sum += act.entropy;
      ++entropy_ticks;
      const StepResult sr = env.step(static_cast<Action>(act.env_action));
      const MonitorOutcome mo = monitor_step(mon, agent.task(), sr.events, sr.truncated);
      ep_return += mo.reward;
      ++length;
      obs = sr.obs;
      if (mo.done) break;
    }
    res.mean_return += ep_return;
    res.mean_length += static_cast<float>(length);
  }
  res.mean_return /= static_cast<float>(episodes);
  res.mean_length /= static_cast<float>(episodes);
  res.mean_entropy =
      entropy_ticks > 0 ? static_cast<float>(entropy_sum / static_cast<double>(entropy_ticks))
                        : 0.0f;
  return res;
}

EvalResult random_policy_eval(const TaskSpec& spec, int episodes, uint64_t seed) {
  EvalResult res;
  Rng rng(mix_seed(seed, kEvalStream + 7));
  for (int e = 0; e < episodes; ++e) {
    GridWorld env(spec.grid_config(), mix_seed(seed, kEvalStream, static_cast<uint64_t>(e) + 1));
    MonitorState mon;
    float ep_return = 0.0f;
    int length = 0;
    while (true) {
      const Action a = static_cast<Action>(rng.uniform_int(kNumActions));
      const StepResult sr = env.step(a);
      const MonitorOutcome mo = monitor_step(mon, spec, sr.events, sr.truncated);
      ep_return += mo.reward;
      ++length;
      if (mo.done) break;
    }
    res.mean_return += ep_return;
    res.mean_length += static_cast<float>(length);
  }
  res.mean_return /= static_cast<float>(episodes);
  res.mean_length /= static_cast<float>(episodes);
  res.mean_entropy = std::log(static_cast<float>(kNumActions));
  return res;
}

// --- training driver -------------------------------------------------------------

namespace {

struct WorkerSlots {
  // Runner per assigned agent; episodes rotate round-robin.
  std::vector<size_t> agent_indices;
  std::vector<std::unique_ptr<EpisodeRunner>> runners;
  size_t cursor = 0;

  EpisodeRunner& current() { return *runners[cursor]; }
  void advance_if_episode_done() {
    if (!runners.empty()) cursor = (cursor + 1) % runners.size();
  }
};

class Evaluator {
public:
  Evaluator(const std::vector<const Agent*>& agents, const TrainConfig& cfg, uint64_t run_seed,
            const EvalCallback& on_eval, TrainOutcome& outcome)
      : agents_(agents), cfg_(cfg), run_seed_(run_seed), on_eval_(on_eval), outcome_(outcome),
        t0_(std::chrono::steady_clock::now()) {}

  // Returns true when a plateau stop is requested.
  bool run(long long steps, const ParamSet& params) {
    for (size_t i = 0; i < agents_.size(); ++i) {
      const std::string tag = agents_[i]->task().slug();
      EvalPoint pt;
      pt.steps = steps;
      pt.eval = evaluate_greedy(*agents_[i], params, cfg_.eval_episodes,
                                mix_seed(run_seed_, kEvalStream + 13 * (i + 1)));
      pt.wall_seconds = seconds_since(t0_);
      outcome_.curves[tag].push_back(pt);
      if (on_eval_) on_eval_(tag, pt);
    }
    return plateau_reached();
  }

private:
  bool plateau_reached() const {
    if (cfg_.plateau_window <= 0) return false;
    for (const auto& [tag, curve] : outcome_.curves) {
      if (curve.size() < static_cast<size_t>(cfg_.plateau_window)) return false;
    }
    for (const auto& [tag, curve] : outcome_.curves) {
      float lo = curve.back().eval.mean_return, hi = lo;
      for (size_t i = curve.size() - static_cast<size_t>(cfg_.plateau_window);
           i < curve.size(); ++i) {
        lo = std::min(lo, curve[i].eval.mean_return);
        hi = std::max(hi, curve[i].eval.mean_return);
      }
      if (hi - lo > cfg_.plateau_tolerance) return false;
    }
    return true;
  }

  const std::vector<const Agent*>& agents_;
  const TrainConfig& cfg_;
  uint64_t run_seed_;
  const EvalCallback& on_eval_;
  TrainOutcome& outcome_;
  std::chrono::steady_clock::time_point t0_;
};

TrainOutcome train_sync(const std::vector<const Agent*>& agents, ParamSet& params,
                        const TrainConfig& cfg, uint64_t run_seed, const EvalCallback& on_eval) {
  TrainOutcome outcome;
  Evaluator evaluator(agents, cfg, run_seed, on_eval, outcome);
  RmsProp opt(cfg.optimizer);

  std::vector<WorkerSlots> workers(static_cast<size_t>(cfg.workers));
  for (size_t a = 0; a < agents.size(); ++a) {
    WorkerSlots& w = workers[a % workers.size()];
    w.agent_indices.push_back(a);
  }
  // A worker with no agent assigned (more workers than agents) rotates over
  // all agents with its own environment stream.
  for (size_t w = 0; w < workers.size(); ++w) {
    if (workers[w].agent_indices.empty())
      for (size_t a = 0; a < agents.size(); ++a) workers[w].agent_indices.push_back(a);
    for (size_t a : workers[w].agent_indices)
      workers[w].runners.push_back(
          std::make_unique<EpisodeRunner>(*agents[a], run_seed, static_cast<int>(w)));
  }

  long long steps = 0;
  long long next_eval = 0;
  std::vector<RolloutBatch> round(workers.size());
  while (steps < cfg.total_steps) {
    if (steps >= next_eval) {
      if (evaluator.run(steps, params)) {
        outcome.plateau_stopped = true;
        break;
      }
      next_eval += cfg.eval_interval;
    }
    // One lockstep round: every worker contributes a rollout segment against
    // the same parameters, then a single update applies the summed gradients.
    std::vector<AgentBatch> slots;
    slots.reserve(workers.size());
    for (size_t w = 0; w < workers.size(); ++w) {
      round[w] = workers[w].current().collect(params, cfg.rollout_length, steps);
      slots.push_back({agents[workers[w].agent_indices[workers[w].cursor]], &round[w]});
    }
    auto [grads, stats] = compute_actor_critic_grads(slots, params, cfg);
    if (!grads.empty()) opt.step(params, grads);
    for (size_t w = 0; w < workers.size(); ++w)
      if (round[w].terminal_tail) workers[w].advance_if_episode_done();
  }
  if (!outcome.plateau_stopped) evaluator.run(steps, params);
  outcome.steps = steps;
  return outcome;
}

TrainOutcome train_async(const std::vector<const Agent*>& agents, ParamSet& params,
                         const TrainConfig& cfg, uint64_t run_seed,
                         const EvalCallback& on_eval) {
  TrainOutcome outcome;
  Evaluator evaluator(agents, cfg, run_seed, on_eval, outcome);
  RmsProp opt(cfg.optimizer);

  std::mutex master_mutex;  // guards params + opt
  std::atomic<long long> steps{0};
  std::atomic<bool> stop{false};

  auto worker_fn = [&](int worker_id) {
    std::vector<size_t> assigned;
    for (size_t a = 0; a < agents.size(); ++a)
      if (a % static_cast<size_t>(cfg.workers) == static_cast<size_t>(worker_id))
        assigned.push_back(a);
    if (assigned.empty())
      for (size_t a = 0; a < agents.size(); ++a) assigned.push_back(a);
    std::vector<std::unique_ptr<EpisodeRunner>> runners;
    for (size_t a : assigned)
      runners.push_back(std::make_unique<EpisodeRunner>(*agents[a], run_seed, worker_id));
    size_t cursor = 0;
    while (!stop.load(std::memory_order_relaxed)) {
      ParamSet snapshot;
      {
        std::lock_guard<std::mutex> lock(master_mutex);
        snapshot = params;
      }
      long long local = 0;
      RolloutBatch batch = runners[cursor]->collect(snapshot, cfg.rollout_length, local);
      const long long now = steps.fetch_add(local) + local;
      // Gradients are computed against the snapshot outside the lock; the
      // update itself is applied to the master serially (stale gradients are
      // tolerated by contract).
      const AgentBatch slot{agents[assigned[cursor]], &batch};
      auto [grads, stats] = compute_actor_critic_grads({&slot, 1}, snapshot, cfg);
      if (!grads.empty()) {
        std::lock_guard<std::mutex> lock(master_mutex);
        opt.step(params, grads);
      }
      if (batch.terminal_tail) cursor = (cursor + 1) % runners.size();
      if (now >= cfg.total_steps) stop.store(true);
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(cfg.workers));
  for (int w = 0; w < cfg.workers; ++w) threads.emplace_back(worker_fn, w);

  long long next_eval = 0;
  while (!stop.load()) {
    const long long now = steps.load();
    if (now >= next_eval) {
      ParamSet snapshot;
      {
        std::lock_guard<std::mutex> lock(master_mutex);
        snapshot = params;
      }
      if (evaluator.run(now, snapshot)) {
        outcome.plateau_stopped = true;
        stop.store(true);
        break;
      }
      next_eval += cfg.eval_interval;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  for (std::thread& t : threads) t.join();
  {
    std::lock_guard<std::mutex> lock(master_mutex);
    evaluator.run(steps.load(), params);
  }
  outcome.steps = steps.load();
  return outcome;
}

}  // namespace

TrainOutcome train_agents(const std::vector<const Agent*>& agents, ParamSet& params,
                          const TrainConfig& cfg, uint64_t run_seed,
                          const EvalCallback& on_eval) {
  if (agents.empty()) throw ConfigError("train_agents: no agents");
  if (cfg.workers < 1) throw ConfigError("train_agents: workers must be >= 1");
  if (cfg.total_steps <= 0) throw ConfigError("train_agents: total_steps must be > 0");
  if (cfg.gamma <= 0.0f || cfg.gamma > 1.0f)
    throw ConfigError("train_agents: gamma must be in (0, 1]");
  if (cfg.async_workers && cfg.workers > 1)
    return train_async(agents, params, cfg, run_seed, on_eval);
  return train_sync(agents, params, cfg, run_seed, on_eval);
}

// --- phases ---------------------------------------------------------------------

uint64_t run_seed_for(const TaskSpec& spec, uint64_t config_seed) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a over the slug
  for (char c : spec.slug()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return mix_seed(config_seed, h);
}

TrainOutcome train_skills(ParamSet& params, const TrainConfig& cfg,
                          const EvalCallback& on_eval) {
  std::vector<TreeAgent> agents;
  agents.reserve(kAllSkills.size());
  for (SkillId s : kAllSkills) agents.push_back(TreeAgent::for_skill(s));
  std::vector<const Agent*> ptrs;
  for (const TreeAgent& a : agents) ptrs.push_back(&a);
  return train_agents(ptrs, params, cfg, mix_seed(cfg.seed, 0x51C1), on_eval);
}

ParamSet prepare_composition_params(const TaskSpec& spec, const ParamSet& skills,
                                    uint64_t seed, const TransferInit* transfer) {
  ParamSet params;
  for (const auto& [name, t] : skills.entries()) {
    if (name.rfind("trunk.", 0) == 0 || name.rfind("policy.", 0) == 0)
      params.insert(name, t);
  }
  params.freeze_prefix("trunk.");
  params.freeze_prefix("policy.");

  const CompositionTree tree = build_tree(spec);
  Rng rng(run_seed_for(spec, seed));
  for (const std::string& path : tree.comp_paths()) {
    if (transfer) {
      auto it = transfer->by_path.find(path);
      if (it == transfer->by_path.end() || it->second.source == nullptr)
        throw ConfigError("prepare_composition_params: no transfer source for node " + path);
      const std::string src = comp_layer_name(it->second.source_path);
      const std::string dst = comp_layer_name(path);
      if (!it->second.source->contains(src + ".weight"))
        throw MissingPrerequisiteError("transfer checkpoint lacks " + src + ".weight");
      params.insert(dst + ".weight", it->second.source->at(src + ".weight"));
      params.insert(dst + ".bias", it->second.source->at(src + ".bias"));
    } else {
      add_comp_params(params, path, rng);
    }
  }
  add_value_head_params(params, spec.slug(), rng);
  return params;
}

TrainOutcome train_composition(const TaskSpec& spec, ParamSet& params, const TrainConfig& cfg,
                               const EvalCallback& on_eval) {
  TreeAgent agent = TreeAgent::for_task(spec);
  return train_agents({&agent}, params, cfg, run_seed_for(spec, cfg.seed), on_eval);
}

ParamSet prepare_multitask_params(const std::vector<TaskSpec>& tasks, const ParamSet& skills,
                                  uint64_t seed) {
  if (tasks.empty()) throw ConfigError("prepare_multitask_params: no tasks");
  for (const TaskSpec& t : tasks)
    if (t.template_kind != tasks.front().template_kind)
      throw ConfigError("multitask composition requires one template type, got '" +
                        std::string(to_string(tasks.front().template_kind)) + "' and '" +
                        std::string(to_string(t.template_kind)) + "'");
  ParamSet params = prepare_composition_params(tasks.front(), skills, seed);
  Rng rng(mix_seed(seed, 0xBEEF));
  for (size_t i = 1; i < tasks.size(); ++i)
    add_value_head_params(params, tasks[i].slug(), rng);
  return params;
}

TrainOutcome train_multitask_composition(const std::vector<TaskSpec>& tasks, ParamSet& params,
                                         const TrainConfig& cfg,
                                         const EvalCallback& on_eval) {
  std::vector<TreeAgent> agents;
  agents.reserve(tasks.size());
  for (const TaskSpec& t : tasks) agents.push_back(TreeAgent::for_task(t));
  std::vector<const Agent*> ptrs;
  for (const TreeAgent& a : agents) ptrs.push_back(&a);
  return train_agents(ptrs, params, cfg, run_seed_for(tasks.front(), cfg.seed), on_eval);
}

}  // namespace composenet
