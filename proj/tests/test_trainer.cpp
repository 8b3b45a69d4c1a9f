#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "composenet/errors.hpp"
#include "composenet/trainer.hpp"
#include "support/fd_reference.hpp"

using namespace composenet;

namespace {

RolloutBatch batch_of(std::vector<float> rewards, std::vector<float> values, bool terminal,
                      float bootstrap = 0.0f) {
  RolloutBatch b;
  for (size_t i = 0; i < rewards.size(); ++i) {
    Transition t;
    t.reward = rewards[i];
    t.value = values[i];
    t.done = terminal && i + 1 == rewards.size();
    b.transitions.push_back(t);
  }
  b.terminal_tail = terminal;
  b.bootstrap_value = terminal ? 0.0f : bootstrap;
  return b;
}

TrainConfig tiny_train_config(long long steps) {
  TrainConfig cfg;
  cfg.total_steps = steps;
  cfg.eval_interval = steps;  // eval at 0 and at the end
  cfg.eval_episodes = 4;
  return cfg;
}

}  // namespace

TEST_CASE("returns: single terminal transition") {
  const RolloutBatch b = batch_of({1.0f}, {0.0f}, true);
  const ReturnsAdvantages ra = compute_returns_advantages(b, 0.99f);
  CHECK(ra.returns == std::vector<float>{1.0f});
  CHECK(ra.advantages == std::vector<float>{1.0f});
}

TEST_CASE("returns: hand recursion on [0, 0, 1]") {
  const RolloutBatch b = batch_of({0.0f, 0.0f, 1.0f}, {0.0f, 0.0f, 0.0f}, true);
  const ReturnsAdvantages ra = compute_returns_advantages(b, 0.99f);
  CHECK(ra.returns[0] == doctest::Approx(0.9801f));
  CHECK(ra.returns[1] == doctest::Approx(0.99f));
  CHECK(ra.returns[2] == doctest::Approx(1.0f));
}

TEST_CASE("returns: zero rewards and zero bootstrap give zero returns") {
  const RolloutBatch b = batch_of({0.0f, 0.0f, 0.0f, 0.0f}, {0.1f, 0.2f, 0.3f, 0.4f}, false, 0.0f);
  const ReturnsAdvantages ra = compute_returns_advantages(b, 0.99f);
  for (float r : ra.returns) CHECK(r == 0.0f);
  CHECK(ra.advantages[1] == doctest::Approx(-0.2f));
}

TEST_CASE("returns: recursion property against a direct summation oracle") {
  Rng rng(71);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + rng.uniform_int(30);
    std::vector<float> rewards, values;
    for (int i = 0; i < n; ++i) {
      rewards.push_back(rng.uniform(-1.0f, 1.0f));
      values.push_back(rng.uniform(-1.0f, 1.0f));
    }
    const bool terminal = rng.uniform() < 0.5f;
    const float bootstrap = rng.uniform(-1.0f, 1.0f);
    const float gamma = 0.99f;
    const RolloutBatch b = batch_of(rewards, values, terminal, bootstrap);
    const ReturnsAdvantages ra = compute_returns_advantages(b, gamma);

    // direct summation: R_t = sum_k gamma^k r_{t+k} + gamma^{n-t} bootstrap
    for (int t = 0; t < n; ++t) {
      double acc = 0.0, g = 1.0;
      for (int k = t; k < n; ++k) {
        acc += g * rewards[static_cast<size_t>(k)];
        g *= gamma;
      }
      if (!terminal) acc += g * bootstrap;
      CHECK(std::fabs(ra.returns[static_cast<size_t>(t)] - acc) < 1e-4);
      // and the recursion holds up to 32-bit rounding (fused multiply-add
      // contraction shifts the last bit)
      const float next = (t + 1 < n) ? ra.returns[static_cast<size_t>(t) + 1]
                                     : (terminal ? 0.0f : bootstrap);
      const double expected = static_cast<double>(rewards[static_cast<size_t>(t)]) +
                              static_cast<double>(gamma) * static_cast<double>(next);
      CHECK(std::fabs(ra.returns[static_cast<size_t>(t)] - expected) <=
            1.2e-7 * std::max(1.0, std::fabs(expected)));
    }
  }
}

TEST_CASE("update: zero advantages and exact value fit leave only the entropy term") {
  const TaskSpec spec = compile_task("F r");
  ParamSet params = init_skill_params(3);
  TreeAgent agent = TreeAgent::for_skill(SkillId::CollectR);
  RmsProp opt;

  // Transition with reward 0, non-terminal, bootstrap equal to the actual
  // state values -> returns equal values -> advantages 0, value diff 0.
  EpisodeRunner runner(agent, 99, 0);
  long long steps = 0;
  RolloutBatch b = runner.collect(params, 1, steps);
  REQUIRE(b.transitions.size() == 1);
  b.transitions[0].reward = 0.0f;
  b.transitions[0].done = false;
  b.terminal_tail = false;
  // R = gamma * bootstrap; choose bootstrap so R equals V(s0) exactly
  b.bootstrap_value = b.transitions[0].value / 0.99f;

  TrainConfig cfg;
  const UpdateStats stats = actor_critic_update(agent, params, opt, b, cfg);
  CHECK(stats.policy_loss == doctest::Approx(0.0f).epsilon(1e-5));
  CHECK(stats.value_loss == doctest::Approx(0.0f).epsilon(1e-4));
  CHECK(stats.mean_entropy > 0.0f);
  CHECK(stats.grad_norm > 0.0f);  // entropy still drives an update
}

TEST_CASE("update: a uniform policy contributes ln 4 of entropy per step") {
  const TaskSpec spec = compile_task("F r");
  // zero-initialized trunk and policy -> exactly uniform action distribution
  ParamSet params;
  for (int layer = 1; layer <= 3; ++layer) {
    const std::string base = trunk_layer_name(SkillId::CollectR, layer);
    params.insert(base + ".weight", Tensor({128, layer == 1 ? 225 : 128}));
    params.insert(base + ".bias", Tensor({128}));
  }
  params.insert("policy.weight", Tensor({4, 128}));
  params.insert("policy.bias", Tensor({4}));
  Rng rng(5);
  add_value_head_params(params, "collect_r", rng);

  TreeAgent agent = TreeAgent::for_skill(SkillId::CollectR);
  EpisodeRunner runner(agent, 7, 0);
  long long steps = 0;
  const RolloutBatch b = runner.collect(params, 8, steps);
  RmsProp opt;
  TrainConfig cfg;
  const UpdateStats stats = actor_critic_update(agent, params, opt, b, cfg);
  CHECK(stats.mean_entropy == doctest::Approx(std::log(4.0f)).epsilon(1e-4));
}

TEST_CASE("update: single-transition gradient matches finite differences") {
  const TaskSpec spec = compile_task("!g U b");
  const ParamSet skills = init_skill_params(41);
  ParamSet params = prepare_composition_params(spec, skills, 13);
  const CompositionTree tree = build_tree(spec);
  TreeAgent agent = TreeAgent::for_task(spec);

  EpisodeRunner runner(agent, 55, 0);
  long long steps = 0;
  RolloutBatch b = runner.collect(params, 1, steps);
  REQUIRE(b.transitions.size() == 1);
  b.transitions[0].reward = 0.25f;
  b.transitions[0].done = true;
  b.terminal_tail = true;

  const TrainConfig cfg;
  const ReturnsAdvantages ra = compute_returns_advantages(b, cfg.gamma);

  // Reconstruct the documented loss on a fresh tape to extract its gradient.
  Tape tape(params);
  const TapedPolicyValue tpv = agent.forward_taped(tape, b.transitions[0].obs);
  const auto logp = tape.log_softmax(tpv.logits);
  const auto logp_a = tape.pick(logp, b.transitions[0].action);
  const auto diff = tape.sub(tape.constant(Tensor::scalar(ra.returns[0])), tpv.value);
  const auto probs = tape.softmax(tpv.logits);
  const auto neg_ent = tape.sum(tape.mul(probs, logp));
  auto loss = tape.scale(logp_a, -ra.advantages[0]);
  loss = tape.add(loss, tape.scale(tape.square(diff), cfg.value_coef));
  loss = tape.add(loss, tape.scale(neg_ent, cfg.entropy_coef));
  const GradMap grads = tape.backward(loss);

  fdref::A3cProbeSpec probe;
  probe.obs = &b.transitions[0].obs;
  probe.tree = &tree;
  probe.value_slug = spec.slug();
  probe.action = b.transitions[0].action;
  probe.ret = ra.returns[0];
  probe.advantage = ra.advantages[0];
  probe.value_coef = cfg.value_coef;
  probe.entropy_coef = cfg.entropy_coef;

  Rng pick(61);
  int checked = 0;
  for (const auto& [name, g] : grads) {
    for (int rep = 0; rep < 6; ++rep) {
      const int coord = pick.uniform_int(g.size());
      const fdref::FdResult fd = fdref::a3c_loss_fd(params, probe, name, coord, 1e-4);
      if (!fd.smooth) continue;
      INFO(name, "[", coord, "] fd=", fd.fd, " ad=", g[coord]);
      CHECK(fdref::rel_err(fd.fd, g[coord]) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 12);
}

TEST_CASE("update: NaN loss aborts with a numeric error") {
  const TaskSpec spec = compile_task("F r");
  ParamSet params = init_skill_params(9);
  params.mutable_at("policy.weight")[0] = std::nanf("");
  TreeAgent agent = TreeAgent::for_skill(SkillId::CollectR);
  RolloutBatch b;
  Transition t;
  t.action = 0;
  t.reward = 1.0f;
  t.done = true;
  b.transitions.push_back(t);
  RmsProp opt;
  TrainConfig cfg;
  CHECK_THROWS_AS(actor_critic_update(agent, params, opt, b, cfg), NumericError);
}

TEST_CASE("rollouts: segments respect the length bound and stop at episode end") {
  TreeAgent agent = TreeAgent::for_skill(SkillId::EvadeR);
  ParamSet params = init_skill_params(17);
  EpisodeRunner runner(agent, 123, 0);
  long long steps = 0;
  for (int i = 0; i < 30; ++i) {
    const RolloutBatch b = runner.collect(params, 20, steps);
    CHECK(b.transitions.size() >= 1);
    CHECK(b.transitions.size() <= 20);
    if (b.terminal_tail) {
      CHECK(b.transitions.back().done);
      CHECK(b.bootstrap_value == 0.0f);
    } else {
      CHECK_FALSE(b.transitions.back().done);
    }
  }
  CHECK(steps > 0);
}

TEST_CASE("run_seed_for depends on task and seed, not on the caller") {
  const TaskSpec a = compile_task("!g U b");
  const TaskSpec b = compile_task("F r | F b");
  CHECK(run_seed_for(a, 7) == run_seed_for(a, 7));
  CHECK(run_seed_for(a, 7) != run_seed_for(a, 8));
  CHECK(run_seed_for(a, 7) != run_seed_for(b, 7));
}

TEST_CASE("training: single-worker runs are bit-identical across repeats") {
  auto run_once = [] {
    ParamSet params = init_skill_params(0);
    TrainConfig cfg = tiny_train_config(1500);
    cfg.seed = 4;
    TreeAgent agent = TreeAgent::for_skill(SkillId::CollectR);
    const TrainOutcome out = train_agents({&agent}, params, cfg, run_seed_for(agent.task(), 4));
    return std::pair{params, out};
  };
  const auto [p1, o1] = run_once();
  const auto [p2, o2] = run_once();
  REQUIRE(p1.size() == p2.size());
  for (const auto& [name, t] : p1.entries()) CHECK(t.bytes_equal(p2.at(name)));
  REQUIRE(o1.curves.size() == o2.curves.size());
  for (const auto& [tag, curve] : o1.curves) {
    const auto& other = o2.curves.at(tag);
    REQUIRE(curve.size() == other.size());
    for (size_t i = 0; i < curve.size(); ++i) {
      CHECK(curve[i].steps == other[i].steps);
      CHECK(curve[i].eval.mean_return == other[i].eval.mean_return);
      CHECK(curve[i].eval.mean_length == other[i].eval.mean_length);
    }
  }
}

TEST_CASE("training: frozen bytes survive async workers") {
  const TaskSpec spec = compile_task("!g U b");
  const ParamSet skills = init_skill_params(51);
  ParamSet params = prepare_composition_params(spec, skills, 19);
  std::map<std::string, Tensor> frozen_before;
  for (const std::string& name : params.frozen()) frozen_before.emplace(name, params.at(name));

  TrainConfig cfg = tiny_train_config(4000);
  cfg.workers = 3;
  cfg.async_workers = true;
  cfg.eval_episodes = 2;
  train_composition(spec, params, cfg);

  for (const auto& [name, before] : frozen_before) CHECK(params.at(name).bytes_equal(before));
}

TEST_CASE("training: lockstep multi-worker also respects the freeze set") {
  const TaskSpec spec = compile_task("F r | F g");
  const ParamSet skills = init_skill_params(53);
  ParamSet params = prepare_composition_params(spec, skills, 23);
  std::map<std::string, Tensor> frozen_before;
  for (const std::string& name : params.frozen()) frozen_before.emplace(name, params.at(name));

  TrainConfig cfg = tiny_train_config(3000);
  cfg.workers = 4;
  train_composition(spec, params, cfg);
  for (const auto& [name, before] : frozen_before) CHECK(params.at(name).bytes_equal(before));
}

TEST_CASE("training: policy entropy stays within [0, ln 4]") {
  ParamSet params = init_skill_params(57);
  TrainConfig cfg = tiny_train_config(2000);
  TreeAgent agent = TreeAgent::for_skill(SkillId::CollectG);
  const TrainOutcome out = train_agents({&agent}, params, cfg, 31);
  for (const auto& [tag, curve] : out.curves)
    for (const EvalPoint& pt : curve) {
      CHECK(pt.eval.mean_entropy >= 0.0f);
      CHECK(pt.eval.mean_entropy <= std::log(4.0f) + 1e-4f);
    }
}

TEST_CASE("multitask: mixed template types are rejected") {
  const ParamSet skills = init_skill_params(59);
  const std::vector<TaskSpec> mixed = {compile_task("!b U r"), compile_task("F r | F g")};
  CHECK_THROWS_AS(prepare_multitask_params(mixed, skills, 1), ConfigError);
}

TEST_CASE("multitask: five while-tasks share one composition layer") {
  const ParamSet skills = init_skill_params(61);
  const std::vector<TaskSpec> tasks = {
      compile_task("!b U r"), compile_task("!r U b"), compile_task("!r U g"),
      compile_task("!g U r"), compile_task("!b U g")};  // held out: !g U b
  const ParamSet params = prepare_multitask_params(tasks, skills, 2);
  CHECK(params.contains("comp.root.weight"));
  CHECK(params.names_with_prefix("comp.").size() == 2);  // one layer: weight + bias
  for (const TaskSpec& t : tasks)
    CHECK(params.contains(value_head_name(t.slug()) + ".weight"));
}

TEST_CASE("policy-layer names are shared by every skill's forward path") {
  ParamSet params = init_skill_params(63);
  Rng rng(3);
  const Observation obs = render(reset_world(GridConfig{}, 5));
  for (SkillId s : kAllSkills) {
    Tape tape(params);
    TreeAgent agent = TreeAgent::for_skill(s);
    const TapedPolicyValue tpv = agent.forward_taped(tape, obs);
    const GradMap grads = tape.backward(tape.pick(tape.log_softmax(tpv.logits), 0));
    CHECK(grads.count("policy.weight") == 1);
    CHECK(grads.count("policy.bias") == 1);
  }
}

TEST_CASE("plateau stop: flat curves end training early") {
  ParamSet params = init_skill_params(67);
  TrainConfig cfg;
  cfg.total_steps = 50'000;
  cfg.eval_interval = 500;
  cfg.eval_episodes = 2;
  cfg.plateau_window = 3;
  cfg.plateau_tolerance = 10.0f;  // any curve counts as flat
  TreeAgent agent = TreeAgent::for_skill(SkillId::CollectR);
  const TrainOutcome out = train_agents({&agent}, params, cfg, 77);
  CHECK(out.plateau_stopped);
  CHECK(out.steps < cfg.total_steps);
}
