#include "composenet/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "composenet/errors.hpp"

namespace composenet {

namespace {

using nlohmann::json;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

void require_keys(const json& obj, const std::string& where,
                  const std::vector<std::string>& allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const std::string& a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T field(const json& obj, const std::string& where, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

constexpr uint64_t kZeroShotStream = 404;
constexpr uint64_t kTraceStream = 505;

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Skills: return "skills";
    case Method::ComposeNet: return "composenet";
    case Method::Scratch: return "scratch";
    case Method::MetaController: return "metacontroller";
    case Method::AblationWrongSkills: return "ablation_wrong_skills";
    case Method::AblationPolicyRetrain: return "ablation_policy_retrain";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::Skills, Method::ComposeNet, Method::Scratch, Method::MetaController,
                   Method::AblationWrongSkills, Method::AblationPolicyRetrain})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method '" + s + "'");
}

TaskSpec ExperimentConfig::task_spec(size_t i) const {
  if (i >= tasks.size()) throw ConfigError("config has no task at index " + std::to_string(i));
  return compile_task(tasks[i]);
}

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(source_name + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(source_name + ": config must be a JSON object");
  require_keys(doc, source_name,
               {"version", "name", "method", "task", "tasks", "train", "skills_checkpoint",
                "transfer_checkpoints", "eval_checkpoint", "ablation", "trace_episodes",
                "out_dir", "plot"});

  ExperimentConfig cfg;
  cfg.version = field<int>(doc, source_name, "version", 1);
  if (cfg.version != 1)
    throw ConfigError(source_name + ": unsupported config version " +
                      std::to_string(cfg.version));
  cfg.name = field<std::string>(doc, source_name, "name", "");
  if (cfg.name.empty()) throw ConfigError(source_name + ": 'name' is required");
  if (!doc.contains("method")) throw ConfigError(source_name + ": 'method' is required");
  cfg.method = method_from_string(field<std::string>(doc, source_name, "method", ""));

  if (doc.contains("task") && doc.contains("tasks"))
    throw ConfigError(source_name + ": give either 'task' or 'tasks', not both");
  if (doc.contains("task")) cfg.tasks = {field<std::string>(doc, source_name, "task", "")};
  if (doc.contains("tasks")) cfg.tasks = field<std::vector<std::string>>(doc, source_name, "tasks", {});
  for (const std::string& t : cfg.tasks) compile_task(t);  // full up-front validation

  if (doc.contains("train")) {
    const json& tr = doc.at("train");
    const std::string where = source_name + ".train";
    if (!tr.is_object()) throw ConfigError(where + ": must be an object");
    require_keys(tr, where,
                 {"workers", "async_workers", "rollout_length", "gamma", "entropy_coef",
                  "value_coef", "grad_clip", "lr", "rmsprop_decay", "rmsprop_epsilon",
                  "total_steps", "eval_interval", "eval_episodes", "plateau_window",
                  "plateau_tolerance", "seed"});
    TrainConfig& t = cfg.train;
    t.workers = field<int>(tr, where, "workers", t.workers);
    t.async_workers = field<bool>(tr, where, "async_workers", t.async_workers);
    t.rollout_length = field<int>(tr, where, "rollout_length", t.rollout_length);
    t.gamma = field<float>(tr, where, "gamma", t.gamma);
    t.entropy_coef = field<float>(tr, where, "entropy_coef", t.entropy_coef);
    t.value_coef = field<float>(tr, where, "value_coef", t.value_coef);
    t.grad_clip = field<float>(tr, where, "grad_clip", t.grad_clip);
    t.optimizer.lr = field<float>(tr, where, "lr", t.optimizer.lr);
    t.optimizer.decay = field<float>(tr, where, "rmsprop_decay", t.optimizer.decay);
    t.optimizer.epsilon = field<float>(tr, where, "rmsprop_epsilon", t.optimizer.epsilon);
    t.total_steps = field<long long>(tr, where, "total_steps", t.total_steps);
    t.eval_interval = field<long long>(tr, where, "eval_interval", t.eval_interval);
    t.eval_episodes = field<int>(tr, where, "eval_episodes", t.eval_episodes);
    t.plateau_window = field<int>(tr, where, "plateau_window", t.plateau_window);
    t.plateau_tolerance = field<float>(tr, where, "plateau_tolerance", t.plateau_tolerance);
    t.seed = field<uint64_t>(tr, where, "seed", t.seed);
  }
  if (cfg.train.total_steps <= 0) throw ConfigError(source_name + ".train: total_steps must be > 0");
  if (cfg.train.workers < 1) throw ConfigError(source_name + ".train: workers must be >= 1");
  if (!(cfg.train.gamma > 0.0f && cfg.train.gamma <= 1.0f))
    throw ConfigError(source_name + ".train: gamma must be in (0, 1]");
  if (cfg.train.eval_episodes < 1)
    throw ConfigError(source_name + ".train: eval_episodes must be >= 1");
  if (cfg.train.eval_interval < 1)
    throw ConfigError(source_name + ".train: eval_interval must be >= 1");

  cfg.skills_checkpoint = field<std::string>(doc, source_name, "skills_checkpoint", "");
  cfg.transfer_checkpoints =
      field<std::vector<std::string>>(doc, source_name, "transfer_checkpoints", {});
  cfg.eval_checkpoint = field<std::string>(doc, source_name, "eval_checkpoint", "");
  cfg.trace_episodes = field<int>(doc, source_name, "trace_episodes", 0);
  cfg.out_dir = field<std::string>(doc, source_name, "out_dir", "out");

  if (doc.contains("ablation")) {
    const json& ab = doc.at("ablation");
    const std::string where = source_name + ".ablation";
    if (!ab.is_object()) throw ConfigError(where + ": must be an object");
    require_keys(ab, where, {"substitute_skills", "retrain_trunk"});
    cfg.substitute_skills =
        field<std::vector<std::string>>(ab, where, "substitute_skills", {});
    cfg.retrain_trunk = field<std::string>(ab, where, "retrain_trunk", "");
  }

  // Method-specific requirements, checked before anything runs.
  auto need_one_task = [&] {
    if (cfg.tasks.size() != 1)
      throw ConfigError(source_name + ": method '" + to_string(cfg.method) +
                        "' requires exactly one task");
  };
  switch (cfg.method) {
    case Method::Skills:
      if (!cfg.tasks.empty())
        throw ConfigError(source_name + ": method 'skills' trains all six skills; remove 'task'");
      break;
    case Method::ComposeNet:
      if (cfg.tasks.empty())
        throw ConfigError(source_name + ": method 'composenet' requires 'task' or 'tasks'");
      if (cfg.skills_checkpoint.empty())
        throw ConfigError(source_name + ": method 'composenet' requires 'skills_checkpoint'");
      if (cfg.tasks.size() > 1) {
        const TemplateKind kind = cfg.task_spec(0).template_kind;
        for (size_t i = 1; i < cfg.tasks.size(); ++i)
          if (cfg.task_spec(i).template_kind != kind)
            throw ConfigError(source_name + ": multitask tasks must share one template type");
      }
      break;
    case Method::Scratch:
      need_one_task();
      break;
    case Method::MetaController:
      need_one_task();
      if (cfg.skills_checkpoint.empty())
        throw ConfigError(source_name + ": method 'metacontroller' requires 'skills_checkpoint'");
      break;
    case Method::AblationWrongSkills: {
      need_one_task();
      if (cfg.skills_checkpoint.empty())
        throw ConfigError(source_name +
                          ": method 'ablation_wrong_skills' requires 'skills_checkpoint'");
      const size_t arity = relevant_skills_for(cfg.task_spec(0)).size();
      if (cfg.substitute_skills.size() != arity)
        throw ConfigError(source_name + ": ablation.substitute_skills must name " +
                          std::to_string(arity) + " skills for this task");
      for (const std::string& s : cfg.substitute_skills) skill_from_string(s);
      break;
    }
    case Method::AblationPolicyRetrain:
      need_one_task();
      if (cfg.skills_checkpoint.empty())
        throw ConfigError(source_name +
                          ": method 'ablation_policy_retrain' requires 'skills_checkpoint'");
      if (cfg.retrain_trunk.empty())
        throw ConfigError(source_name + ": ablation.retrain_trunk is required");
      skill_from_string(cfg.retrain_trunk);
      break;
  }

  cfg.config_hash = hex64(fnv1a(doc.dump()));
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config file not found: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_experiment_config(ss.str(), path);
}

// --- helpers ---------------------------------------------------------------

namespace {

LoadedCheckpoint load_skills_or_throw(const ExperimentConfig& cfg,
                                      const std::vector<SkillId>& needed) {
  if (cfg.skills_checkpoint.empty())
    throw MissingPrerequisiteError("run '" + cfg.name + "': no skills checkpoint configured");
  LoadedCheckpoint ck = load_checkpoint(cfg.skills_checkpoint);
  for (SkillId s : needed)
    if (!ck.params.contains(trunk_layer_name(s, 1) + ".weight"))
      throw MissingPrerequisiteError("skills checkpoint " + cfg.skills_checkpoint +
                                     " lacks trunk for " + to_string(s));
  if (!ck.params.contains(std::string(kPolicyLayerName) + ".weight"))
    throw MissingPrerequisiteError("skills checkpoint " + cfg.skills_checkpoint +
                                   " lacks the policy layer");
  return ck;
}

std::string run_prefix(const ExperimentConfig& cfg) {
  return cfg.out_dir + "/" + cfg.name + "_seed" + std::to_string(cfg.train.seed);
}

// Streams evaluation points into one metrics file per curve tag.
class MetricsSink {
public:
  MetricsSink(const ExperimentConfig& cfg, bool multi_tag)
      : cfg_(cfg), multi_tag_(multi_tag) {}

  EvalCallback callback() {
    return [this](const std::string& tag, const EvalPoint& pt) {
      MetricsWriter& w = writer_for(tag);
      MetricsRow row;
      row.steps = pt.steps;
      row.mean_return = pt.eval.mean_return;
      row.mean_length = pt.eval.mean_length;
      row.entropy = pt.eval.mean_entropy;
      row.seed = cfg_.train.seed;
      row.wall_seconds = pt.wall_seconds;
      w.append(row);
    };
  }

  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    for (const auto& [_, w] : writers_) out.push_back(w->path());
    return out;
  }

private:
  MetricsWriter& writer_for(const std::string& tag) {
    auto it = writers_.find(tag);
    if (it == writers_.end()) {
      const std::string path = cfg_.out_dir + "/" + cfg_.name + (multi_tag_ ? "." + tag : "") +
                               "_seed" + std::to_string(cfg_.train.seed) + ".csv";
      it = writers_.emplace(tag, std::make_unique<MetricsWriter>(path, cfg_.config_hash,
                                                                 cfg_.train.seed))
               .first;
    }
    return *it->second;
  }

  const ExperimentConfig& cfg_;
  bool multi_tag_;
  std::map<std::string, std::unique_ptr<MetricsWriter>> writers_;
};

CheckpointMetadata base_metadata(const ExperimentConfig& cfg, long long steps) {
  CheckpointMetadata meta;
  meta["name"] = cfg.name;
  meta["method"] = to_string(cfg.method);
  meta["config_hash"] = cfg.config_hash;
  meta["seed"] = std::to_string(cfg.train.seed);
  meta["steps"] = std::to_string(steps);
  if (!cfg.tasks.empty()) {
    std::string joined;
    for (const std::string& t : cfg.tasks) joined += (joined.empty() ? "" : ";") + t;
    meta["tasks"] = joined;
    meta["template_kind"] = to_string(cfg.task_spec(0).template_kind);
  }
  if (!cfg.substitute_skills.empty()) {
    std::string joined;
    for (const std::string& s : cfg.substitute_skills) joined += (joined.empty() ? "" : ";") + s;
    meta["substitute_skills"] = joined;
  }
  if (!cfg.retrain_trunk.empty()) meta["retrain_trunk"] = cfg.retrain_trunk;
  return meta;
}

void dump_traces(const Agent& agent, const ParamSet& params, const ExperimentConfig& cfg) {
  if (cfg.trace_episodes <= 0) return;
  const GridConfig gc = agent.task().grid_config();
  Rng rng(mix_seed(cfg.train.seed, kTraceStream));
  for (int e = 0; e < cfg.trace_episodes; ++e) {
    GridWorld env(gc, mix_seed(cfg.train.seed, kTraceStream, static_cast<uint64_t>(e) + 1));
    MonitorState mon;
    std::ofstream f(run_prefix(cfg) + "_trace_ep" + std::to_string(e) + ".txt");
    f << trace_line(gc, env.state(), EventSet{}) << "\n";
    Observation obs = env.render();
    while (true) {
      const Agent::ActResult act = agent.act(params, obs, rng, /*greedy=*/true);
      const StepResult sr = env.step(static_cast<Action>(act.env_action));
      const MonitorOutcome mo = monitor_step(mon, agent.task(), sr.events, sr.truncated);
      f << trace_line(gc, env.state(), sr.events) << "\n";
      obs = sr.obs;
      if (mo.done) break;
    }
  }
}

// Frozen single trunk + fresh trainable policy layer and value head; no
// composition layer.
class RetrainPolicyAgent : public Agent {
public:
  RetrainPolicyAgent(TaskSpec spec, SkillId trunk)
      : spec_(std::move(spec)), trunk_(trunk), value_slug_(spec_.slug()) {}

  static constexpr const char* kLayerName = "policy_retrain";

  static void add_params(ParamSet& params, const std::string& task_slug, uint64_t seed) {
    Rng rng(mix_seed(seed, 0x9E7A));
    add_dense_params(params, kLayerName, ModelDims::kActions, ModelDims::kEmbedding, rng);
    add_value_head_params(params, task_slug, rng);
  }

  ActResult act(const ParamSet& params, const Observation& obs, Rng& rng,
                bool greedy) const override {
    const Tensor emb = trunk_forward(params, obs, trunk_);
    const Tensor logits =
        dense_forward(emb, params.at(std::string(kLayerName) + ".weight"),
                      params.at(std::string(kLayerName) + ".bias"), Activation::None);
    const Tensor probs = softmax(logits);
    ActResult r;
    r.action = greedy ? argmax_index(probs) : sample_categorical(probs.span(), rng);
    r.env_action = r.action;
    r.log_prob = std::log(probs[r.action]);
    r.value = value_of(params, emb);
    r.entropy = entropy_of(probs);
    return r;
  }

  float state_value(const ParamSet& params, const Observation& obs) const override {
    return value_of(params, trunk_forward(params, obs, trunk_));
  }

  TapedPolicyValue forward_taped(Tape& tape, const Observation& obs) const override {
    Tape::NodeId h = tape.constant(obs.to_tensor());
    for (int layer = 1; layer <= 3; ++layer)
      h = tape.dense(h, trunk_layer_name(trunk_, layer), Activation::Relu);
    TapedPolicyValue out;
    out.logits = tape.dense(h, kLayerName, Activation::None);
    out.value = tape.pick(tape.dense(h, value_head_name(value_slug_), Activation::None), 0);
    return out;
  }

  const TaskSpec& task() const override { return spec_; }

private:
  float value_of(const ParamSet& params, const Tensor& emb) const {
    const std::string vh = value_head_name(value_slug_);
    return dense_forward(emb, params.at(vh + ".weight"), params.at(vh + ".bias"),
                         Activation::None)[0];
  }

  TaskSpec spec_;
  SkillId trunk_;
  std::string value_slug_;
};

EvalResult last_eval_mean(const TrainOutcome& outcome) {
  EvalResult mean;
  int n = 0;
  for (const auto& [tag, curve] : outcome.curves) {
    if (curve.empty()) continue;
    mean.mean_return += curve.back().eval.mean_return;
    mean.mean_length += curve.back().eval.mean_length;
    mean.mean_entropy += curve.back().eval.mean_entropy;
    ++n;
  }
  if (n > 0) {
    mean.mean_return /= static_cast<float>(n);
    mean.mean_length /= static_cast<float>(n);
    mean.mean_entropy /= static_cast<float>(n);
  }
  return mean;
}

}  // namespace

TransferInit make_transfer_init(const TaskSpec& target,
                                const std::vector<const LoadedCheckpoint*>& sources) {
  auto kind_of = [](const LoadedCheckpoint* ck) {
    auto it = ck->meta.find("template_kind");
    if (it == ck->meta.end())
      throw ConfigError("transfer checkpoint has no template_kind metadata");
    return it->second;
  };
  auto find_kind = [&](const std::string& kind) -> const LoadedCheckpoint* {
    for (const LoadedCheckpoint* ck : sources)
      if (kind_of(ck) == kind) return ck;
    throw MissingPrerequisiteError("no transfer checkpoint of template '" + kind +
                                   "' for target task " + target.slug());
  };

  TransferInit init;
  if (!is_hierarchy(target.template_kind)) {
    if (sources.size() != 1)
      throw ConfigError("flat-task transfer takes exactly one source checkpoint");
    const LoadedCheckpoint* src = sources[0];
    if (kind_of(src) != to_string(target.template_kind))
      throw ConfigError("transfer checkpoint template '" + kind_of(src) +
                        "' does not match target template '" +
                        to_string(target.template_kind) + "'");
    init.by_path["root"] = {&src->params, "root"};
    return init;
  }
  // Hierarchies: the outer layer comes from while-tasks, the inner layer from
  // the inner template's tasks.
  init.by_path["root"] = {&find_kind("while")->params, "root"};
  if (target.template_kind == TemplateKind::HierAndUntil)
    init.by_path["root.1"] = {&find_kind("and")->params, "root"};
  else
    init.by_path["root.2"] = {&find_kind("or")->params, "root"};
  return init;
}

namespace {

RunArtifacts finish_run(const ExperimentConfig& cfg, const TrainOutcome& outcome,
                        const ParamSet& params, const MetricsSink& sink,
                        const Agent* trace_agent) {
  RunArtifacts out;
  out.checkpoint_prefix = run_prefix(cfg);
  save_checkpoint(out.checkpoint_prefix, params, base_metadata(cfg, outcome.steps));
  out.metrics_paths = sink.paths();
  out.final_eval = last_eval_mean(outcome);
  out.steps = outcome.steps;
  if (trace_agent) dump_traces(*trace_agent, params, cfg);
  return out;
}

ParamSet assemble_tree_params(const ExperimentConfig& cfg, const TaskSpec& spec) {
  const LoadedCheckpoint skills = load_skills_or_throw(cfg, relevant_skills_for(spec));
  if (cfg.transfer_checkpoints.empty())
    return prepare_composition_params(spec, skills.params, cfg.train.seed);
  std::vector<LoadedCheckpoint> loaded;
  loaded.reserve(cfg.transfer_checkpoints.size());
  for (const std::string& p : cfg.transfer_checkpoints) loaded.push_back(load_checkpoint(p));
  std::vector<const LoadedCheckpoint*> ptrs;
  for (const LoadedCheckpoint& l : loaded) ptrs.push_back(&l);
  const TransferInit init = make_transfer_init(spec, ptrs);
  return prepare_composition_params(spec, skills.params, cfg.train.seed, &init);
}

}  // namespace

RunArtifacts run(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);

  if (cfg.method == Method::Skills) {
    ParamSet params = init_skill_params(cfg.train.seed);
    MetricsSink sink(cfg, /*multi_tag=*/true);
    const TrainOutcome outcome = train_skills(params, cfg.train, sink.callback());
    return finish_run(cfg, outcome, params, sink, nullptr);
  }

  const TaskSpec spec = cfg.task_spec(0);
  switch (cfg.method) {
    case Method::ComposeNet: {
      if (cfg.tasks.size() > 1) {
        std::vector<TaskSpec> specs;
        for (size_t i = 0; i < cfg.tasks.size(); ++i) specs.push_back(cfg.task_spec(i));
        std::vector<SkillId> needed;
        for (const TaskSpec& s : specs)
          for (SkillId sk : relevant_skills_for(s)) needed.push_back(sk);
        const LoadedCheckpoint skills = load_skills_or_throw(cfg, needed);
        ParamSet params = prepare_multitask_params(specs, skills.params, cfg.train.seed);
        MetricsSink sink(cfg, /*multi_tag=*/true);
        const TrainOutcome outcome =
            train_multitask_composition(specs, params, cfg.train, sink.callback());
        return finish_run(cfg, outcome, params, sink, nullptr);
      }
      ParamSet params = assemble_tree_params(cfg, spec);
      MetricsSink sink(cfg, /*multi_tag=*/false);
      const TrainOutcome outcome = train_composition(spec, params, cfg.train, sink.callback());
      const TreeAgent agent = TreeAgent::for_task(spec);
      return finish_run(cfg, outcome, params, sink, &agent);
    }
    case Method::Scratch: {
      ParamSet params = prepare_scratch_params(spec, cfg.train.seed);
      MetricsSink sink(cfg, /*multi_tag=*/false);
      const TrainOutcome outcome = scratch_train(spec, params, cfg.train, sink.callback());
      const ScratchAgent agent(spec);
      return finish_run(cfg, outcome, params, sink, &agent);
    }
    case Method::MetaController: {
      const LoadedCheckpoint skills = load_skills_or_throw(cfg, relevant_skills_for(spec));
      ParamSet params = prepare_metacontroller_params(spec, skills.params, cfg.train.seed);
      MetricsSink sink(cfg, /*multi_tag=*/false);
      const TrainOutcome outcome =
          metacontroller_train(spec, params, cfg.train, sink.callback());
      const MetaControllerAgent agent(spec);
      return finish_run(cfg, outcome, params, sink, &agent);
    }
    case Method::AblationWrongSkills: {
      std::vector<SkillId> substitutes;
      for (const std::string& s : cfg.substitute_skills)
        substitutes.push_back(skill_from_string(s));
      const std::vector<SkillId> correct = relevant_skills_for(spec);
      if (substitutes == correct)
        std::cerr << "warning: substitute skills equal the task's correct skills; this run "
                     "degenerates to the normal condition\n";
      const LoadedCheckpoint skills = load_skills_or_throw(cfg, substitutes);
      ParamSet params = prepare_composition_params(spec, skills.params, cfg.train.seed);
      const TreeAgent agent(spec, substituted_tree(spec, substitutes), spec.slug());
      MetricsSink sink(cfg, /*multi_tag=*/false);
      const TrainOutcome outcome =
          train_agents({&agent}, params, cfg.train, run_seed_for(spec, cfg.train.seed),
                       sink.callback());
      return finish_run(cfg, outcome, params, sink, &agent);
    }
    case Method::AblationPolicyRetrain: {
      const SkillId trunk = skill_from_string(cfg.retrain_trunk);
      const LoadedCheckpoint skills = load_skills_or_throw(cfg, {trunk});
      ParamSet params;
      for (const auto& [name, t] : skills.params.entries())
        if (name.rfind("trunk.", 0) == 0) params.insert(name, t);
      params.freeze_prefix("trunk.");
      RetrainPolicyAgent::add_params(params, spec.slug(), cfg.train.seed);
      const RetrainPolicyAgent agent(spec, trunk);
      MetricsSink sink(cfg, /*multi_tag=*/false);
      const TrainOutcome outcome =
          train_agents({&agent}, params, cfg.train, run_seed_for(spec, cfg.train.seed),
                       sink.callback());
      return finish_run(cfg, outcome, params, sink, &agent);
    }
    case Method::Skills:
      break;  // handled above
  }
  throw ConfigError("run: unhandled method");
}

ZeroShotResult zero_shot_eval(const ExperimentConfig& cfg) {
  if (cfg.tasks.size() != 1) throw ConfigError("zero_shot_eval: exactly one task required");
  const TaskSpec spec = cfg.task_spec(0);
  ParamSet params;
  if (!cfg.eval_checkpoint.empty()) {
    params = load_checkpoint(cfg.eval_checkpoint).params;
  } else {
    params = assemble_tree_params(cfg, spec);
  }
  const TreeAgent agent = TreeAgent::for_task(spec);
  const EvalResult res = evaluate_greedy(
      agent, params, cfg.train.eval_episodes,
      mix_seed(run_seed_for(spec, cfg.train.seed), kZeroShotStream));
  return {res.mean_return, res.mean_length};
}

ZeroShotResult eval_checkpoint_on_task(const ExperimentConfig& cfg) {
  if (cfg.eval_checkpoint.empty())
    throw ConfigError("eval: 'eval_checkpoint' is required");
  if (cfg.tasks.size() != 1) throw ConfigError("eval: exactly one task required");
  const TaskSpec spec = cfg.task_spec(0);
  const LoadedCheckpoint ck = load_checkpoint(cfg.eval_checkpoint);

  // Rebuild the acting policy the checkpoint was trained with.
  std::unique_ptr<Agent> agent;
  const auto method_it = ck.meta.find("method");
  const std::string method = method_it == ck.meta.end() ? "composenet" : method_it->second;
  if (method == "scratch") {
    agent = std::make_unique<ScratchAgent>(spec);
  } else if (method == "metacontroller") {
    agent = std::make_unique<MetaControllerAgent>(spec);
  } else if (method == "ablation_policy_retrain") {
    const auto it = ck.meta.find("retrain_trunk");
    if (it == ck.meta.end())
      throw MissingPrerequisiteError("eval: checkpoint lacks retrain_trunk metadata");
    agent = std::make_unique<RetrainPolicyAgent>(spec, skill_from_string(it->second));
  } else if (method == "ablation_wrong_skills") {
    const auto it = ck.meta.find("substitute_skills");
    if (it == ck.meta.end())
      throw MissingPrerequisiteError("eval: checkpoint lacks substitute_skills metadata");
    std::vector<SkillId> subs;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ';')) subs.push_back(skill_from_string(tok));
    agent = std::make_unique<TreeAgent>(spec, substituted_tree(spec, subs), spec.slug());
  } else {
    agent = std::make_unique<TreeAgent>(TreeAgent::for_task(spec));
  }
  const EvalResult res = evaluate_greedy(
      *agent, ck.params, cfg.train.eval_episodes,
      mix_seed(run_seed_for(spec, cfg.train.seed), kZeroShotStream));
  return {res.mean_return, res.mean_length};
}

// --- plotting ----------------------------------------------------------------

PlotConfig load_plot_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("plot config not found: " + path);
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  if (!doc.contains("plot")) throw ConfigError(path + ": missing 'plot' section");
  const json& p = doc.at("plot");
  require_keys(p, path + ".plot", {"output", "title", "y_axis", "series"});
  PlotConfig cfg;
  cfg.output = field<std::string>(p, path, "output", "");
  if (cfg.output.empty()) throw ConfigError(path + ".plot: 'output' is required");
  cfg.title = field<std::string>(p, path, "title", "");
  cfg.y_axis = field<std::string>(p, path, "y_axis", "return");
  if (cfg.y_axis != "return" && cfg.y_axis != "length")
    throw ConfigError(path + ".plot: y_axis must be 'return' or 'length'");
  if (!p.contains("series") || !p.at("series").is_array() || p.at("series").empty())
    throw ConfigError(path + ".plot: 'series' must be a non-empty array");
  for (const json& s : p.at("series")) {
    require_keys(s, path + ".plot.series", {"label", "files"});
    PlotConfig::Series series;
    series.label = field<std::string>(s, path, "label", "");
    series.files = field<std::vector<std::string>>(s, path, "files", {});
    if (series.label.empty() || series.files.empty())
      throw ConfigError(path + ".plot.series: each series needs 'label' and 'files'");
    cfg.series.push_back(std::move(series));
  }
  return cfg;
}

void run_plot(const PlotConfig& cfg) {
  std::vector<PlotSeries> series;
  for (const PlotConfig::Series& s : cfg.series) {
    PlotSeries ps;
    ps.label = s.label;
    for (const std::string& file : s.files) ps.seed_curves.push_back(read_metrics(file).rows);
    series.push_back(std::move(ps));
  }
  PlotOptions options;
  options.title = cfg.title;
  options.y_is_length = cfg.y_axis == "length";
  options.y_label = options.y_is_length ? "mean episode length" : "mean eval return";
  emit_plot(series, options, cfg.output);
}

}  // namespace composenet
