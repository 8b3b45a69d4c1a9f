#include "composenet/model.hpp"

#include <cmath>

#include "composenet/errors.hpp"

namespace composenet {

const char* to_string(SkillId s) {
  switch (s) {
    case SkillId::CollectR: return "collect_r";
    case SkillId::CollectG: return "collect_g";
    case SkillId::CollectB: return "collect_b";
    case SkillId::EvadeR: return "evade_r";
    case SkillId::EvadeG: return "evade_g";
    case SkillId::EvadeB: return "evade_b";
  }
  return "?";
}

SkillId skill_from_string(const std::string& name) {
  for (SkillId s : kAllSkills)
    if (name == to_string(s)) return s;
  throw ConfigError("unknown skill id '" + name + "'");
}

SkillId collect_skill(Color c) { return static_cast<SkillId>(static_cast<int>(c)); }
SkillId evade_skill(Color c) { return static_cast<SkillId>(3 + static_cast<int>(c)); }
bool is_collect(SkillId s) { return static_cast<int>(s) < 3; }
Color skill_color(SkillId s) { return static_cast<Color>(static_cast<int>(s) % 3); }

TaskSpec skill_task(SkillId s) {
  const char letter = color_letter(skill_color(s));
  if (is_collect(s)) return compile_task(std::string("F ") + letter);
  return compile_task(std::string("G !") + letter);
}

std::string trunk_layer_name(SkillId s, int layer) {
  return "trunk." + std::string(to_string(s)) + ".fc" + std::to_string(layer);
}

std::string comp_layer_name(const std::string& node_path) { return "comp." + node_path; }

std::string value_head_name(const std::string& task_slug) { return "value." + task_slug; }

Tensor init_dense_weight(int out, int in, Rng& rng) {
  const float limit = 1.0f / std::sqrt(static_cast<float>(in));
  Tensor w({out, in});
  for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
  return w;
}

void add_dense_params(ParamSet& params, const std::string& layer, int out, int in, Rng& rng) {
  params.insert(layer + ".weight", init_dense_weight(out, in, rng));
  params.insert(layer + ".bias", Tensor({out}));
}

void add_trunk_params(ParamSet& params, SkillId s, Rng& rng) {
  add_dense_params(params, trunk_layer_name(s, 1), ModelDims::kHidden, ModelDims::kInput, rng);
  add_dense_params(params, trunk_layer_name(s, 2), ModelDims::kHidden, ModelDims::kHidden, rng);
  add_dense_params(params, trunk_layer_name(s, 3), ModelDims::kEmbedding, ModelDims::kHidden,
                   rng);
}

void add_policy_params(ParamSet& params, Rng& rng) {
  add_dense_params(params, kPolicyLayerName, ModelDims::kActions, ModelDims::kEmbedding, rng);
}

void add_value_head_params(ParamSet& params, const std::string& task_slug, Rng& rng) {
  add_dense_params(params, value_head_name(task_slug), 1, ModelDims::kEmbedding, rng);
}

void add_comp_params(ParamSet& params, const std::string& node_path, Rng& rng) {
  add_dense_params(params, comp_layer_name(node_path), ModelDims::kEmbedding,
                   2 * ModelDims::kEmbedding, rng);
}

ParamSet init_skill_params(uint64_t seed) {
  ParamSet params;
  Rng rng(mix_seed(seed, /*stream=*/0x1111));
  for (SkillId s : kAllSkills) add_trunk_params(params, s, rng);
  add_policy_params(params, rng);
  for (SkillId s : kAllSkills) add_value_head_params(params, skill_task(s).slug(), rng);
  return params;
}

// --- composition tree -------------------------------------------------------

std::vector<SkillId> CompositionTree::leaves() const {
  std::vector<SkillId> out;
  auto walk = [&](auto&& self, const Node& n) -> void {
    if (n.is_leaf()) {
      out.push_back(*n.skill);
      return;
    }
    self(self, *n.slot1);
    self(self, *n.slot2);
  };
  walk(walk, root);
  return out;
}

std::vector<std::string> CompositionTree::comp_paths() const {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const Node& n) -> void {
    if (n.is_leaf()) return;
    out.push_back(n.path);
    self(self, *n.slot1);
    self(self, *n.slot2);
  };
  walk(walk, root);
  return out;
}

int CompositionTree::depth() const {
  auto walk = [&](auto&& self, const Node& n) -> int {
    if (n.is_leaf()) return 0;
    return 1 + std::max(self(self, *n.slot1), self(self, *n.slot2));
  };
  return walk(walk, root);
}

namespace {

CompositionTree::Node make_leaf(SkillId s) {
  CompositionTree::Node n;
  n.skill = s;
  return n;
}

CompositionTree::Node make_node(const std::string& path, CompositionTree::Node a,
                                CompositionTree::Node b) {
  CompositionTree::Node n;
  n.path = path;
  n.slot1 = std::make_unique<CompositionTree::Node>(std::move(a));
  n.slot2 = std::make_unique<CompositionTree::Node>(std::move(b));
  return n;
}

}  // namespace

CompositionTree build_tree(const TaskSpec& spec) {
  CompositionTree tree;
  switch (spec.template_kind) {
    case TemplateKind::CollectSkill:
      tree.root = make_leaf(collect_skill(spec.targets[0]));
      break;
    case TemplateKind::EvadeSkill:
      tree.root = make_leaf(evade_skill(spec.enemies[0]));
      break;
    case TemplateKind::While:
      tree.root = make_node("root", make_leaf(evade_skill(spec.enemies[0])),
                            make_leaf(collect_skill(spec.targets[0])));
      break;
    case TemplateKind::OrTask:
      tree.root = make_node("root", make_leaf(collect_skill(spec.targets[0])),
                            make_leaf(collect_skill(spec.targets[1])));
      break;
    case TemplateKind::AndEvade:
      tree.root = make_node("root", make_leaf(evade_skill(spec.enemies[0])),
                            make_leaf(evade_skill(spec.enemies[1])));
      break;
    case TemplateKind::Then:
      tree.root = make_node("root", make_leaf(collect_skill(spec.targets[0])),
                            make_leaf(collect_skill(spec.targets[1])));
      break;
    case TemplateKind::HierAndUntil:
      tree.root = make_node(
          "root",
          make_node("root.1", make_leaf(evade_skill(spec.enemies[0])),
                    make_leaf(evade_skill(spec.enemies[1]))),
          make_leaf(collect_skill(spec.targets[0])));
      break;
    case TemplateKind::HierUntilOr:
      tree.root = make_node(
          "root", make_leaf(evade_skill(spec.enemies[0])),
          make_node("root.2", make_leaf(collect_skill(spec.targets[0])),
                    make_leaf(collect_skill(spec.targets[1]))));
      break;
  }
  return tree;
}

CompositionTree leaf_tree(SkillId s) {
  CompositionTree tree;
  tree.root = make_leaf(s);
  return tree;
}

CompositionTree substituted_tree(const TaskSpec& spec, const std::vector<SkillId>& leaves) {
  CompositionTree tree = build_tree(spec);
  size_t next = 0;
  auto walk = [&](auto&& self, CompositionTree::Node& n) -> void {
    if (n.is_leaf()) {
      if (next >= leaves.size())
        throw ConfigError("substituted_tree: expected " + std::to_string(next + 1) +
                          "+ substitute skills, got " + std::to_string(leaves.size()));
      n.skill = leaves[next++];
      return;
    }
    self(self, *n.slot1);
    self(self, *n.slot2);
  };
  walk(walk, tree.root);
  if (next != leaves.size())
    throw ConfigError("substituted_tree: template takes " + std::to_string(next) +
                      " skills, got " + std::to_string(leaves.size()));
  return tree;
}

// --- forward passes ----------------------------------------------------------

Tensor trunk_forward(const ParamSet& params, const Observation& obs, SkillId s) {
  Tensor h = obs.to_tensor();
  for (int layer = 1; layer <= 3; ++layer) {
    const std::string base = trunk_layer_name(s, layer);
    h = dense_forward(h, params.at(base + ".weight"), params.at(base + ".bias"),
                      Activation::Relu);
  }
  return h;
}

Tensor policy_forward(const ParamSet& params, const Tensor& embedding) {
  const Tensor logits =
      dense_forward(embedding, params.at(std::string(kPolicyLayerName) + ".weight"),
                    params.at(std::string(kPolicyLayerName) + ".bias"), Activation::None);
  return softmax(logits);
}

Tensor compose_forward(const ParamSet& params, const std::string& node_path, const Tensor& e1,
                       const Tensor& e2) {
  Tensor cat({e1.size() + e2.size()});
  for (int i = 0; i < e1.size(); ++i) cat[i] = e1[i];
  for (int i = 0; i < e2.size(); ++i) cat[e1.size() + i] = e2[i];
  const std::string base = comp_layer_name(node_path);
  return dense_forward(cat, params.at(base + ".weight"), params.at(base + ".bias"),
                       Activation::Relu);
}

namespace {

Tensor node_embedding(const ParamSet& params, const Observation& obs,
                      const CompositionTree::Node& n) {
  if (n.is_leaf()) return trunk_forward(params, obs, *n.skill);
  return compose_forward(params, n.path, node_embedding(params, obs, *n.slot1),
                         node_embedding(params, obs, *n.slot2));
}

Tape::NodeId node_embedding_taped(Tape& tape, Tape::NodeId input,
                                  const CompositionTree::Node& n) {
  if (n.is_leaf()) {
    Tape::NodeId h = input;
    for (int layer = 1; layer <= 3; ++layer)
      h = tape.dense(h, trunk_layer_name(*n.skill, layer), Activation::Relu);
    return h;
  }
  const Tape::NodeId e1 = node_embedding_taped(tape, input, *n.slot1);
  const Tape::NodeId e2 = node_embedding_taped(tape, input, *n.slot2);
  return tape.dense(tape.concat(e1, e2), comp_layer_name(n.path), Activation::Relu);
}

}  // namespace

PolicyValue tree_forward(const ParamSet& params, const Observation& obs,
                         const CompositionTree& tree, const std::string& value_slug) {
  const Tensor emb = node_embedding(params, obs, tree.root);
  PolicyValue out;
  out.probs = policy_forward(params, emb);
  if (!value_slug.empty()) {
    const std::string base = value_head_name(value_slug);
    out.value = dense_forward(emb, params.at(base + ".weight"), params.at(base + ".bias"),
                              Activation::None)[0];
  }
  return out;
}

TapedPolicyValue tree_forward_taped(Tape& tape, const Observation& obs,
                                    const CompositionTree& tree,
                                    const std::string& value_slug) {
  const Tape::NodeId input = tape.constant(obs.to_tensor());
  const Tape::NodeId emb = node_embedding_taped(tape, input, tree.root);
  TapedPolicyValue out;
  out.logits = tape.dense(emb, kPolicyLayerName, Activation::None);
  out.value = tape.pick(tape.dense(emb, value_head_name(value_slug), Activation::None), 0);
  return out;
}

}  // namespace composenet
