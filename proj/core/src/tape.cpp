#include "composenet/tape.hpp"

#include <cmath>

#include "composenet/errors.hpp"

namespace composenet {

Tape::NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_id(NodeId id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
    throw UsageError("Tape: invalid node id " + std::to_string(id));
}

Tape::NodeId Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::param(const std::string& name) {
  Node n;
  n.op = Op::Param;
  n.name = name;
  n.trainable = !params_->is_frozen(name);
  n.value = params_->at(name);
  return push(std::move(n));
}

Tape::NodeId Tape::dense(NodeId x, const std::string& layer, Activation act) {
  return dense(x, param(layer + ".weight"), param(layer + ".bias"), act);
}

Tape::NodeId Tape::dense(NodeId x, NodeId weight, NodeId bias, Activation act) {
  check_id(x);
  check_id(weight);
  check_id(bias);
  Node n;
  n.op = Op::Dense;
  n.a = x;
  n.b = weight;
  n.c = bias;
  n.act = act;
  n.value = dense_forward(value(x), value(weight), value(bias), act);
  return push(std::move(n));
}

Tape::NodeId Tape::concat(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  Tensor out({va.size() + vb.size()});
  for (int i = 0; i < va.size(); ++i) out[i] = va[i];
  for (int i = 0; i < vb.size(); ++i) out[va.size() + i] = vb[i];
  Node n;
  n.op = Op::Concat;
  n.a = a;
  n.b = b;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId x) {
  check_id(x);
  Tensor out(value(x).shape());
  const Tensor& vx = value(x);
  for (int i = 0; i < vx.size(); ++i) out[i] = vx[i] > 0.0f ? vx[i] : 0.0f;
  Node n;
  n.op = Op::Relu;
  n.a = x;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::NodeId Tape::softmax(NodeId logits) {
  check_id(logits);
  Node n;
  n.op = Op::Softmax;
  n.a = logits;
  n.value = composenet::softmax(value(logits));
  return push(std::move(n));
}

Tape::NodeId Tape::log_softmax(NodeId logits) {
  check_id(logits);
  Node n;
  n.op = Op::LogSoftmax;
  n.a = logits;
  n.value = composenet::log_softmax(value(logits));
  return push(std::move(n));
}

Tape::NodeId Tape::pick(NodeId x, int index) {
  check_id(x);
  if (index < 0 || index >= value(x).size())
    throw ConfigError("Tape::pick: index " + std::to_string(index) + " out of range");
  Node n;
  n.op = Op::Pick;
  n.a = x;
  n.index = index;
  n.value = Tensor::scalar(value(x)[index]);
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  if (!value(a).same_shape(value(b))) throw ConfigError("Tape::add: shape mismatch");
  Tensor out(value(a).shape());
  for (int i = 0; i < out.size(); ++i) out[i] = value(a)[i] + value(b)[i];
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  if (!value(a).same_shape(value(b))) throw ConfigError("Tape::sub: shape mismatch");
  Tensor out(value(a).shape());
  for (int i = 0; i < out.size(); ++i) out[i] = value(a)[i] - value(b)[i];
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  check_id(a);
  check_id(b);
  if (!value(a).same_shape(value(b))) throw ConfigError("Tape::mul: shape mismatch");
  Tensor out(value(a).shape());
  for (int i = 0; i < out.size(); ++i) out[i] = value(a)[i] * value(b)[i];
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId x, float c) {
  check_id(x);
  Tensor out(value(x).shape());
  for (int i = 0; i < out.size(); ++i) out[i] = value(x)[i] * c;
  Node n;
  n.op = Op::Scale;
  n.a = x;
  n.factor = c;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::NodeId Tape::square(NodeId x) {
  check_id(x);
  Tensor out(value(x).shape());
  for (int i = 0; i < out.size(); ++i) out[i] = value(x)[i] * value(x)[i];
  Node n;
  n.op = Op::Square;
  n.a = x;
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId x) {
  check_id(x);
  float acc = 0.0f;
  for (int i = 0; i < value(x).size(); ++i) acc += value(x)[i];
  Node n;
  n.op = Op::Sum;
  n.a = x;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

float Tape::scalar_value(NodeId id) const {
  check_id(id);
  if (value(id).size() != 1) throw ConfigError("Tape::scalar_value: node is not scalar");
  return value(id)[0];
}

GradMap Tape::backward(NodeId loss) const {
  check_id(loss);
  if (value(loss).size() != 1)
    throw ConfigError("Tape::backward: loss must be scalar, got shape " +
                      value(loss).shape_str());

  std::vector<Tensor> adj(nodes_.size());
  std::vector<char> has_adj(nodes_.size(), 0);

  auto bump = [&](NodeId id) {
    if (!has_adj[static_cast<size_t>(id)]) {
      adj[static_cast<size_t>(id)] = Tensor(value(id).shape());
      has_adj[static_cast<size_t>(id)] = 1;
    }
    return adj[static_cast<size_t>(id)].data();
  };

  bump(loss)[0] = 1.0f;

  auto wants_grad = [&](NodeId id) {
    const Node& n = node(id);
    if (n.op == Op::Const) return false;
    if (n.op == Op::Param) return n.trainable;
    return true;
  };

  GradMap grads;
  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    if (!has_adj[static_cast<size_t>(id)]) continue;
    const Node& n = node(id);
    const float* g = adj[static_cast<size_t>(id)].data();
    switch (n.op) {
      case Op::Const:
        break;
      case Op::Param: {
        if (!n.trainable) break;
        auto it = grads.find(n.name);
        if (it == grads.end()) {
          grads.emplace(n.name, adj[static_cast<size_t>(id)]);
        } else {
          Tensor& acc = it->second;
          for (int i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
        break;
      }
      case Op::Dense: {
        const Tensor& x = value(n.a);
        const Tensor& w = value(n.b);
        const Tensor& y = n.value;
        const int out = w.shape()[0];
        const int in = w.shape()[1];
        // dz = g masked by the activation
        std::vector<float> dz(static_cast<size_t>(out));
        for (int o = 0; o < out; ++o)
          dz[static_cast<size_t>(o)] =
              (n.act == Activation::Relu && y[o] <= 0.0f) ? 0.0f : g[o];
        if (wants_grad(n.a)) {
          float* dx = bump(n.a);
          const float* wd = w.data();
          for (int o = 0; o < out; ++o) {
            const float d = dz[static_cast<size_t>(o)];
            if (d == 0.0f) continue;
            const float* row = wd + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) dx[i] += d * row[i];
          }
        }
        if (wants_grad(n.b)) {
          float* dw = bump(n.b);
          const float* xd = x.data();
          for (int o = 0; o < out; ++o) {
            const float d = dz[static_cast<size_t>(o)];
            if (d == 0.0f) continue;
            float* row = dw + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) row[i] += d * xd[i];
          }
        }
        if (wants_grad(n.c)) {
          float* db = bump(n.c);
          for (int o = 0; o < out; ++o) db[o] += dz[static_cast<size_t>(o)];
        }
        break;
      }
      case Op::Concat: {
        const int na = value(n.a).size();
        const int nb = value(n.b).size();
        float* da = bump(n.a);
        for (int i = 0; i < na; ++i) da[i] += g[i];
        float* db = bump(n.b);
        for (int i = 0; i < nb; ++i) db[i] += g[na + i];
        break;
      }
      case Op::Relu: {
        float* dx = bump(n.a);
        const Tensor& y = n.value;
        for (int i = 0; i < y.size(); ++i)
          if (y[i] > 0.0f) dx[i] += g[i];
        break;
      }
      case Op::Softmax: {
        // dx_i = p_i * (g_i - sum_j g_j p_j)
        const Tensor& p = n.value;
        float dot = 0.0f;
        for (int i = 0; i < p.size(); ++i) dot += g[i] * p[i];
        float* dx = bump(n.a);
        for (int i = 0; i < p.size(); ++i) dx[i] += p[i] * (g[i] - dot);
        break;
      }
      case Op::LogSoftmax: {
        // dx_i = g_i - softmax(x)_i * sum_j g_j
        const Tensor& lp = n.value;
        float gsum = 0.0f;
        for (int i = 0; i < lp.size(); ++i) gsum += g[i];
        float* dx = bump(n.a);
        for (int i = 0; i < lp.size(); ++i) dx[i] += g[i] - std::exp(lp[i]) * gsum;
        break;
      }
      case Op::Pick: {
        float* dx = bump(n.a);
        dx[n.index] += g[0];
        break;
      }
      case Op::Add: {
        float* da = bump(n.a);
        for (int i = 0; i < n.value.size(); ++i) da[i] += g[i];
        float* db = bump(n.b);
        for (int i = 0; i < n.value.size(); ++i) db[i] += g[i];
        break;
      }
      case Op::Sub: {
        float* da = bump(n.a);
        for (int i = 0; i < n.value.size(); ++i) da[i] += g[i];
        float* db = bump(n.b);
        for (int i = 0; i < n.value.size(); ++i) db[i] -= g[i];
        break;
      }
      case Op::Mul: {
        const Tensor& va = value(n.a);
        const Tensor& vb = value(n.b);
        float* da = bump(n.a);
        for (int i = 0; i < va.size(); ++i) da[i] += g[i] * vb[i];
        float* db = bump(n.b);
        for (int i = 0; i < vb.size(); ++i) db[i] += g[i] * va[i];
        break;
      }
      case Op::Scale: {
        float* dx = bump(n.a);
        for (int i = 0; i < n.value.size(); ++i) dx[i] += g[i] * n.factor;
        break;
      }
      case Op::Square: {
        const Tensor& vx = value(n.a);
        float* dx = bump(n.a);
        for (int i = 0; i < vx.size(); ++i) dx[i] += 2.0f * vx[i] * g[i];
        break;
      }
      case Op::Sum: {
        float* dx = bump(n.a);
        for (int i = 0; i < value(n.a).size(); ++i) dx[i] += g[0];
        break;
      }
    }
  }
  return grads;
}

}  // namespace composenet
