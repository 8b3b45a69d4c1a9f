#include "composenet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "composenet/errors.hpp"

namespace composenet {

namespace {

size_t shape_product(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ConfigError("Tensor: non-positive dimension in shape");
    n *= static_cast<size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size())
    throw ConfigError("Tensor: shape " + shape_str() + " does not match data length " +
                      std::to_string(data_.size()));
}

bool Tensor::finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor::bytes_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  if (data_.size() != other.data_.size()) return false;
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     Activation act) {
  if (weight.shape().size() != 2)
    throw ConfigError("dense_forward: weight must be 2-d, got " + weight.shape_str());
  const int out = weight.shape()[0];
  const int in = weight.shape()[1];
  if (x.size() != in)
    throw ConfigError("dense_forward: input length " + std::to_string(x.size()) +
                      " does not match weight " + weight.shape_str());
  if (bias.size() != out)
    throw ConfigError("dense_forward: bias length " + std::to_string(bias.size()) +
                      " does not match weight " + weight.shape_str());

  Tensor y({out});
  const float* w = weight.data();
  const float* xv = x.data();
  for (int o = 0; o < out; ++o) {
    const float* row = w + static_cast<size_t>(o) * in;
    float acc = bias[o];
    for (int i = 0; i < in; ++i) acc += row[i] * xv[i];
    y[o] = (act == Activation::Relu && acc < 0.0f) ? 0.0f : acc;
  }
  return y;
}

Tensor softmax(const Tensor& logits) {
  if (logits.size() < 1) throw ConfigError("softmax: empty input");
  Tensor p(logits.shape());
  const float mx = *std::max_element(logits.span().begin(), logits.span().end());
  float sum = 0.0f;
  for (int i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (int i = 0; i < p.size(); ++i) p[i] /= sum;
  return p;
}

Tensor log_softmax(const Tensor& logits) {
  if (logits.size() < 1) throw ConfigError("log_softmax: empty input");
  Tensor lp(logits.shape());
  const float mx = *std::max_element(logits.span().begin(), logits.span().end());
  float sum = 0.0f;
  for (int i = 0; i < logits.size(); ++i) sum += std::exp(logits[i] - mx);
  const float lse = mx + std::log(sum);
  for (int i = 0; i < logits.size(); ++i) lp[i] = logits[i] - lse;
  return lp;
}

void check_finite(const Tensor& t, const std::string& where) {
  for (int i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]))
      throw NumericError("non-finite value at " + where + "[" + std::to_string(i) + "]");
  }
}

}  // namespace composenet
