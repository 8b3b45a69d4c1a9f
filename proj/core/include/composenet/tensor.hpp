#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace composenet {

// Shape-tagged flat array of 32-bit floats, row-major. The unit of all
// numeric computation; every operation that produces a Tensor leaves it
// finite.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int size() const { return static_cast<int>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int i) const { return data_[static_cast<size_t>(i)]; }

  std::span<float> span() { return {data_.data(), data_.size()}; }
  std::span<const float> span() const { return {data_.data(), data_.size()}; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool finite() const;
  // Bit-exact comparison of the payload (shape and bytes).
  bool bytes_equal(const Tensor& other) const;

  std::string shape_str() const;

private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

enum class Activation { None, Relu };

// y = act(W x + b). W is [out x in] row-major, x is [in], b is [out].
// Shape mismatches raise ConfigError.
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     Activation act);

// Numerically stable softmax (max subtraction); output sums to 1 within 1e-6.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

// Throws NumericError naming `where` if any entry is NaN/Inf.
void check_finite(const Tensor& t, const std::string& where);

}  // namespace composenet
