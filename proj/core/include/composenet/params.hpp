#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "composenet/tensor.hpp"

namespace composenet {

// Ordered map from dotted parameter name to Tensor, plus a frozen set.
// Frozen entries are excluded from gradient flow and optimizer updates; their
// bytes are guaranteed identical before and after any training step.
class ParamSet {
public:
  void insert(const std::string& name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;

  // Mutable access for optimizer updates and checkpoint loading.
  // Frozen entries may not be mutated.
  Tensor& mutable_at(const std::string& name);

  void freeze(const std::string& name);
  // Freezes every entry whose name starts with `prefix`.
  int freeze_prefix(const std::string& prefix);
  bool is_frozen(const std::string& name) const;

  const std::set<std::string>& frozen() const { return frozen_; }
  const std::map<std::string, Tensor>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  size_t size() const { return entries_.size(); }
  // Total number of scalar coordinates across entries matching `prefix`
  // ("" counts everything).
  long long coordinate_count(const std::string& prefix = "") const;

private:
  std::map<std::string, Tensor> entries_;
  std::set<std::string> frozen_;
};

}  // namespace composenet
