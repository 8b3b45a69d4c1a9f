#include "composenet/params.hpp"

#include "composenet/errors.hpp"

namespace composenet {

void ParamSet::insert(const std::string& name, Tensor t) {
  if (entries_.count(name)) throw ConfigError("ParamSet: duplicate parameter " + name);
  entries_.emplace(name, std::move(t));
}

bool ParamSet::contains(const std::string& name) const { return entries_.count(name) > 0; }

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("ParamSet: unknown parameter " + name);
  return it->second;
}

Tensor& ParamSet::mutable_at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("ParamSet: unknown parameter " + name);
  if (frozen_.count(name)) throw UsageError("ParamSet: mutable access to frozen parameter " + name);
  return it->second;
}

void ParamSet::freeze(const std::string& name) {
  if (!entries_.count(name)) throw ConfigError("ParamSet: cannot freeze unknown parameter " + name);
  frozen_.insert(name);
}

int ParamSet::freeze_prefix(const std::string& prefix) {
  int n = 0;
  for (const auto& [name, _] : entries_) {
    if (name.rfind(prefix, 0) == 0) {
      frozen_.insert(name);
      ++n;
    }
  }
  return n;
}

bool ParamSet::is_frozen(const std::string& name) const { return frozen_.count(name) > 0; }

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamSet::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_)
    if (name.rfind(prefix, 0) == 0) out.push_back(name);
  return out;
}

long long ParamSet::coordinate_count(const std::string& prefix) const {
  long long n = 0;
  for (const auto& [name, t] : entries_)
    if (prefix.empty() || name.rfind(prefix, 0) == 0) n += t.size();
  return n;
}

}  // namespace composenet
