#include "composenet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "composenet/errors.hpp"

namespace composenet {

namespace {

constexpr int kFormatVersion = 1;

void put_le32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_le32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& prefix, const ParamSet& params,
                     const CheckpointMetadata& meta) {
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["metadata"] = meta;
  nlohmann::json entries = nlohmann::json::array();

  std::string blob;
  size_t offset = 0;
  for (const auto& [name, t] : params.entries()) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    e["frozen"] = params.is_frozen(name);
    entries.push_back(std::move(e));
    for (int i = 0; i < t.size(); ++i) put_le32(blob, std::bit_cast<uint32_t>(t[i]));
    offset += static_cast<size_t>(t.size()) * 4;
  }
  manifest["entries"] = std::move(entries);
  manifest["total_bytes"] = blob.size();

  const std::filesystem::path json_path = prefix + ".json";
  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  {
    std::ofstream f(json_path);
    if (!f) throw ConfigError("save_checkpoint: cannot write " + json_path.string());
    f << manifest.dump(2) << "\n";
  }
  {
    std::ofstream f(prefix + ".bin", std::ios::binary);
    if (!f) throw ConfigError("save_checkpoint: cannot write " + prefix + ".bin");
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
}

LoadedCheckpoint load_checkpoint(const std::string& prefix) {
  std::ifstream jf(prefix + ".json");
  if (!jf)
    throw MissingPrerequisiteError("checkpoint manifest not found: " + prefix + ".json");
  nlohmann::json manifest;
  try {
    jf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw MissingPrerequisiteError("checkpoint manifest unreadable: " + prefix + ".json: " +
                                   e.what());
  }
  if (!manifest.contains("format_version") ||
      manifest["format_version"].get<int>() != kFormatVersion)
    throw MissingPrerequisiteError("checkpoint format version mismatch in " + prefix + ".json");

  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw MissingPrerequisiteError("checkpoint blob not found: " + prefix + ".bin");
  std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

  const size_t expected = manifest.value("total_bytes", size_t{0});
  if (blob.size() != expected)
    throw MissingPrerequisiteError("checkpoint blob length " + std::to_string(blob.size()) +
                                   " does not match manifest total " +
                                   std::to_string(expected) + " in " + prefix);

  LoadedCheckpoint out;
  if (manifest.contains("metadata"))
    out.meta = manifest["metadata"].get<CheckpointMetadata>();
  for (const auto& e : manifest["entries"]) {
    const std::string name = e["name"].get<std::string>();
    const std::vector<int> shape = e["shape"].get<std::vector<int>>();
    const size_t offset = e["offset"].get<size_t>();
    size_t count = 1;
    for (int d : shape) count *= static_cast<size_t>(d);
    if (offset + count * 4 > blob.size())
      throw MissingPrerequisiteError("checkpoint entry " + name + " exceeds blob in " + prefix);
    std::vector<float> data(count);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
    for (size_t i = 0; i < count; ++i)
      data[i] = std::bit_cast<float>(get_le32(p + i * 4));
    out.params.insert(name, Tensor(shape, std::move(data)));
    if (e.value("frozen", false)) out.params.freeze(name);
  }
  return out;
}

bool checkpoint_exists(const std::string& prefix) {
  return std::filesystem::exists(prefix + ".json") && std::filesystem::exists(prefix + ".bin");
}

}  // namespace composenet
