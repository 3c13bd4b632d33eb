#include "latentdub/core/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace latentdub {

namespace {

constexpr char kMagic[8] = {'L', 'D', 'C', 'K', 'P', 'T', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

nlohmann::json read_manifest(std::istream& is, const std::string& path) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint32_t mlen = read_u32(is);
  std::string mjson(mlen, '\0');
  is.read(mjson.data(), mlen);
  if (!is) throw std::runtime_error("checkpoint: truncated manifest in " + path);
  auto manifest = nlohmann::json::parse(mjson);
  if (manifest.at("format_version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported format_version in " + path);
  return manifest;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config, const nn::ParamRegistry& params) {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = kind;
  manifest["config"] = config;
  auto arrays = nlohmann::json::array();
  for (const auto& [name, v] : params.items()) {
    nlohmann::json a;
    a["name"] = name;
    a["shape"] = v->value.shape();
    arrays.push_back(a);
  }
  manifest["arrays"] = arrays;
  std::string mjson = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  os.write(kMagic, 8);
  write_u32(os, static_cast<std::uint32_t>(mjson.size()));
  os.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
  for (const auto& [name, v] : params.items())
    os.write(reinterpret_cast<const char*>(v->value.data()),
             static_cast<std::streamsize>(v->value.size() * sizeof(double)));
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

nlohmann::json load_checkpoint(const std::string& path, const std::string& expected_kind,
                               nn::ParamRegistry& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  auto manifest = read_manifest(is, path);
  if (manifest.at("kind").get<std::string>() != expected_kind)
    throw std::runtime_error("checkpoint: kind mismatch in " + path + " (expected " +
                             expected_kind + ", got " + manifest.at("kind").get<std::string>() +
                             ")");
  const auto& arrays = manifest.at("arrays");
  const auto& items = params.items();
  if (arrays.size() != items.size())
    throw std::runtime_error("checkpoint: array count mismatch in " + path);
  for (size_t i = 0; i < items.size(); ++i) {
    const auto& [name, v] = items[i];
    if (arrays[i].at("name").get<std::string>() != name)
      throw std::runtime_error("checkpoint: array name mismatch: expected " + name);
    auto shape = arrays[i].at("shape").get<std::vector<int>>();
    if (shape != v->value.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(v->value.data()),
            static_cast<std::streamsize>(v->value.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated data in " + path);
  }
  return manifest.at("config");
}

nlohmann::json read_checkpoint_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  return read_manifest(is, path);
}

}  // namespace latentdub
