#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tide/training.hpp"

namespace tide {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'I', 'D', 'E'};

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void tensor(const NamedTensor& t) {
    bytes(t.name.data(), t.name.size());
    const int dims[4] = {t.shape.n, t.shape.c, t.shape.h, t.shape.w};
    bytes(dims, sizeof(dims));
    bytes(t.data.data(), t.data.size() * sizeof(float));
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

nlohmann::json config_json(const ModelConfig& c) {
  return {{"n_down", c.n_down},
          {"base_channels", c.base_channels},
          {"max_channels", c.max_channels},
          {"deg_base_channels", c.deg_base_channels},
          {"k_types", c.k_types},
          {"bottleneck_blocks", c.bottleneck_blocks},
          {"detail_blocks", c.detail_blocks},
          {"negative_slope", c.negative_slope},
          {"fusion_hidden", c.fusion_hidden},
          {"residual_base_channels", c.residual_base_channels},
          {"refine_channels", c.refine_channels},
          {"gate_hidden", c.gate_hidden},
          {"refine_fusion_hidden", c.refine_fusion_hidden}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_down = j.at("n_down");
  c.base_channels = j.at("base_channels");
  c.max_channels = j.at("max_channels");
  c.deg_base_channels = j.at("deg_base_channels");
  c.k_types = j.at("k_types");
  c.bottleneck_blocks = j.at("bottleneck_blocks");
  c.detail_blocks = j.at("detail_blocks");
  c.negative_slope = j.at("negative_slope");
  c.fusion_hidden = j.at("fusion_hidden");
  c.residual_base_channels = j.at("residual_base_channels");
  c.refine_channels = j.at("refine_channels");
  c.gate_hidden = j.at("gate_hidden");
  c.refine_fusion_hidden = j.at("refine_fusion_hidden");
  return c;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::CorruptCheckpoint, why); }

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Base: return "base";
    case Phase::Refine: return "refine";
    case Phase::Combined: return "combined";
  }
  return "unknown";
}

Phase phase_from_string(std::string_view s) {
  if (s == "base") return Phase::Base;
  if (s == "refine") return Phase::Refine;
  if (s == "combined") return Phase::Combined;
  throw Error(ErrorCode::PhaseMismatch, "unknown phase '" + std::string(s) + "'");
}

bool Checkpoint::has_refinement() const {
  for (const auto& t : tensors)
    if (nn::is_refine_param(t.name)) return true;
  return false;
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::string Checkpoint::base_digest() const {
  Fnv f;
  for (const auto& t : tensors)
    if (nn::is_base_param(t.name)) f.tensor(t);
  return f.hex();
}

std::string Checkpoint::digest() const {
  Fnv f;
  for (const auto& t : tensors) f.tensor(t);
  return f.hex();
}

Checkpoint make_checkpoint(const TideModel<float>& model, Phase phase, std::int64_t step, std::uint64_t seed) {
  Checkpoint c;
  c.model = model.config();
  c.phase = phase;
  c.step = step;
  c.seed = seed;
  for (const auto& p : model.params().params()) {
    NamedTensor t;
    t.name = p.name;
    t.shape = p.shape;
    t.data.assign(p.value.data(), p.value.data() + p.value.size());
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void load_into(const Checkpoint& ckpt, TideModel<float>& model) {
  if (!(ckpt.model == model.config())) throw Error(ErrorCode::ConfigMismatch, "checkpoint model config differs");
  auto& ps = model.params();
  for (const auto& t : ckpt.tensors) {
    const int id = ps.find(t.name);
    if (id < 0) throw Error(ErrorCode::ConfigMismatch, "model has no parameter " + t.name);
    auto& p = ps.at(id);
    if (!(p.shape == t.shape)) throw Error(ErrorCode::ConfigMismatch, "shape mismatch for " + t.name);
    std::memcpy(p.value.data(), t.data.data(), t.data.size() * sizeof(float));
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["version"] = ckpt.version;
  manifest["phase"] = std::string(to_string(ckpt.phase));
  manifest["step"] = ckpt.step;
  manifest["seed"] = ckpt.seed;
  manifest["config"] = config_json(ckpt.model);
  manifest["digest"] = ckpt.digest();
  manifest["base_digest"] = ckpt.base_digest();
  nlohmann::json list = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    const std::uint64_t bytes = t.data.size() * sizeof(float);
    list.push_back({{"name", t.name}, {"shape", {t.shape.n, t.shape.c, t.shape.h, t.shape.w}}, {"offset", offset},
                    {"bytes", bytes}});
    offset += bytes;
  }
  manifest["tensors"] = std::move(list);
  const std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put_u32(out, ckpt.version);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : ckpt.tensors)
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) corrupt("bad magic, not a TIDE checkpoint");
  Checkpoint c;
  c.version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (c.version != Checkpoint::kVersion) corrupt("unsupported checkpoint version " + std::to_string(c.version));
  const std::uint64_t mlen = get_le(bytes, 8, 8);
  if (mlen > bytes.size() - 16) corrupt("manifest length exceeds file size");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, mlen));
    c.phase = phase_from_string(manifest.at("phase").get<std::string>());
    c.step = manifest.at("step");
    c.seed = manifest.at("seed");
    c.model = config_from_json(manifest.at("config"));
    const std::size_t payload = 16 + mlen;
    for (const auto& e : manifest.at("tensors")) {
      NamedTensor t;
      t.name = e.at("name");
      const auto& s = e.at("shape");
      t.shape = Shape{s.at(0), s.at(1), s.at(2), s.at(3)};
      const std::uint64_t off = e.at("offset");
      const std::uint64_t len = e.at("bytes");
      if (len != t.shape.numel() * sizeof(float)) corrupt("tensor " + t.name + " has inconsistent size");
      if (payload + off + len > bytes.size()) corrupt("tensor " + t.name + " runs past end of file");
      t.data.resize(t.shape.numel());
      std::memcpy(t.data.data(), bytes.data() + payload + off, len);
      c.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("malformed manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    corrupt(e.what());
  }
  if (manifest.at("digest").get<std::string>() != c.digest()) corrupt("payload digest mismatch");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IOFailure, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IOFailure, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IOFailure, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

ParamCounts count_parameters(const ModelConfig& cfg, bool with_refinement) {
  TideModel<float> shape_only(cfg, with_refinement, false);
  return {shape_only.params().count("base."), shape_only.params().count("refine.")};
}

ParamCounts count_parameters(const Checkpoint& ckpt) {
  ParamCounts pc;
  for (const auto& t : ckpt.tensors) {
    if (nn::is_base_param(t.name)) pc.base += t.data.size();
    if (nn::is_refine_param(t.name)) pc.refine += t.data.size();
  }
  return pc;
}

}  // namespace tide
