#include "bytes.hpp"

#include "json.hpp"

#include <cmath>
#include <array>
#include <map>
#include <memory>
#include <mutex>

namespace gsanim::io {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'G', 'S', 'A', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kMaxNameLength = 256;
constexpr std::uint32_t kMaxRank = 8;

json config_json(const nn::NetworkConfig& c) {
  return {{"base_channels", c.base_channels}, {"feature_channels", c.feature_channels},
          {"template_outputs", c.template_outputs}, {"head_hidden", c.head_hidden},
          {"head_outputs", c.head_outputs}, {"views", c.views}};
}

int config_int(const json& c, const char* key, int hi) {
  if (!c.contains(key) || !c.at(key).is_number_integer()) {
    throw AssetError(AssetErrorKind::syntax, 0, std::string("checkpoint config lacks integer '") + key + "'");
  }
  const long long v = c.at(key).get<long long>();
  if (v < 1 || v > hi) {
    throw AssetError(AssetErrorKind::bounds, 0, std::string("checkpoint config '") + key + "' out of range");
  }
  return static_cast<int>(v);
}

// Reference layout per config; building one initializes every tensor, so results are reused.
std::shared_ptr<const nn::NetworkParams<float>> expected_layout(const nn::NetworkConfig& c) {
  static std::mutex mutex;
  static std::map<std::array<int, 6>, std::shared_ptr<const nn::NetworkParams<float>>> cache;
  const std::array<int, 6> key = {c.base_channels, c.feature_channels, c.template_outputs,
                                  c.head_hidden,   c.head_outputs,     c.views};
  const std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end()) {
    if (cache.size() > 16) cache.clear();
    it = cache.emplace(key, std::make_shared<const nn::NetworkParams<float>>(nn::make_network_params<float>(0, c))).first;
  }
  return it->second;
}

} // namespace

Bytes format_checkpoint(const nn::NetworkParams<float>& params) {
  params.validate();
  const json meta = {{"config", config_json(params.config)},
                     {"mode", nn::to_string(params.mode)},
                     {"share_map", params.share_map},
                     {"version", params.version}};
  const std::string meta_text = meta.dump();
  Bytes out(kMagic, kMagic + 8);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  detail::put_text(out, meta_text);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
  std::map<const nn::Node<float>*, std::uint64_t> offsets;
  std::vector<const nn::Tensor<float>*> payload_order;
  std::uint64_t next = 0;
  for (const auto& [name, t] : params.tensors) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    detail::put_text(out, name);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    auto it = offsets.find(t.id());
    if (it == offsets.end()) {
      it = offsets.emplace(t.id(), next).first;
      payload_order.push_back(&t);
      next += t.numel() * 4;
    }
    detail::put_le<std::uint64_t>(out, it->second);
  }
  out.reserve(out.size() + next);
  for (const auto* t : payload_order) {
    for (float v : t->data()) detail::put_f32(out, v);
  }
  return out;
}

nn::NetworkParams<float> parse_checkpoint(ByteView bytes) {
  detail::Reader r(bytes);
  if (r.read_string(8, "magic") != std::string(kMagic, 8)) {
    throw AssetError(AssetErrorKind::syntax, 0, "not a gsanim checkpoint (bad magic)");
  }
  const auto version = r.read_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw AssetError(AssetErrorKind::syntax, 8, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto meta_len = r.read_le<std::uint32_t>("metadata length");
  const std::size_t meta_at = r.pos();
  const std::string meta_text = r.read_string(meta_len, "metadata");
  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::parse_error& e) {
    throw AssetError(AssetErrorKind::syntax, meta_at + e.byte, std::string("checkpoint metadata: ") + e.what());
  }
  if (!meta.is_object() || !meta.contains("config") || !meta.at("config").is_object()) {
    throw AssetError(AssetErrorKind::syntax, meta_at, "checkpoint metadata lacks 'config'");
  }
  const json& c = meta.at("config");
  nn::NetworkConfig config;
  config.base_channels = config_int(c, "base_channels", 64);
  config.feature_channels = config_int(c, "feature_channels", 64);
  config.template_outputs = config_int(c, "template_outputs", 256);
  config.head_hidden = config_int(c, "head_hidden", 256);
  config.head_outputs = config_int(c, "head_outputs", 256);
  config.views = config_int(c, "views", 8);
  if (config.template_outputs != 14 || config.head_outputs != 12) {
    throw AssetError(AssetErrorKind::invariant, meta_at, "checkpoint output widths do not match the network layout");
  }
  if (meta.value("version", json()) != nn::kParamsVersion) {
    throw AssetError(AssetErrorKind::invariant, meta_at, "checkpoint parameter version mismatch");
  }
  const json mode = meta.value("mode", json());
  nn::ShareMode share_mode;
  if (mode == "shared") {
    share_mode = nn::ShareMode::shared;
  } else if (mode == "finetune_backward") {
    share_mode = nn::ShareMode::finetune_backward;
  } else {
    throw AssetError(AssetErrorKind::syntax, meta_at, "checkpoint mode must be \"shared\" or \"finetune_backward\"");
  }
  const auto layout = expected_layout(config);
  const auto& expected = *layout;
  if (meta.value("share_map", json()) != json(expected.share_map)) {
    throw AssetError(AssetErrorKind::invariant, meta_at, "checkpoint share map does not match the network layout");
  }

  const std::size_t count_at = r.pos();
  const auto count = r.read_le<std::uint32_t>("tensor count");
  if (count != expected.tensors.size()) {
    throw AssetError(AssetErrorKind::invariant, count_at,
                     "checkpoint holds " + std::to_string(count) + " tensors, expected " +
                         std::to_string(expected.tensors.size()));
  }
  struct Entry {
    std::string name;
    nn::Dims shape;
    std::uint64_t offset;
    std::size_t at;
  };
  std::vector<Entry> table;
  std::map<std::uint64_t, const Entry*> by_offset;
  std::uint64_t next = 0;
  table.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.at = r.pos();
    const auto len = r.read_le<std::uint32_t>("name length");
    if (len == 0 || len > kMaxNameLength) throw AssetError(AssetErrorKind::bounds, e.at, "tensor name length out of range");
    e.name = r.read_string(len, "tensor name");
    const auto rank = r.read_le<std::uint32_t>("rank");
    if (rank == 0 || rank > kMaxRank) throw AssetError(AssetErrorKind::bounds, e.at, "tensor rank out of range");
    for (std::uint32_t k = 0; k < rank; ++k) {
      e.shape.push_back(static_cast<int>(std::min<std::uint32_t>(r.read_le<std::uint32_t>("dim"), 1u << 30)));
    }
    e.offset = r.read_le<std::uint64_t>("payload offset");
    const auto it = expected.tensors.find(e.name);
    if (it == expected.tensors.end()) {
      throw AssetError(AssetErrorKind::invariant, e.at, "unexpected tensor '" + e.name + "'");
    }
    if (it->second.shape() != e.shape) {
      throw AssetError(AssetErrorKind::invariant, e.at,
                       "tensor '" + e.name + "' has shape " + nn::to_string(e.shape) + ", expected " +
                           nn::to_string(it->second.shape()));
    }
    if (!table.empty() && !(table.back().name < e.name)) {
      throw AssetError(AssetErrorKind::invariant, e.at, "tensor table is not in strictly increasing name order");
    }
    table.push_back(std::move(e));
  }
  const std::size_t payload_at = r.pos();
  for (auto& e : table) {
    const auto prev = by_offset.find(e.offset);
    if (prev != by_offset.end()) {
      if (prev->second->shape != e.shape) {
        throw AssetError(AssetErrorKind::invariant, e.at, "aliased tensors '" + e.name + "' differ in shape");
      }
      continue;
    }
    if (e.offset != next) {
      throw AssetError(AssetErrorKind::invariant, e.at, "tensor '" + e.name + "' payload offset is not contiguous");
    }
    by_offset.emplace(e.offset, &e);
    next += nn::numel(e.shape) * 4;
  }
  if (r.remaining() != next) {
    throw AssetError(AssetErrorKind::bounds, payload_at + std::min<std::uint64_t>(r.remaining(), next),
                     "checkpoint payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                         std::to_string(next));
  }

  nn::NetworkParams<float> p;
  p.config = config;
  p.share_map = expected.share_map;
  p.mode = share_mode;
  std::map<std::uint64_t, nn::Tensor<float>> storage;
  for (const auto& e : table) {
    auto it = storage.find(e.offset);
    if (it == storage.end()) {
      detail::Reader pr(bytes, payload_at + e.offset);
      std::vector<float> data(nn::numel(e.shape));
      for (auto& v : data) {
        v = pr.read_f32("tensor payload");
        if (!std::isfinite(v)) {
          throw AssetError(AssetErrorKind::invariant, pr.pos() - 4, "tensor '" + e.name + "' holds a non-finite value");
        }
      }
      it = storage.emplace(e.offset, nn::Tensor<float>(e.shape, std::move(data))).first;
    }
    p.tensors.emplace(e.name, it->second);
  }
  for (auto& [name, t] : p.tensors) {
    t.set_requires_grad(share_mode == nn::ShareMode::shared || !nn::is_forward_name(name));
  }
  // aliasing must agree with the mode: shared pairs alias, fine-tuned pairs do not,
  // and no other tensors share storage
  std::map<const nn::Node<float>*, int> uses;
  for (const auto& [name, t] : p.tensors) ++uses[t.id()];
  std::size_t expected_aliases = 0;
  for (const auto& [bwd, fwd] : p.share_map) {
    const bool aliased = p.at(bwd).id() == p.at(fwd).id();
    if (aliased != (share_mode == nn::ShareMode::shared)) {
      throw AssetError(AssetErrorKind::invariant, payload_at, "tensor '" + bwd + "' aliasing does not match the mode");
    }
    expected_aliases += aliased;
  }
  if (p.tensors.size() - uses.size() != expected_aliases) {
    throw AssetError(AssetErrorKind::invariant, payload_at, "checkpoint aliases tensors outside the share map");
  }
  return p;
}

nn::NetworkParams<float> load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

void save_checkpoint(const std::filesystem::path& path, const nn::NetworkParams<float>& params) {
  write_file_atomic(path, format_checkpoint(params));
}

} // namespace gsanim::io
