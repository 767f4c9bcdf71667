#include "deus/archive.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "deus/errors.hpp"

namespace deus {

namespace {

using json = nlohmann::json;

constexpr char kMagic[5] = {'D', 'E', 'U', 'S', '1'};
constexpr std::size_t kAlign = 64;

std::size_t align_up(std::size_t n) { return (n + kAlign - 1) / kAlign * kAlign; }

void put_f32_le(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  out.push_back(static_cast<std::uint8_t>(bits));
  out.push_back(static_cast<std::uint8_t>(bits >> 8));
  out.push_back(static_cast<std::uint8_t>(bits >> 16));
  out.push_back(static_cast<std::uint8_t>(bits >> 24));
}

float get_f32_le(const std::uint8_t* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::vector<std::uint8_t> tensor_bytes(const TensorEntry& e) {
  std::vector<std::uint8_t> out;
  out.reserve(e.data.size() * 4);
  for (double v : e.data) put_f32_le(out, static_cast<float>(v));
  return out;
}

json config_to_json(const ModelConfig& c) {
  return json{{"n_layers", c.n_layers},   {"hidden", c.hidden},
              {"n_heads", c.n_heads},     {"n_kv_heads", c.n_kv_heads},
              {"head_dim", c.head_dim},   {"d_ff", c.d_ff},
              {"vocab", c.vocab},         {"rope_theta", c.rope_theta},
              {"rms_eps", c.rms_eps}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.n_kv_heads = j.at("n_kv_heads").get<std::size_t>();
    c.head_dim = j.at("head_dim").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.vocab = j.at("vocab").get<std::size_t>();
    c.rope_theta = j.at("rope_theta").get<double>();
    c.rms_eps = j.at("rms_eps").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Fault::BadHeader, std::string("bad config in header: ") + e.what());
  }
  return c;
}

Matrix2D matrix_from_entry(const TensorEntry& e, std::size_t rows, std::size_t cols) {
  if (e.shape.size() != 2 || e.shape[0] != rows || e.shape[1] != cols) {
    throw FormatError(FormatError::Fault::BadShape,
                      "tensor " + e.name + " has unexpected shape");
  }
  return Matrix2D::from_data(rows, cols, e.data);
}

Vector1D vector_from_entry(const TensorEntry& e, std::size_t len) {
  if (e.shape.size() != 1 || e.shape[0] != len) {
    throw FormatError(FormatError::Fault::BadShape,
                      "tensor " + e.name + " has unexpected shape");
  }
  return Vector1D::from_data(e.data);
}

TensorEntry make_entry(std::string name, const Matrix2D& m) {
  return TensorEntry{std::move(name), {m.rows, m.cols}, m.data};
}

TensorEntry make_entry(std::string name, const Vector1D& v) {
  return TensorEntry{std::move(name), {v.len()}, v.data};
}

}  // namespace

std::size_t TensorEntry::element_count() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string layer_tensor_name(std::size_t i, std::string_view block) {
  return "layers." + std::to_string(i) + "." + std::string(block);
}

bool TensorArchive::contains(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

const TensorEntry& TensorArchive::find(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw FormatError(FormatError::Fault::MissingTensor,
                    "missing tensor: " + std::string(name));
}

LayerWeights TensorArchive::layer_view(std::size_t i) const {
  if (i < 1 || i > config.n_layers) {
    throw ShapeError("layer index " + std::to_string(i) + " out of range 1.." +
                     std::to_string(config.n_layers) + " (1-based)");
  }
  const std::size_t h = config.hidden;
  const std::size_t kv = config.kv_dim();
  LayerWeights w;
  w.w_q = matrix_from_entry(find(layer_tensor_name(i, "attn.q")), h, h);
  w.w_k = matrix_from_entry(find(layer_tensor_name(i, "attn.k")), kv, h);
  w.w_v = matrix_from_entry(find(layer_tensor_name(i, "attn.v")), kv, h);
  w.w_o = matrix_from_entry(find(layer_tensor_name(i, "attn.o")), h, h);
  w.w_gate = matrix_from_entry(find(layer_tensor_name(i, "mlp.gate")), config.d_ff, h);
  w.w_up = matrix_from_entry(find(layer_tensor_name(i, "mlp.up")), config.d_ff, h);
  w.w_down = matrix_from_entry(find(layer_tensor_name(i, "mlp.down")), h, config.d_ff);
  w.norm_attn = vector_from_entry(find(layer_tensor_name(i, "norm.attn")), h);
  w.norm_mlp = vector_from_entry(find(layer_tensor_name(i, "norm.mlp")), h);
  return w;
}

Matrix2D TensorArchive::embed() const {
  return matrix_from_entry(find(kEmbedName), config.vocab, config.hidden);
}

Vector1D TensorArchive::final_norm() const {
  return vector_from_entry(find(kFinalNormName), config.hidden);
}

Matrix2D TensorArchive::lm_head() const {
  return matrix_from_entry(find(kLmHeadName), config.vocab, config.hidden);
}

void TensorArchive::validate() const {
  config.validate();
  if (entries.empty()) {
    throw FormatError(FormatError::Fault::EmptyArchive, "archive has no tensors");
  }
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.name).second) {
      throw FormatError(FormatError::Fault::DuplicateName, "duplicate tensor name: " + e.name);
    }
    if (e.shape.empty() || e.element_count() != e.data.size()) {
      throw FormatError(FormatError::Fault::BadShape,
                        "tensor " + e.name + " shape does not match payload size");
    }
  }
  std::set<std::string> expected{std::string(kEmbedName), std::string(kFinalNormName),
                                 std::string(kLmHeadName)};
  for (std::size_t i = 1; i <= config.n_layers; ++i) {
    for (std::string_view b : kLayerBlockNames) expected.insert(layer_tensor_name(i, b));
  }
  for (const auto& name : expected) {
    if (!seen.count(name)) {
      throw FormatError(FormatError::Fault::MissingTensor, "missing tensor: " + name);
    }
  }
  for (const auto& name : seen) {
    if (!expected.count(name)) {
      throw FormatError(FormatError::Fault::UnexpectedTensor, "unexpected tensor: " + name);
    }
  }
  // Typed accessors re-check per-tensor shapes and finiteness.
  embed();
  final_norm();
  lm_head();
  for (std::size_t i = 1; i <= config.n_layers; ++i) layer_view(i);
}

TensorArchive TensorArchive::assemble(const ModelConfig& config, const Matrix2D& embed,
                                      const std::vector<LayerWeights>& layers,
                                      const Vector1D& final_norm, const Matrix2D& lm_head) {
  if (layers.size() != config.n_layers) {
    throw ShapeError("assemble: " + std::to_string(layers.size()) + " layers for config with " +
                     std::to_string(config.n_layers));
  }
  TensorArchive a;
  a.config = config;
  a.entries.push_back(make_entry(std::string(kEmbedName), embed));
  for (std::size_t i = 1; i <= layers.size(); ++i) {
    const LayerWeights& w = layers[i - 1];
    a.entries.push_back(make_entry(layer_tensor_name(i, "attn.q"), w.w_q));
    a.entries.push_back(make_entry(layer_tensor_name(i, "attn.k"), w.w_k));
    a.entries.push_back(make_entry(layer_tensor_name(i, "attn.v"), w.w_v));
    a.entries.push_back(make_entry(layer_tensor_name(i, "attn.o"), w.w_o));
    a.entries.push_back(make_entry(layer_tensor_name(i, "mlp.gate"), w.w_gate));
    a.entries.push_back(make_entry(layer_tensor_name(i, "mlp.up"), w.w_up));
    a.entries.push_back(make_entry(layer_tensor_name(i, "mlp.down"), w.w_down));
    a.entries.push_back(make_entry(layer_tensor_name(i, "norm.attn"), w.norm_attn));
    a.entries.push_back(make_entry(layer_tensor_name(i, "norm.mlp"), w.norm_mlp));
  }
  a.entries.push_back(make_entry(std::string(kFinalNormName), final_norm));
  a.entries.push_back(make_entry(std::string(kLmHeadName), lm_head));
  a.validate();
  return a;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  archive.validate();

  // Offsets are relative to the 64-aligned payload base, so the header can
  // be serialized in one pass.
  json tensors = json::array();
  std::size_t rel = 0;
  for (const auto& e : archive.entries) {
    tensors.push_back(json{{"name", e.name},
                           {"shape", e.shape},
                           {"dtype", "f32"},
                           {"offset", rel}});
    rel = align_up(rel + e.data.size() * 4);
  }
  const json header = json{{"config", config_to_json(archive.config)}, {"tensors", tensors}};
  const std::string header_str = header.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  const auto hlen = static_cast<std::uint32_t>(header_str.size());
  out.push_back(static_cast<std::uint8_t>(hlen));
  out.push_back(static_cast<std::uint8_t>(hlen >> 8));
  out.push_back(static_cast<std::uint8_t>(hlen >> 16));
  out.push_back(static_cast<std::uint8_t>(hlen >> 24));
  out.insert(out.end(), header_str.begin(), header_str.end());
  const std::size_t payload_base = align_up(out.size());
  out.resize(payload_base, 0);
  for (const auto& e : archive.entries) {
    const auto bytes = tensor_bytes(e);
    out.insert(out.end(), bytes.begin(), bytes.end());
    out.resize(align_up(out.size()), 0);
  }

  // Single writer: stage to a temp file, then atomic rename.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + tmp.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 4 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(FormatError::Fault::BadMagic, "bad magic: not a DEUS1 archive");
  }
  const std::uint8_t* p = bytes.data() + sizeof(kMagic);
  const std::uint32_t hlen = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  const std::size_t header_start = sizeof(kMagic) + 4;
  if (header_start + hlen > bytes.size()) {
    throw FormatError(FormatError::Fault::Truncated, "truncated: header exceeds file size");
  }
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                         bytes.begin() + static_cast<std::ptrdiff_t>(header_start + hlen));
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Fault::BadHeader, std::string("bad header JSON: ") + e.what());
  }

  TensorArchive a;
  if (!header.contains("config") || !header.contains("tensors") ||
      !header["tensors"].is_array()) {
    throw FormatError(FormatError::Fault::BadHeader, "header missing config/tensors");
  }
  a.config = config_from_json(header["config"]);
  const std::size_t payload_base = align_up(header_start + hlen);

  for (const auto& t : header["tensors"]) {
    TensorEntry e;
    try {
      e.name = t.at("name").get<std::string>();
      e.shape = t.at("shape").get<std::vector<std::size_t>>();
      if (t.at("dtype").get<std::string>() != "f32") {
        throw FormatError(FormatError::Fault::BadHeader,
                          "unsupported dtype for tensor " + e.name);
      }
    } catch (const json::exception& ex) {
      throw FormatError(FormatError::Fault::BadHeader,
                        std::string("bad tensor table entry: ") + ex.what());
    }
    std::size_t offset = 0;
    try {
      offset = t.at("offset").get<std::size_t>();
    } catch (const json::exception& ex) {
      throw FormatError(FormatError::Fault::BadHeader,
                        std::string("bad tensor offset: ") + ex.what());
    }
    if (offset % kAlign != 0) {
      throw FormatError(FormatError::Fault::BadHeader,
                        "tensor " + e.name + " offset not 64-byte aligned");
    }
    const std::size_t count = e.element_count();
    const std::size_t begin = payload_base + offset;
    if (begin + count * 4 > bytes.size()) {
      throw FormatError(FormatError::Fault::Truncated,
                        "truncated: payload of " + e.name + " exceeds file size");
    }
    e.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const float v = get_f32_le(bytes.data() + begin + i * 4);
      if (!std::isfinite(v)) {
        throw FormatError(FormatError::Fault::NonFinite,
                          "NaN/Inf in payload of " + e.name);
      }
      e.data[i] = static_cast<double>(v);
    }
    a.entries.push_back(std::move(e));
  }
  a.validate();
  return a;
}

std::uint64_t payload_checksum(const TensorEntry& entry) {
  std::uint64_t h = 14695981039346656037ULL;
  for (double v : entry.data) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int s = 0; s < 32; s += 8) {
      h ^= (bits >> s) & 0xFF;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace deus
