#include "bprg/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <string>

#include "bprg/error.hpp"

namespace bprg {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint16_t u16() {
    auto b = need(2);
    return std::uint16_t(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = need(4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> need(std::size_t n) {
    if (pos_ + n > in_.size()) throw FormatError("checkpoint is truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<LayerSpec> infer_layers(const std::vector<Parameter<float>>& params) {
  std::vector<LayerSpec> layers;
  bool prev_conv = false;
  bool first = true;
  for (const auto& p : params) {
    if (p.id.role != ParamRole::weight) continue;
    const auto& s = p.value.shape();
    LayerSpec layer;
    if (s.size() == 2) layer = Dense{s[0], s[1]};
    else if (s.size() == 4 && s[2] == 3 && s[3] == 3) layer = Conv3x3{s[1], s[0]};
    else throw FormatError("parameter " + p.id.name() + " has unsupported shape " + shape_to_string(s));
    const bool dense = std::holds_alternative<Dense>(layer);

    if (p.id.layer_index < layers.size()) throw FormatError("parameter " + p.id.name() + " is out of order");
    while (layers.size() < p.id.layer_index) {
      const bool last_gap = layers.size() + 1 == p.id.layer_index;
      if (last_gap && dense && (prev_conv || first)) layers.push_back(Flatten{});
      else layers.push_back(Relu{});
    }
    layers.push_back(layer);
    prev_conv = !dense;
    first = false;
  }
  return layers;
}

std::vector<std::uint8_t> encode_checkpoint(const Model<float>& model, const MaskSet<float>& masks) {
  masks.require_aligned(model);
  Writer w;
  w.bytes("BPRG", 4);
  w.u32(kCheckpointVersion);
  w.u32(std::uint32_t(model.params().size()));
  for (const auto& p : model.params()) {
    const auto name = p.id.name();
    w.u16(std::uint16_t(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(std::uint8_t(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u32(std::uint32_t(d));
    for (float v : p.value.data()) w.f32(v);
  }
  for (const auto& slot : masks.slots()) {
    const std::size_t n = slot.bits.size();
    std::vector<std::uint8_t> packed((n + 7) / 8, 0);
    for (std::size_t i = 0; i < n; ++i)
      if (slot.bits[i]) packed[i / 8] |= std::uint8_t(1u << (i % 8));
    w.bytes(packed.data(), packed.size());
    w.u8(slot.pruned > 0 ? 1 : 0);
    if (slot.pruned > 0)
      for (float v : slot.graveyard) w.f32(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.need(4);
  if (std::string(magic.begin(), magic.end()) != "BPRG") throw FormatError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  const std::uint32_t count = r.u32();
  std::vector<Parameter<float>> params;
  params.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t name_len = r.u16();
    const auto name_bytes = r.need(name_len);
    const auto id = ParamId::parse(std::string(name_bytes.begin(), name_bytes.end()));
    const std::uint8_t ndim = r.u8();
    Shape shape(ndim);
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw FormatError("parameter " + id.name() + " has a zero dimension");
    }
    std::vector<float> values(shape_numel(shape));
    for (auto& v : values) v = r.f32();
    try {
      params.push_back({id, Tensor(std::move(shape), std::move(values), true)});
    } catch (const NumericError&) {
      throw FormatError("parameter " + id.name() + " holds a non-finite value");
    }
  }

  Model<float> model;
  try {
    auto layers = infer_layers(params);
    model = Model<float>(std::move(layers), std::move(params));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what());
  }

  auto masks = MaskSet<float>::dense(model);
  for (std::size_t s = 0; s < masks.slot_count(); ++s) {
    const std::size_t n = masks.slots()[s].bits.size();
    const auto packed = r.need((n + 7) / 8);
    std::vector<std::uint8_t> bits(n);
    std::size_t pruned = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
      pruned += bits[i] == 0;
    }
    if (n % 8 != 0 && (packed.back() >> (n % 8)) != 0) throw FormatError("mask padding bits are not zero");
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw FormatError("bad graveyard flag");
    if ((flag == 1) != (pruned > 0)) throw FormatError("graveyard flag disagrees with the mask");
    std::vector<float> graveyard(n, 0.0f);
    if (flag)
      for (auto& v : graveyard) v = r.f32();
    masks.restore_slot(s, std::move(bits), std::move(graveyard));

    const auto w = model.params()[masks.slots()[s].param_index].value.data();
    for (std::size_t i = 0; i < n; ++i)
      if (!masks.slots()[s].bits[i] && w[i] != 0.0f)
        throw FormatError("masked weight of " + masks.slots()[s].id.name() + " is non-zero");
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return {std::move(model), std::move(masks)};
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const MaskSet<float>& masks) {
  const auto bytes = encode_checkpoint(model, masks);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

}  // namespace bprg
