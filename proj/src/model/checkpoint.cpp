#include "acf/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace acf {
namespace {

constexpr char kMagic[8] = {'A', 'C', 'F', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw Error(errc::kFormat, "checkpoint truncated at byte " + std::to_string(pos_) + " while reading " + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

template <typename Real>
NamedTensor to_named(const std::string& name, const Shape& shape, std::span<const Real> values) {
  NamedTensor t{name, shape, std::vector<float>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) t.data[i] = static_cast<float>(values[i]);
  return t;
}

template <typename Real>
void copy_from(const NamedTensor& src, std::span<Real> dst, const Shape& expected) {
  if (src.shape != expected) {
    throw Error(errc::kFormat, "checkpoint tensor '" + src.name + "' has shape " + shape_string(src.shape) +
                                   ", network expects " + shape_string(expected));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(src.data[i]);
}

const NamedTensor& require(const Checkpoint& ckpt, const std::string& name) {
  const NamedTensor* t = ckpt.find(name);
  if (!t) throw Error(errc::kFormat, "checkpoint is missing tensor '" + name + "'");
  return *t;
}

}  // namespace

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  const std::string config = to_config_text(ckpt.config);
  w.u64(config.size());
  w.bytes(config.data(), config.size());
  w.u64(ckpt.epoch);
  w.u64(ckpt.optimizer_steps);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const NamedTensor& t : ckpt.tensors) {
    if (shape_size(t.shape) != t.data.size()) {
      throw Error(errc::kShape, "checkpoint tensor '" + t.name + "' data does not match its shape");
    }
    w.str32(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (const std::size_t d : t.shape) w.u64(d);
    for (const float v : t.data) w.f32(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  const std::string magic = r.str(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(errc::kFormat, "not a checkpoint (bad magic at byte 0)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw Error(errc::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint64_t config_len = r.u64("config length");
  ckpt.config = parse_model_config(r.str(config_len, "config text"));
  ckpt.epoch = r.u64("epoch");
  ckpt.optimizer_steps = r.u64("optimizer steps");
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(r.u32("name length"), "tensor name");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw Error(errc::kFormat, "tensor '" + t.name + "' has implausible rank " + std::to_string(rank));
    for (std::uint32_t k = 0; k < rank; ++k) t.shape.push_back(static_cast<std::size_t>(r.u64("dimension")));
    const std::size_t n = shape_size(t.shape);
    r.need(n * 4, "tensor data");
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) t.data[k] = r.f32("tensor data");
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw Error(errc::kFormat, "trailing bytes after checkpoint at byte " + std::to_string(r.pos()));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(errc::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(errc::kIo, "failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::kIo, "cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

template <typename Real>
Checkpoint make_checkpoint(Network<Real>& net, std::uint64_t epoch) {
  Checkpoint ckpt;
  ckpt.config = net.config();
  ckpt.epoch = epoch;
  for (Parameter<Real>* p : net.parameters()) {
    ckpt.tensors.push_back(to_named<Real>(p->name, p->value.shape(), p->value.values()));
    ckpt.optimizer_steps = std::max(ckpt.optimizer_steps, p->state.steps);
  }
  for (Parameter<Real>* p : net.parameters()) {
    const Tensor<Real>& acc = p->state.accumulator;
    if (acc.shape() == p->value.shape()) {
      ckpt.tensors.push_back(to_named<Real>(p->name + ".rms", acc.shape(), acc.values()));
    } else {
      ckpt.tensors.push_back(NamedTensor{p->name + ".rms", p->value.shape(), std::vector<float>(p->value.size())});
    }
  }
  for (auto& [name, buffer] : net.buffers()) {
    ckpt.tensors.push_back(
        to_named<Real>(name, Shape{buffer->size()}, std::span<const Real>(buffer->data(), buffer->size())));
  }
  return ckpt;
}

template <typename Real>
void restore_checkpoint(Network<Real>& net, const Checkpoint& ckpt) {
  for (Parameter<Real>* p : net.parameters()) {
    copy_from(require(ckpt, p->name), p->value.values(), p->value.shape());
    p->state.accumulator = Tensor<Real>(p->value.shape());
    copy_from(require(ckpt, p->name + ".rms"), p->state.accumulator.values(), p->value.shape());
    p->state.steps = ckpt.optimizer_steps;
  }
  for (auto& [name, buffer] : net.buffers()) {
    copy_from(require(ckpt, name), std::span<Real>(buffer->data(), buffer->size()), Shape{buffer->size()});
  }
}

template Checkpoint make_checkpoint(Network<float>&, std::uint64_t);
template Checkpoint make_checkpoint(Network<double>&, std::uint64_t);
template void restore_checkpoint(Network<float>&, const Checkpoint&);
template void restore_checkpoint(Network<double>&, const Checkpoint&);

}  // namespace acf
