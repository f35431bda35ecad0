#include "hpgn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "hpgn/errors.hpp"
#include "hpgn/io_util.hpp"

namespace hpgn {

namespace {

constexpr char kMagic[8] = {'H', 'P', 'G', 'N', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void str(std::string_view s) {
    uint(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void array(std::uint8_t kind, const NamedArray& a) {
    if (a.shape.numel() != a.data.size()) throw ContractError("checkpoint record '" + a.name + "' has inconsistent size");
    uint(kind);
    str(a.name);
    uint(static_cast<std::uint32_t>(a.shape.rank()));
    for (const auto d : a.shape.dims()) uint(static_cast<std::uint64_t>(d));
    for (const float f : a.data) uint(std::bit_cast<std::uint32_t>(f));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint is truncated");
  }
  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  NamedArray array() {
    NamedArray a;
    a.name = str();
    const auto rank = uint<std::uint32_t>();
    if (rank > 8) throw IoError("checkpoint record '" + a.name + "' has implausible rank");
    std::vector<std::size_t> dims(rank);
    std::size_t numel = 1;
    for (auto& d : dims) {
      d = static_cast<std::size_t>(uint<std::uint64_t>());
      if (d != 0 && numel > (bytes_.size() / 4) / d) throw IoError("checkpoint record '" + a.name + "' is too large");
      numel *= d;
    }
    a.shape = Shape(dims);
    need(numel * 4);
    a.data.resize(numel);
    for (auto& f : a.data) f = std::bit_cast<float>(uint<std::uint32_t>());
    return a;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::string_view peek(std::size_t n) const { return bytes_.substr(pos_, n); }
  void skip(std::size_t n) { need(n); pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

NamedArray named(const std::string& name, const Shape& shape, std::span<const float> data) {
  return {name, shape, std::vector<float>(data.begin(), data.end())};
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.uint(c.version);
  const auto text = c.config.serialize();
  w.uint(fnv1a64(text));
  w.str(text);
  w.uint(c.step);
  w.str(c.rng_state);
  w.uint(c.adam_step);
  w.uint(static_cast<std::uint32_t>(c.params.size() + c.adam_m.size() + c.adam_v.size()));
  for (const auto& a : c.params) w.array(0, a);
  for (const auto& a : c.adam_m) w.array(1, a);
  for (const auto& a : c.adam_v) w.array(2, a);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic);
  if (r.peek(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw IoError("not a checkpoint (bad magic)");
  r.skip(sizeof kMagic);
  Checkpoint c;
  c.version = r.uint<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw IncompatibleCheckpoint("checkpoint format version " + std::to_string(c.version) +
                                 " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto hash = r.uint<std::uint64_t>();
  const auto text = r.str();
  if (fnv1a64(text) != hash) throw IoError("checkpoint config hash does not match its config text");
  try {
    c.config = TrainConfig::parse(text);
  } catch (const ConfigError& e) {
    throw IncompatibleCheckpoint(std::string("checkpoint config is not understood: ") + e.what());
  }
  if (c.config.serialize() != text) throw IncompatibleCheckpoint("checkpoint config is not in canonical form");
  c.step = r.uint<std::uint64_t>();
  c.rng_state = r.str();
  c.adam_step = r.uint<std::uint64_t>();
  const auto count = r.uint<std::uint32_t>();
  int last_kind = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind = r.uint<std::uint8_t>();
    if (kind > 2 || kind < last_kind) throw IoError("checkpoint record kinds out of order");
    last_kind = kind;
    auto a = r.array();
    (kind == 0 ? c.params : kind == 1 ? c.adam_m : c.adam_v).push_back(std::move(a));
  }
  if (!r.done()) throw IoError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Checkpoint snapshot(const TrainConfig& config, std::uint64_t step, const HpgnModel<float>& model,
                    const Adam<float>& optimizer, const Rng& rng) {
  Checkpoint c;
  c.config = config;
  c.step = step;
  std::ostringstream os;
  os << rng;
  c.rng_state = os.str();
  const auto params = model.parameters();
  c.adam_step = optimizer.step_count();
  const auto& m = optimizer.first_moments();
  const auto& v = optimizer.second_moments();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entries()[i];
    c.params.push_back(named(e.name, e.tensor.shape(), e.tensor.data()));
    if (c.adam_step > 0) {
      c.adam_m.push_back(named(e.name, e.tensor.shape(), m[i]));
      c.adam_v.push_back(named(e.name, e.tensor.shape(), v[i]));
    }
  }
  return c;
}

HpgnModel<float> restore_model(const Checkpoint& checkpoint) {
  auto model = HpgnModel<float>::create(checkpoint.config.model, checkpoint.config.seed);
  auto params = model.parameters();
  if (params.size() != checkpoint.params.size()) {
    throw IncompatibleCheckpoint("checkpoint holds " + std::to_string(checkpoint.params.size()) +
                                 " parameter tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entries()[i];
    const auto& rec = checkpoint.params[i];
    if (rec.name != e.name || !(rec.shape == e.tensor.shape())) {
      throw IncompatibleCheckpoint("checkpoint record '" + rec.name + "' " + rec.shape.str() + " does not match '" +
                                   e.name + "' " + e.tensor.shape().str());
    }
    auto target = e.tensor;
    auto dst = target.mutable_data();
    std::copy(rec.data.begin(), rec.data.end(), dst.begin());
  }
  return model;
}

Adam<float> restore_optimizer(const Checkpoint& checkpoint, const ParamSet<float>& params) {
  Adam<float> adam(params, checkpoint.config.adam);
  if (checkpoint.adam_step == 0) return adam;
  if (checkpoint.adam_m.size() != params.size() || checkpoint.adam_v.size() != params.size()) {
    throw IncompatibleCheckpoint("checkpoint optimizer state does not cover every parameter");
  }
  std::vector<std::vector<float>> m, v;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entries()[i];
    for (const auto* rec : {&checkpoint.adam_m[i], &checkpoint.adam_v[i]}) {
      if (rec->name != e.name || !(rec->shape == e.tensor.shape())) {
        throw IncompatibleCheckpoint("checkpoint optimizer record '" + rec->name + "' does not match '" + e.name + "'");
      }
    }
    m.push_back(checkpoint.adam_m[i].data);
    v.push_back(checkpoint.adam_v[i].data);
  }
  adam.restore(checkpoint.adam_step, std::move(m), std::move(v));
  return adam;
}

Rng restore_rng(const Checkpoint& checkpoint) {
  Rng rng;
  std::istringstream is(checkpoint.rng_state);
  is >> rng;
  if (is.fail()) throw IoError("checkpoint RNG state is malformed");
  return rng;
}

}  // namespace hpgn
