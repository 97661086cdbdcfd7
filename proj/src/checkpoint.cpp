#include "nsn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "nsn/mnist.hpp"

namespace nsn {
namespace {

constexpr char kMagic[4] = {'N', 'S', 'N', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32s(std::span<const float> values) {
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void layer(const Matrix& w, const Matrix& b) {
    u32(static_cast<std::uint32_t>(w.rows()));
    u32(static_cast<std::uint32_t>(w.cols()));
    f32s(w.values());
    u32(static_cast<std::uint32_t>(b.size()));
    f32s(b.values());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw LengthError(std::string("checkpoint truncated reading ") + what + ": expected " +
                        std::to_string(pos_ + n) + " bytes, got " + std::to_string(bytes_.size()));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  void f32s(std::span<float> out, const char* what) {
    need(out.size() * 4, what);
    for (float& f : out) f = std::bit_cast<float>(u32(what));
  }
  std::string text(std::size_t n) {
    need(n, "config echo");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void layer(Matrix& w, Matrix& b, const char* what) {
    const std::uint32_t rows = u32(what);
    const std::uint32_t cols = u32(what);
    need(std::size_t{rows} * cols * 4, what);
    w = Matrix(rows, cols);
    f32s(w.values(), what);
    const std::uint32_t blen = u32(what);
    need(std::size_t{blen} * 4, what);
    b = Matrix(1, blen);
    f32s(b.values(), what);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  if (c.momentum.velocity.size() != c.groups.size()) {
    throw ConsistencyError("checkpoint: " + std::to_string(c.groups.size()) + " groups but " +
                           std::to_string(c.momentum.velocity.size()) + " momentum buffers");
  }
  Writer w;
  w.raw(kMagic, 4);
  w.u32(c.version);
  w.u32(c.n);
  w.u32(static_cast<std::uint32_t>(c.groups.size()));
  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    w.layer(c.groups[g].weight, c.groups[g].bias);
    w.layer(c.momentum.velocity[g].weight, c.momentum.velocity[g].bias);
  }
  w.u32(c.epoch);
  w.u64(c.seeds.init);
  w.u64(c.seeds.shuffle);
  w.u64(c.seeds.dropout);
  w.u32(static_cast<std::uint32_t>(c.config_echo.size()));
  w.raw(c.config_echo.data(), c.config_echo.size());
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw LengthError("checkpoint truncated: expected at least 4 bytes, got " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic, expected NSN1");
  Reader r(bytes.subspan(4));
  Checkpoint c;
  c.version = r.u32("version");
  if (c.version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(c.version));
  }
  c.n = r.u32("n");
  const std::uint32_t count = r.u32("group count");
  if (count != c.n + 1) {
    throw FormatError("checkpoint: " + std::to_string(count) + " groups for n=" + std::to_string(c.n));
  }
  c.groups.resize(count);
  c.momentum.velocity.resize(count);
  for (std::uint32_t g = 0; g < count; ++g) {
    r.layer(c.groups[g].weight, c.groups[g].bias, "group weights");
    r.layer(c.momentum.velocity[g].weight, c.momentum.velocity[g].bias, "momentum");
    if (!c.momentum.velocity[g].weight.same_shape(c.groups[g].weight) ||
        !c.momentum.velocity[g].bias.same_shape(c.groups[g].bias) || c.groups[g].bias.cols() != c.groups[g].out()) {
      throw FormatError("checkpoint: inconsistent shapes in group " + std::to_string(g));
    }
  }
  c.epoch = r.u32("epoch");
  c.seeds.init = r.u64("seeds");
  c.seeds.shuffle = r.u64("seeds");
  c.seeds.dropout = r.u64("seeds");
  const std::uint32_t len = r.u32("config length");
  c.config_echo = r.text(len);
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes after config echo");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Written to a sibling temp file, then renamed into place.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

TrainConfig config_from_checkpoint(const Checkpoint& checkpoint) {
  TrainConfig config;
  apply_key_values(config, checkpoint.config_echo);
  config.seeds = checkpoint.seeds;
  return config;
}

}  // namespace nsn
