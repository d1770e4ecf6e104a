#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "robustbf/beamnet.hpp"
#include "robustbf/errors.hpp"

namespace robustbf {

namespace {

constexpr char kMagic[8] = {'R', 'B', 'F', 'N', 'E', 'T', '\0', '\1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rows()));
    u32(static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) f64(t(i, j));
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Tensor tensor(Eigen::Index rows, Eigen::Index cols) {
    const auto r = u32();
    const auto c = u32();
    if (r != rows || c != cols) throw CheckpointError("checkpoint: tensor shape does not match architecture");
    Tensor t(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) t(i, j) = f64();
    return t;
  }
  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(in_.data() + pos_, kMagic, sizeof(kMagic)) != 0)
      throw CheckpointError("checkpoint: bad magic");
    pos_ += sizeof(kMagic);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw CheckpointError("checkpoint: truncated");
  }

  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const NetParams& params) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(params.arch.antennas));
  w.u32(static_cast<std::uint32_t>(params.arch.users));
  w.u32(static_cast<std::uint32_t>(params.arch.hidden.size()));
  for (int width : params.arch.hidden) w.u32(static_cast<std::uint32_t>(width));
  for (const DenseLayer& l : params.layers) {
    w.tensor(l.weight);
    w.tensor(l.bias);
    if (l.normalized()) {
      w.tensor(l.gamma);
      w.tensor(l.beta);
      w.tensor(l.running_mean);
      w.tensor(l.running_var);
    }
  }
  return w.take();
}

NetParams deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.expect_magic();
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  Architecture arch;
  arch.antennas = static_cast<int>(r.u32());
  arch.users = static_cast<int>(r.u32());
  const std::uint32_t n_hidden = r.u32();
  if (n_hidden > 1024) throw CheckpointError("checkpoint: implausible layer count");
  for (std::uint32_t i = 0; i < n_hidden; ++i) arch.hidden.push_back(static_cast<int>(r.u32()));
  try {
    arch.validate();
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }

  NetParams params;
  params.arch = arch;
  Eigen::Index fan_in = arch.input_size();
  for (std::size_t l = 0; l <= arch.hidden.size(); ++l) {
    const bool hidden = l < arch.hidden.size();
    const Eigen::Index fan_out = hidden ? arch.hidden[l] : arch.output_size();
    DenseLayer layer;
    layer.weight = r.tensor(fan_in, fan_out);
    layer.bias = r.tensor(1, fan_out);
    if (hidden) {
      layer.gamma = r.tensor(1, fan_out);
      layer.beta = r.tensor(1, fan_out);
      layer.running_mean = r.tensor(1, fan_out);
      layer.running_var = r.tensor(1, fan_out);
    }
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes");
  return params;
}

void save_checkpoint(const NetParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  const std::string bytes = serialize(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

NetParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace robustbf
