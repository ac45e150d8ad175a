#include "dreamlab/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dreamlab/oracles.hpp"

namespace dreamlab::nn {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'M', 'C', 'K', 'P', 'T', '\0'};

template <class U>
void put(std::string& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ValidationError("checkpoint: truncated file");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParamRefs& params) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p->value.data()[i]));
    }
  }
  put<std::uint64_t>(out, oracles::fnv1a(out));
  return out;
}

void decode_checkpoint(const std::string& bytes, const ParamRefs& params) {
  if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ValidationError("checkpoint: bad magic");
  }
  const std::string body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.get<std::uint64_t>() != oracles::fnv1a(body)) throw ValidationError("checkpoint: checksum mismatch");

  Reader r(body);
  r.take(sizeof kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) {
    throw ValidationError("checkpoint: holds " + std::to_string(count) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  std::vector<Mat> values;
  values.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const Param& p = *params[k];
    const std::string name = r.take(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw ValidationError("checkpoint: tensor " + std::to_string(k) + " is " + name + " (" +
                            std::to_string(rows) + "x" + std::to_string(cols) + "), model expects " +
                            p.name + " (" + std::to_string(p.value.rows()) + "x" +
                            std::to_string(p.value.cols()) + ")");
    }
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(r.get<std::uint64_t>());
    values.push_back(std::move(m));
  }
  if (r.pos() != body.size()) throw ValidationError("checkpoint: trailing bytes");
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = std::move(values[k]);
}

void save_checkpoint(const std::filesystem::path& path, const ParamRefs& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("checkpoint: cannot write " + path.string());
  const std::string bytes = encode_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ValidationError("checkpoint: write failed for " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, const ParamRefs& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("checkpoint: cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  decode_checkpoint(ss.str(), params);
}

}  // namespace dreamlab::nn
