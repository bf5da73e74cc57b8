#include "drloc/numcore/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "drloc/numcore/errors.hpp"

namespace drloc::nc {
namespace {

constexpr char kMagic[4] = {'D', 'R', 'L', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }

  double f64() {
    need(8, "f64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }

  std::string text(std::size_t n) {
    need(n, "name");
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw DataError("checkpoint: truncated while reading " + std::string(what) + " at byte " +
                      std::to_string(pos_));
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.value.data()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint: missing DRL1 magic");
  }
  Reader r(bytes, 4);
  std::vector<NamedTensor> out;
  while (!r.done()) {
    NamedTensor t;
    t.name = r.text(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DataError("checkpoint: implausible rank " + std::to_string(rank) + " for " + t.name);
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw DataError("checkpoint: zero-sized dimension in " + t.name);
      count = count > r.remaining() / d ? r.remaining() + 1 : count * d;
    }
    if (count > r.remaining() / 8) {
      throw DataError("checkpoint: truncated payload for " + t.name + " at byte " +
                      std::to_string(r.offset()));
    }
    std::vector<double> values(count);
    for (auto& v : values) v = r.f64();
    t.value = Tensor::from(std::move(shape), std::move(values));
    out.push_back(std::move(t));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const auto bytes = encode_checkpoint(tensors);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot open " + tmp.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace drloc::nc
