#include "slamags/serialize.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace slamags {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'A', 'G'};

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(buf, bits);
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    const uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(size_t n) {
    if (pos_ + n > data_.size())
      throw std::runtime_error(path_ + ": truncated checkpoint file");
  }

  const std::string& data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void save_slag(const std::string& path, const SlagFile& file) {
  std::string buf;
  buf.reserve(24 + 4 * file.meta.size() + 8 * file.payload.size());
  buf.append(kMagic, 4);
  put_u32(buf, kSlagVersion);
  put_u32(buf, file.kind);
  put_u32(buf, static_cast<uint32_t>(file.meta.size()));
  for (uint32_t m : file.meta) put_u32(buf, m);
  put_u64(buf, static_cast<uint64_t>(file.payload.size()));
  for (double d : file.payload) put_f64(buf, d);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

SlagFile load_slag(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0)
    throw std::runtime_error(path + ": not a SLAG checkpoint (bad magic)");

  Reader r(data, path);
  r.u32();  // magic, already validated
  const uint32_t version = r.u32();
  if (version != kSlagVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));

  SlagFile file;
  file.kind = r.u32();
  const uint32_t n_meta = r.u32();
  file.meta.reserve(n_meta);
  for (uint32_t i = 0; i < n_meta; ++i) file.meta.push_back(r.u32());
  const uint64_t n_payload = r.u64();
  if (n_payload * 8 != r.remaining())
    throw std::runtime_error(path + ": payload length mismatch");
  file.payload.reserve(n_payload);
  for (uint64_t i = 0; i < n_payload; ++i) file.payload.push_back(r.f64());
  return file;
}

}  // namespace slamags
