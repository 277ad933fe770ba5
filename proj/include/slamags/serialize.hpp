#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slamags {

// Checkpoint container: magic "SLAG", format version, a payload-kind tag,
// a u32 metadata list (dims, flags), then little-endian f64 data.
inline constexpr uint32_t kSlagVersion = 1;
inline constexpr uint32_t kKindEncoder = 1;
inline constexpr uint32_t kKindAggregator = 2;

struct SlagFile {
  uint32_t kind = 0;
  std::vector<uint32_t> meta;
  std::vector<double> payload;
};

void save_slag(const std::string& path, const SlagFile& file);
SlagFile load_slag(const std::string& path);  // throws on bad magic/version/truncation

}  // namespace slamags
