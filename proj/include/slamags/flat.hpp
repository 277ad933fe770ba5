#pragma once

#include <stdexcept>
#include <vector>

#include "slamags/mat.hpp"

namespace slamags {

// Parameter tensors flattened to one vector in declaration order. The same
// ordering is used for gradients, optimizer buffers, and checkpoints, so a
// span in the flat vector always maps back to the same tensor.
inline size_t total_size(const std::vector<const Mat*>& tensors) {
  size_t n = 0;
  for (const Mat* m : tensors) n += m->size();
  return n;
}

inline std::vector<double> flatten(const std::vector<const Mat*>& tensors) {
  std::vector<double> flat;
  flat.reserve(total_size(tensors));
  for (const Mat* m : tensors) flat.insert(flat.end(), m->data.begin(), m->data.end());
  return flat;
}

inline void unflatten(const std::vector<double>& flat, const std::vector<Mat*>& tensors) {
  size_t pos = 0;
  for (Mat* m : tensors) {
    if (pos + m->size() > flat.size())
      throw std::invalid_argument("unflatten: flat vector shorter than parameter layout");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + m->size()), m->data.begin());
    pos += m->size();
  }
  if (pos != flat.size())
    throw std::invalid_argument("unflatten: flat vector longer than parameter layout");
}

}  // namespace slamags
