#pragma once

#include <string>
#include <utility>
#include <vector>

namespace derev::io {

// Versioned tensor container used for both model checkpoints and array dumps:
// a text header (metadata plus a name/shape table) followed by the raw
// little-endian float32 payloads in header order.
struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> data;

  size_t element_count() const {
    size_t n = 1;
    for (int d : dims) n *= static_cast<size_t>(d);
    return n;
  }
};

struct TensorContainer {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedTensor> tensors;

  const std::string* find_meta(const std::string& key) const;
  const NamedTensor* find_tensor(const std::string& name) const;
};

void write_container(const std::string& path, const TensorContainer& c);
TensorContainer read_container(const std::string& path);

}  // namespace derev::io
