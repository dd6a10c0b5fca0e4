#include "derev/container.h"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace derev::io {

namespace {
constexpr char kMagic[] = "derev-container";
constexpr int kVersion = 1;
}  // namespace

const std::string* TensorContainer::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return &v;
  return nullptr;
}

const NamedTensor* TensorContainer::find_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void write_container(const std::string& path, const TensorContainer& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("missing-file: cannot create " + path);

  out << kMagic << " " << kVersion << "\n";
  for (const auto& [k, v] : c.meta) out << "meta " << k << " " << v << "\n";
  for (const auto& t : c.tensors) {
    if (t.data.size() != t.element_count())
      throw std::invalid_argument("invalid-argument: tensor '" + t.name +
                                  "' shape/payload mismatch");
    out << "tensor " << t.name << " " << t.dims.size();
    for (int d : t.dims) out << " " << d;
    out << "\n";
  }
  out << "payload\n";
  for (const auto& t : c.tensors)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("io-error: short write to " + path);
}

TensorContainer read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing-file: cannot open " + path);

  TensorContainer c;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("bad-format: empty container " + path);
  {
    std::istringstream ls(line);
    std::string magic;
    int version = -1;
    ls >> magic >> version;
    if (magic != kMagic || version != kVersion)
      throw std::runtime_error("bad-format: not a derev container (or wrong version): " + path);
  }

  while (std::getline(in, line)) {
    if (line == "payload") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      c.meta.emplace_back(key, value);
    } else if (kind == "tensor") {
      NamedTensor t;
      size_t ndim = 0;
      ls >> t.name >> ndim;
      for (size_t i = 0; i < ndim; ++i) {
        int d = 0;
        ls >> d;
        if (d <= 0) throw std::runtime_error("bad-format: non-positive dim in " + path);
        t.dims.push_back(d);
      }
      if (!ls) throw std::runtime_error("bad-format: malformed tensor line in " + path);
      c.tensors.push_back(std::move(t));
    } else {
      throw std::runtime_error("bad-format: unexpected header line '" + line + "' in " + path);
    }
  }

  for (auto& t : c.tensors) {
    t.data.resize(t.element_count());
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(float)))
      throw std::runtime_error("bad-format: truncated payload for tensor '" + t.name + "' in " +
                               path);
  }
  return c;
}

}  // namespace derev::io
