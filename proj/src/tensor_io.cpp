#include "ggssm/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ggssm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "GGT1 I/O assumes a little-endian host");

namespace ggssm {
namespace {

constexpr char kMagic[4] = {'G', 'G', 'T', '1'};
constexpr uint8_t kContainerTag = 0xFF;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated GGT1 file while reading " + what);
  return v;
}

void put_tensor_payload(std::ostream& os, const Tensor& t, Dtype dtype) {
  if (dtype == Dtype::f64) {
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  } else {
    std::vector<float> f(t.values.begin(), t.values.end());
    os.write(reinterpret_cast<const char*>(f.data()),
             static_cast<std::streamsize>(f.size() * sizeof(float)));
  }
}

std::vector<double> get_tensor_payload(std::istream& is, Dtype dtype, size_t n) {
  std::vector<double> out(n);
  if (dtype == Dtype::f64) {
    is.read(reinterpret_cast<char*>(out.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    std::vector<float> f(n);
    is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * sizeof(float)));
    for (size_t i = 0; i < n; ++i) out[i] = static_cast<double>(f[i]);
  }
  if (!is) throw IoError("truncated GGT1 payload");
  return out;
}

Dtype check_dtype(uint8_t tag) {
  if (tag != 0 && tag != 1) throw IoError("unknown GGT1 dtype tag " + std::to_string(tag));
  return static_cast<Dtype>(tag);
}

std::vector<uint32_t> get_dims(std::istream& is) {
  uint32_t rank = get<uint32_t>(is, "rank");
  if (rank > 8) throw IoError("GGT1 rank " + std::to_string(rank) + " out of range");
  std::vector<uint32_t> dims(rank);
  for (uint32_t i = 0; i < rank; ++i) dims[i] = get<uint32_t>(is, "dims");
  return dims;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace

Tensor tensor_from_matrix(const Matrixd& m) {
  Tensor t;
  t.dims = {m.rows(), m.cols()};
  t.values = m.storage();
  return t;
}

Matrixd matrix_from_tensor(const Tensor& t) {
  uint32_t rows, cols;
  if (t.dims.size() == 1) {
    rows = 1;
    cols = t.dims[0];
  } else if (t.dims.size() == 2) {
    rows = t.dims[0];
    cols = t.dims[1];
  } else {
    throw IoError("expected rank 1 or 2 tensor, got rank " + std::to_string(t.dims.size()));
  }
  Matrixd m(rows, cols);
  if (t.values.size() != m.size()) throw IoError("tensor payload size does not match dims");
  m.storage() = t.values;
  return m;
}

void write_tensor(const std::string& path, const Tensor& t, Dtype dtype) {
  auto os = open_out(path);
  os.write(kMagic, 4);
  put<uint8_t>(os, static_cast<uint8_t>(dtype));
  put<uint32_t>(os, static_cast<uint32_t>(t.dims.size()));
  for (uint32_t d : t.dims) put<uint32_t>(os, d);
  put_tensor_payload(os, t, dtype);
  if (!os) throw IoError("failed writing '" + path + "'");
}

Tensor read_tensor(const std::string& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("'" + path + "' is not a GGT1 file");
  uint8_t tag = get<uint8_t>(is, "dtype");
  if (tag == kContainerTag)
    throw IoError("'" + path + "' is a GGT1 container, expected a single tensor");
  Dtype dtype = check_dtype(tag);
  Tensor t;
  t.dims = get_dims(is);
  t.values = get_tensor_payload(is, dtype, t.element_count());
  return t;
}

void write_tensor_map(const std::string& path, const TensorMap& tensors, Dtype dtype) {
  auto os = open_out(path);
  os.write(kMagic, 4);
  put<uint8_t>(os, kContainerTag);
  put<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
  uint64_t offset = 0;
  size_t width = dtype == Dtype::f64 ? sizeof(double) : sizeof(float);
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw IoError("tensor name too long: " + name);
    put<uint16_t>(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint8_t>(os, static_cast<uint8_t>(dtype));
    put<uint32_t>(os, static_cast<uint32_t>(t.dims.size()));
    for (uint32_t d : t.dims) put<uint32_t>(os, d);
    put<uint64_t>(os, offset);
    offset += t.element_count() * width;
  }
  for (const auto& [name, t] : tensors) put_tensor_payload(os, t, dtype);
  if (!os) throw IoError("failed writing '" + path + "'");
}

TensorMap read_tensor_map(const std::string& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("'" + path + "' is not a GGT1 file");
  uint8_t tag = get<uint8_t>(is, "container tag");
  if (tag != kContainerTag)
    throw IoError("'" + path + "' is a single GGT1 tensor, expected a container");
  uint32_t count = get<uint32_t>(is, "tensor count");
  struct Entry {
    std::string name;
    Dtype dtype;
    std::vector<uint32_t> dims;
    uint64_t offset;
  };
  std::vector<Entry> manifest(count);
  for (auto& e : manifest) {
    uint16_t len = get<uint16_t>(is, "name length");
    e.name.resize(len);
    is.read(e.name.data(), len);
    if (!is) throw IoError("truncated GGT1 manifest");
    e.dtype = check_dtype(get<uint8_t>(is, "dtype"));
    e.dims = get_dims(is);
    e.offset = get<uint64_t>(is, "offset");
  }
  std::streampos blob_start = is.tellg();
  TensorMap out;
  for (const auto& e : manifest) {
    is.seekg(blob_start + static_cast<std::streamoff>(e.offset));
    Tensor t;
    t.dims = e.dims;
    t.values = get_tensor_payload(is, e.dtype, t.element_count());
    out.emplace(e.name, std::move(t));
  }
  return out;
}

Matrixd read_csv_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(is, line)) throw IoError("'" + path + "': empty CSV");
  size_t cols = static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<double> values;
  size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("'" + path + "': non-numeric cell '" + cell + "' at row " +
                      std::to_string(rows + 2));
      }
      ++c;
    }
    if (c != cols)
      throw IoError("'" + path + "': row " + std::to_string(rows + 2) + " has " +
                    std::to_string(c) + " cells, header has " + std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw IoError("'" + path + "': CSV has a header but no data rows");
  Matrixd m(static_cast<uint32_t>(rows), static_cast<uint32_t>(cols));
  m.storage() = std::move(values);
  return m;
}

Matrixd read_matrix_auto(const std::string& path) {
  {
    auto is = open_in(path);
    char magic[4] = {};
    is.read(magic, 4);
    if (is && std::memcmp(magic, kMagic, 4) == 0) return matrix_from_tensor(read_tensor(path));
  }
  return read_csv_matrix(path);
}

}  // namespace ggssm
