#include "htr/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "htr/core/errors.hpp"

namespace htr::model {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'H', 'T', 'R', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename U>
  void put(U v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(U));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    U v;
    std::memcpy(&v, take(sizeof(U)), sizeof(U));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

CheckpointHeader read_header(Reader& r) {
  const auto* magic = r.take(sizeof(kMagic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError("not a checkpoint (bad magic)");
  CheckpointHeader h;
  h.version = r.get<std::uint32_t>();
  if (h.version != 1) throw DataError("unsupported checkpoint version " + std::to_string(h.version));
  h.seed = r.get<std::uint64_t>();
  h.spec = ModelSpec::parse(r.get_string());
  return h;
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(const Model<T>& model, std::uint64_t seed) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(seed);
  w.put_string(model.spec().serialize());
  const auto& reg = model.params();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(reg.size()));
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& p = reg[i];
    w.put_string(p.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype_of<T>()));
    w.put<std::uint8_t>(p.trainable ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.put<std::uint64_t>(d);
    w.put<std::uint64_t>(p.value.size() * sizeof(T));
    w.put_bytes(p.value.ptr(), p.value.size() * sizeof(T));
  }
  return w.take();
}

CheckpointHeader read_checkpoint_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  return read_header(r);
}

template <typename T>
CheckpointHeader deserialize_checkpoint(std::span<const std::uint8_t> bytes, Model<T>& model) {
  Reader r(bytes);
  auto header = read_header(r);
  if (!(header.spec == model.spec())) throw DataError("checkpoint spec does not match model");
  auto& reg = model.params();
  const auto count = r.get<std::uint32_t>();
  if (count != reg.size()) throw DataError("checkpoint record count mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    auto& p = reg[i];
    const auto name = r.get_string();
    if (name != p.name) throw DataError("checkpoint record '" + name + "' where '" + p.name + "' expected");
    if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(dtype_of<T>())) {
      throw DataError("checkpoint dtype mismatch for " + name);
    }
    r.get<std::uint8_t>();
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    if (shape != p.value.shape()) throw DataError("checkpoint shape mismatch for " + name);
    const auto nbytes = r.get<std::uint64_t>();
    if (nbytes != p.value.size() * sizeof(T)) throw DataError("checkpoint size mismatch for " + name);
    std::memcpy(p.value.ptr(), r.take(nbytes), nbytes);
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint records");
  return header;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, std::uint64_t seed) {
  const auto bytes = serialize_checkpoint(model, seed);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
CheckpointHeader load_checkpoint(const std::filesystem::path& path, Model<T>& model) {
  const auto bytes = read_file_bytes(path);
  return deserialize_checkpoint<T>(bytes, model);
}

template std::vector<std::uint8_t> serialize_checkpoint(const Model<float>&, std::uint64_t);
template std::vector<std::uint8_t> serialize_checkpoint(const Model<double>&, std::uint64_t);
template CheckpointHeader deserialize_checkpoint(std::span<const std::uint8_t>, Model<float>&);
template CheckpointHeader deserialize_checkpoint(std::span<const std::uint8_t>, Model<double>&);
template void save_checkpoint(const std::filesystem::path&, const Model<float>&, std::uint64_t);
template void save_checkpoint(const std::filesystem::path&, const Model<double>&, std::uint64_t);
template CheckpointHeader load_checkpoint(const std::filesystem::path&, Model<float>&);
template CheckpointHeader load_checkpoint(const std::filesystem::path&, Model<double>&);

}  // namespace htr::model
