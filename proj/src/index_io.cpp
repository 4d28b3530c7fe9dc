#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "tagrec/errors.hpp"
#include "tagrec/retrieval.hpp"

namespace tagrec {
namespace {

constexpr std::uint32_t kMaxIdLength = 1u << 16;

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IndexFormatError(std::string("truncated index: ") + what);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw IndexFormatError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void VectorIndex::write(std::ostream& out) const {
  put_u32(out, checked_u32(dim_, "dim"));
  put_u32(out, checked_u32(ids_.size(), "count"));
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    put_u32(out, checked_u32(ids_[i].size(), "id length"));
    out.write(ids_[i].data(), static_cast<std::streamsize>(ids_[i].size()));
    for (float f : row(i)) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw IndexFormatError("index write failed");
}

VectorIndex VectorIndex::read(std::istream& in) {
  const std::uint32_t dim = get_u32(in, "header");
  const std::uint32_t count = get_u32(in, "header");
  if (dim == 0) throw IndexFormatError("index dim is zero");
  VectorIndex index(dim);
  std::vector<float> values(dim);
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t len = get_u32(in, "id length");
    if (len > kMaxIdLength) throw IndexFormatError("implausible id length " + std::to_string(len));
    std::string id(len, '\0');
    if (len > 0 && !in.read(id.data(), len)) throw IndexFormatError("truncated index: id bytes");
    for (auto& v : values) v = std::bit_cast<float>(get_u32(in, "vector"));
    try {
      index.add(std::move(id), values);
    } catch (const std::invalid_argument& ex) {
      throw IndexFormatError("invalid index entry " + std::to_string(e) + ": " + ex.what());
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IndexFormatError("trailing bytes after index entries");
  return index;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IndexFormatError("cannot write " + tmp.string());
    write(out);
    out.flush();
    if (!out) throw IndexFormatError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexFormatError("cannot open index " + path.string());
  return read(in);
}

}  // namespace tagrec
