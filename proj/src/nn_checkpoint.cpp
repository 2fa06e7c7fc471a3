#include <algorithm>

#include "beacon/binary_io.hpp"
#include "beacon/nn/checkpoint.hpp"

namespace beacon::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'B', 'E', 'A', 'C', 'O', 'N', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> blocks) {
  io::ByteWriter body;
  for (const auto& b : blocks) {
    if (b.name.size() > 0xFFFF) throw PreconditionError("checkpoint block name too long");
    body.u16(static_cast<std::uint16_t>(b.name.size()));
    body.text(b.name);
    body.u8(static_cast<std::uint8_t>(b.tensor.rank()));
    for (auto d : b.tensor.shape()) body.u32(static_cast<std::uint32_t>(d));
    for (double v : b.tensor.data()) body.f32(static_cast<float>(v));
  }
  io::ByteWriter w;
  w.text({kMagic.data(), kMagic.size()});
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  w.bytes(body.buffer());
  w.u32(crc32(body.buffer()));
  return w.take();
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  const auto magic = r.bytes(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw FormatError("checkpoint: bad magic bytes");
  if (r.u16() != kVersion) throw FormatError("checkpoint: unsupported version");
  const auto count = r.u32();
  if (r.remaining() < 4) throw TruncatedError("checkpoint: truncated payload");
  const auto body = bytes.subspan(r.position(), r.remaining() - 4);
  io::ByteReader trailer(bytes.subspan(bytes.size() - 4), "checkpoint trailer");

  io::ByteReader b(body, "checkpoint");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const auto name_len = b.u16();
    const auto name = b.bytes(name_len);
    nt.name.assign(name.begin(), name.end());
    const auto rank = b.u8();
    if (rank == 0) throw FormatError("checkpoint: zero-rank block " + nt.name);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = b.u32();
      if (d == 0) throw FormatError("checkpoint: zero dimension in " + nt.name);
      n *= d;
    }
    if (b.remaining() < n * 4) throw TruncatedError("checkpoint: truncated payload");
    std::vector<double> data(n);
    for (auto& v : data) v = b.f32();
    nt.tensor = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(nt));
  }
  if (b.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  if (trailer.u32() != crc32(body)) throw ChecksumError("checkpoint: checksum mismatch");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> blocks) {
  io::write_file(path, encode_checkpoint(blocks));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

void round_to_f32(Tensor& t) {
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

const Tensor& find_block(std::span<const NamedTensor> blocks, const std::string& name,
                         const std::vector<std::size_t>& shape) {
  for (const auto& b : blocks) {
    if (b.name != name) continue;
    if (b.tensor.shape() != shape)
      throw FormatError("checkpoint block " + name + " has shape " + b.tensor.shape_string());
    return b.tensor;
  }
  throw FormatError("checkpoint block missing: " + name);
}

}  // namespace beacon::nn
