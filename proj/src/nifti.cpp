#include "lowfield/nifti.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "lowfield/errors.hpp"

namespace lowfield {

namespace {

static_assert(std::endian::native == std::endian::little,
              "NIfTI I/O assumes a little-endian host");

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

// Byte offsets into the NIfTI-1 header.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

enum DataType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

template <typename T>
T get(const std::array<char, kHeaderSize>& h, std::size_t off) {
  T v;
  std::memcpy(&v, h.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put(std::array<char, kHeaderSize>& h, std::size_t off, T v) {
  std::memcpy(h.data() + off, &v, sizeof(T));
}

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUint8:
    case kInt8: return 1;
    case kInt16:
    case kUint16: return 2;
    case kInt32:
    case kUint32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

template <typename T>
void convert(const std::vector<char>& raw, std::vector<float>& out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
    out[i] = static_cast<float>(v);
  }
}

[[noreturn]] void bad_field(const std::filesystem::path& path, const std::string& field,
                            const std::string& detail) {
  throw FormatError(path.string() + ": invalid NIfTI header field '" + field + "': " + detail);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string volume_stem(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  for (const char* ext : {".nii.gz", ".nii"})
    if (ends_with(name, ext)) return name.substr(0, name.size() - std::strlen(ext));
  return path.stem().string();
}

bool is_volume_file(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  return ends_with(name, ".nii") || ends_with(name, ".nii.gz");
}

Volume load_volume(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw IoError(path.string() + ": no such file");
  // gzread reads uncompressed files transparently.
  GzHandle file(gzopen(path.string().c_str(), "rb"));
  if (!file) throw IoError(path.string() + ": cannot open for reading");

  std::array<char, kHeaderSize> h{};
  if (gzread(file.get(), h.data(), kHeaderSize) != static_cast<int>(kHeaderSize))
    throw FormatError(path.string() + ": truncated NIfTI header");

  const auto sizeof_hdr = get<std::int32_t>(h, kOffSizeofHdr);
  if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    bad_field(path, "sizeof_hdr",
              "expected 348, got " + std::to_string(sizeof_hdr) +
                  " (only little-endian NIfTI-1 is supported)");
  }
  if (std::memcmp(h.data() + kOffMagic, "n+1\0", 4) != 0)
    bad_field(path, "magic", "expected single-file NIfTI-1 'n+1'");

  std::array<std::int16_t, 8> dim{};
  for (int i = 0; i < 8; ++i) dim[i] = get<std::int16_t>(h, kOffDim + 2 * i);
  if (dim[0] < 1 || dim[0] > 7)
    bad_field(path, "dim[0]", "rank " + std::to_string(dim[0]) + " outside 1..7");
  Dims dims{1, 1, 1};
  for (int i = 1; i <= dim[0]; ++i) {
    if (dim[i] < 1)
      bad_field(path, "dim[" + std::to_string(i) + "]", "must be >= 1, got " + std::to_string(dim[i]));
    if (i <= 3) {
      dims[i - 1] = static_cast<std::size_t>(dim[i]);
    } else if (dim[i] != 1) {
      bad_field(path, "dim[" + std::to_string(i) + "]", "only scalar 3D volumes are supported");
    }
  }

  const auto datatype = get<std::int16_t>(h, kOffDatatype);
  const int bpv = bytes_per_voxel(datatype);
  if (bpv == 0) bad_field(path, "datatype", "unsupported code " + std::to_string(datatype));
  const auto bitpix = get<std::int16_t>(h, kOffBitpix);
  if (bitpix != 8 * bpv)
    bad_field(path, "bitpix", std::to_string(bitpix) + " does not match datatype");

  Spacing spacing{};
  for (int a = 0; a < 3; ++a) {
    const float p = get<float>(h, kOffPixdim + 4 * (a + 1));
    if (a < dim[0] && !(p > 0.0f && std::isfinite(p)))
      bad_field(path, "pixdim[" + std::to_string(a + 1) + "]", "spacing must be positive");
    spacing[a] = a < dim[0] ? static_cast<double>(p) : 1.0;
  }

  const float vox_offset = get<float>(h, kOffVoxOffset);
  if (!(vox_offset >= static_cast<float>(kDataOffset)))
    bad_field(path, "vox_offset", "must be >= 352");
  const auto skip = static_cast<std::size_t>(vox_offset) - kHeaderSize;
  std::vector<char> pad(skip);
  if (skip > 0 && gzread(file.get(), pad.data(), static_cast<unsigned>(skip)) != static_cast<int>(skip))
    throw FormatError(path.string() + ": truncated before vox_offset");

  const std::size_t n = voxel_count(dims);
  std::vector<char> raw(n * bpv);
  std::size_t got = 0;
  while (got < raw.size()) {
    const auto chunk = static_cast<unsigned>(std::min<std::size_t>(raw.size() - got, 1u << 30));
    const int r = gzread(file.get(), raw.data() + got, chunk);
    if (r <= 0) break;
    got += static_cast<std::size_t>(r);
  }
  if (got != raw.size())
    throw FormatError(path.string() + ": voxel data shorter than dim[] implies");

  std::vector<float> data(n);
  switch (datatype) {
    case kUint8: convert<std::uint8_t>(raw, data); break;
    case kInt8: convert<std::int8_t>(raw, data); break;
    case kInt16: convert<std::int16_t>(raw, data); break;
    case kUint16: convert<std::uint16_t>(raw, data); break;
    case kInt32: convert<std::int32_t>(raw, data); break;
    case kUint32: convert<std::uint32_t>(raw, data); break;
    case kFloat32: convert<float>(raw, data); break;
    case kFloat64: convert<double>(raw, data); break;
  }

  const float slope = get<float>(h, kOffSclSlope);
  const float inter = get<float>(h, kOffSclInter);
  if (slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f)) {
    for (auto& v : data) v = v * slope + (std::isfinite(inter) ? inter : 0.0f);
  }
  for (float v : data)
    if (!std::isfinite(v)) throw FormatError(path.string() + ": voxel data contains NaN or Inf");

  std::string descrip(h.data() + kOffDescrip, 80);
  descrip = descrip.substr(0, descrip.find('\0'));
  return Volume(dims, spacing, std::move(data), descrip.empty() ? volume_stem(path) : descrip);
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  std::array<char, kHeaderSize> h{};
  put<std::int32_t>(h, kOffSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
  const auto& d = v.dims();
  for (auto n : d)
    if (n > 32767) throw std::invalid_argument("NIfTI-1 dimensions are limited to 32767");
  const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d[0]),
                                        static_cast<std::int16_t>(d[1]),
                                        static_cast<std::int16_t>(d[2]), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<std::int16_t>(h, kOffDim + 2 * i, dim[i]);
  put<std::int16_t>(h, kOffDatatype, kFloat32);
  put<std::int16_t>(h, kOffBitpix, 32);
  const auto& s = v.spacing();
  const std::array<float, 8> pixdim{1.0f, static_cast<float>(s[0]), static_cast<float>(s[1]),
                                    static_cast<float>(s[2]), 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) put<float>(h, kOffPixdim + 4 * i, pixdim[i]);
  put<float>(h, kOffVoxOffset, static_cast<float>(kDataOffset));
  put<float>(h, kOffSclSlope, 1.0f);
  put<float>(h, kOffSclInter, 0.0f);
  h[kOffXyztUnits] = 2;  // NIFTI_UNITS_MM
  std::strncpy(h.data() + kOffDescrip, v.subject_id().c_str(), 79);
  // qform: identity rotation scaled by pixdim; sform mirrors it.
  put<std::int16_t>(h, kOffQformCode, 1);
  put<std::int16_t>(h, kOffSformCode, 1);
  for (int i = 0; i < 6; ++i) put<float>(h, kOffQuatern + 4 * i, 0.0f);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c)
      put<float>(h, kOffSrow + 16 * r + 4 * c, c == r ? static_cast<float>(s[r]) : 0.0f);
  std::memcpy(h.data() + kOffMagic, "n+1\0", 4);

  const std::array<char, 4> extension{};
  const auto data = v.data();
  const auto* bytes = reinterpret_cast<const char*>(data.data());
  const std::size_t nbytes = data.size_bytes();

  if (ends_with(path.filename().string(), ".gz")) {
    GzHandle file(gzopen(path.string().c_str(), "wb6"));
    if (!file) throw IoError(path.string() + ": cannot open for writing");
    bool ok = gzwrite(file.get(), h.data(), kHeaderSize) == static_cast<int>(kHeaderSize) &&
              gzwrite(file.get(), extension.data(), 4) == 4;
    std::size_t done = 0;
    while (ok && done < nbytes) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(nbytes - done, 1u << 30));
      ok = gzwrite(file.get(), bytes + done, chunk) == static_cast<int>(chunk);
      done += chunk;
    }
    if (gzclose(file.release()) != Z_OK || !ok)
      throw IoError(path.string() + ": write failed");
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write(h.data(), kHeaderSize);
    out.write(extension.data(), 4);
    out.write(bytes, static_cast<std::streamsize>(nbytes));
    if (!out) throw IoError(path.string() + ": write failed");
  }
}

}  // namespace lowfield
