#include "cordmorph/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace cordmorph {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kMinDataOffset = 352;

template <typename T>
T byteswap(T value) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  std::reverse(raw.begin(), raw.end());
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T at(std::size_t offset) const {
    T value{};
    std::memcpy(&value, bytes_.data() + offset, sizeof(T));
    return swap_ ? byteswap(value) : value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class Writer {
 public:
  explicit Writer(Bytes& bytes) : bytes_(bytes) {}
  template <typename T>
  void at(std::size_t offset, T value) {
    if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
    std::memcpy(bytes_.data() + offset, &value, sizeof(T));
  }

 private:
  Bytes& bytes_;
};

bool is_supported(std::int16_t code) {
  switch (code) {
    case 2: case 4: case 8: case 16: case 64: return true;
    default: return false;
  }
}

template <typename Raw>
void decode(std::span<const std::uint8_t> payload, bool swap, double slope, double inter, Volume::Storage& out) {
  for (Eigen::Index n = 0; n < out.size(); ++n) {
    Raw raw{};
    std::memcpy(&raw, payload.data() + static_cast<std::size_t>(n) * sizeof(Raw), sizeof(Raw));
    if (swap) raw = byteswap(raw);
    out[n] = static_cast<double>(raw) * slope + inter;
  }
}

template <typename Raw>
void encode(const Volume::Storage& voxels, std::uint8_t* dst) {
  for (Eigen::Index n = 0; n < voxels.size(); ++n) {
    const double v = voxels[n];
    if constexpr (std::is_integral_v<Raw>) {
      if (!std::isfinite(v) || v != std::trunc(v)) {
        throw Error(ErrorCode::PrecisionLoss,
                    "voxel value " + std::to_string(v) + " is not an integer; binarize or round before writing");
      }
      if (v < static_cast<double>(std::numeric_limits<Raw>::min()) ||
          v > static_cast<double>(std::numeric_limits<Raw>::max())) {
        throw Error(ErrorCode::ValueOverflow, "voxel value " + std::to_string(v) + " exceeds the target type range");
      }
    } else if constexpr (std::is_same_v<Raw, float>) {
      if (std::isfinite(v) && std::abs(v) > static_cast<double>(std::numeric_limits<float>::max())) {
        throw Error(ErrorCode::ValueOverflow, "voxel value exceeds float32 range");
      }
    }
    Raw raw = static_cast<Raw>(v);
    if constexpr (std::endian::native == std::endian::big) raw = byteswap(raw);
    std::memcpy(dst + static_cast<std::size_t>(n) * sizeof(Raw), &raw, sizeof(Raw));
  }
}

Affine qform_affine(const NiftiHeader& h) {
  const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  const double a2 = 1.0 - (b * b + c * c + d * d);
  const double a = a2 > 0.0 ? std::sqrt(a2) : 0.0;
  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
  const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
  const Eigen::Vector3d scale(h.pixdim[1], h.pixdim[2], qfac * h.pixdim[3]);
  Affine affine = Affine::Identity();
  affine.topLeftCorner<3, 3>() = r * scale.asDiagonal();
  affine.topRightCorner<3, 1>() << h.qoffset_x, h.qoffset_y, h.qoffset_z;
  return affine;
}

}  // namespace

int element_size(Datatype datatype) {
  switch (datatype) {
    case Datatype::UInt8: return 1;
    case Datatype::Int16: return 2;
    case Datatype::Int32: return 4;
    case Datatype::Float32: return 4;
    case Datatype::Float64: return 8;
  }
  throw Error(ErrorCode::UnsupportedDatatype, "unknown datatype");
}

Affine NiftiHeader::affine() const {
  if (sform_code > 0) {
    Affine a = Affine::Identity();
    for (int c = 0; c < 4; ++c) {
      a(0, c) = srow_x[c];
      a(1, c) = srow_y[c];
      a(2, c) = srow_z[c];
    }
    return a;
  }
  if (qform_code > 0) return qform_affine(*this);
  return diagonal_affine(Eigen::Vector3d(pixdim[1], pixdim[2], pixdim[3]));
}

NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw Error(ErrorCode::NotNifti1, "input shorter than the 348-byte NIfTI-1 header");
  }
  std::int32_t sizeof_hdr = 0;
  std::memcpy(&sizeof_hdr, bytes.data(), sizeof sizeof_hdr);
  bool swap = false;
  if (sizeof_hdr != 348) {
    if (byteswap(sizeof_hdr) != 348) throw Error(ErrorCode::NotNifti1, "sizeof_hdr is not 348 in either byte order");
    swap = true;
  }
  const Reader r(bytes, swap);
  NiftiHeader h;
  h.big_endian = (std::endian::native == std::endian::little) == swap;

  std::memcpy(h.magic.data(), bytes.data() + 344, 4);
  if (std::memcmp(h.magic.data(), "ni1\0", 4) == 0) {
    throw Error(ErrorCode::BadMagic, "header/data pair (ni1) files are not supported; convert to single-file .nii");
  }
  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) throw Error(ErrorCode::BadMagic, "magic is not \"n+1\"");

  for (int i = 0; i < 8; ++i) h.dim[i] = r.at<std::int16_t>(40 + 2 * i);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = r.at<float>(76 + 4 * i);
  const std::int16_t datatype = r.at<std::int16_t>(70);
  h.bitpix = r.at<std::int16_t>(72);
  h.vox_offset = r.at<float>(108);
  h.scl_slope = r.at<float>(112);
  h.scl_inter = r.at<float>(116);
  h.qform_code = r.at<std::int16_t>(252);
  h.sform_code = r.at<std::int16_t>(254);
  h.quatern_b = r.at<float>(256);
  h.quatern_c = r.at<float>(260);
  h.quatern_d = r.at<float>(264);
  h.qoffset_x = r.at<float>(268);
  h.qoffset_y = r.at<float>(272);
  h.qoffset_z = r.at<float>(276);
  for (int i = 0; i < 4; ++i) {
    h.srow_x[i] = r.at<float>(280 + 4 * i);
    h.srow_y[i] = r.at<float>(296 + 4 * i);
    h.srow_z[i] = r.at<float>(312 + 4 * i);
  }

  if (h.dim[0] != 3 && h.dim[0] != 4) {
    throw Error(ErrorCode::InvalidHeader, "dim[0] = " + std::to_string(h.dim[0]) + "; expected 3 or 4");
  }
  if (h.dim[0] == 4) {
    if (h.dim[4] > 1) throw Error(ErrorCode::MultiFrame, "dim[4] = " + std::to_string(h.dim[4]) + "; only single 3D frames are supported");
    if (h.dim[4] < 1) throw Error(ErrorCode::InvalidHeader, "dim[4] must be positive");
  }
  for (int i = 1; i <= 3; ++i) {
    if (h.dim[i] < 1) throw Error(ErrorCode::InvalidHeader, "dim[" + std::to_string(i) + "] must be positive");
  }
  if (!is_supported(datatype)) throw Error(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(datatype));
  h.datatype = static_cast<Datatype>(datatype);
  if (h.bitpix != 8 * element_size(h.datatype)) {
    throw Error(ErrorCode::InvalidHeader, "bitpix " + std::to_string(h.bitpix) + " disagrees with datatype");
  }
  for (int i = 1; i <= 3; ++i) {
    if (!(std::isfinite(h.pixdim[i]) && h.pixdim[i] > 0.0f)) {
      throw Error(ErrorCode::InvalidHeader, "pixdim[" + std::to_string(i) + "] must be positive");
    }
  }
  if (!std::isfinite(h.vox_offset) || h.vox_offset < static_cast<float>(kMinDataOffset) ||
      h.vox_offset != std::floor(h.vox_offset)) {
    throw Error(ErrorCode::InvalidHeader, "vox_offset must be an integer >= 352");
  }
  if (!std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter)) {
    throw Error(ErrorCode::InvalidHeader, "scl_slope/scl_inter must be finite");
  }
  if (h.qform_code < 0 || h.sform_code < 0) throw Error(ErrorCode::InvalidHeader, "negative qform/sform code");
  return h;
}

Volume parse_nifti(std::span<const std::uint8_t> bytes) {
  Bytes inflated;
  if (is_gzip(bytes)) {
    inflated = gzip_decompress(bytes);
    bytes = inflated;
  }
  const NiftiHeader h = parse_nifti_header(bytes);
  const Extents extents = h.extents();
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const auto payload_bytes = static_cast<std::size_t>(extents.size()) * static_cast<std::size_t>(element_size(h.datatype));
  if (bytes.size() < offset || bytes.size() - offset < payload_bytes) {
    throw Error(ErrorCode::TruncatedData, "payload holds " + std::to_string(bytes.size() > offset ? bytes.size() - offset : 0) +
                                              " bytes; " + std::to_string(payload_bytes) + " required");
  }
  const auto payload = bytes.subspan(offset, payload_bytes);
  const double slope = h.scl_slope == 0.0f ? 1.0 : static_cast<double>(h.scl_slope);
  const double inter = h.scl_slope == 0.0f ? 0.0 : static_cast<double>(h.scl_inter);
  const bool swap = h.big_endian != (std::endian::native == std::endian::big);

  Volume::Storage voxels(extents.size());
  switch (h.datatype) {
    case Datatype::UInt8: decode<std::uint8_t>(payload, swap, slope, inter, voxels); break;
    case Datatype::Int16: decode<std::int16_t>(payload, swap, slope, inter, voxels); break;
    case Datatype::Int32: decode<std::int32_t>(payload, swap, slope, inter, voxels); break;
    case Datatype::Float32: decode<float>(payload, swap, slope, inter, voxels); break;
    case Datatype::Float64: decode<double>(payload, swap, slope, inter, voxels); break;
  }
  return Volume(extents, std::move(voxels), h.affine());
}

Bytes write_nifti(const Volume& volume, Datatype datatype) {
  if (!is_supported(static_cast<std::int16_t>(datatype))) throw Error(ErrorCode::UnsupportedDatatype, "cannot write datatype");
  const Extents& e = volume.extents();
  if (e.nx > std::numeric_limits<std::int16_t>::max() || e.ny > std::numeric_limits<std::int16_t>::max() ||
      e.nz > std::numeric_limits<std::int16_t>::max()) {
    throw Error(ErrorCode::InvalidVolume, "extents exceed the NIfTI-1 dim range");
  }
  const int esize = element_size(datatype);
  Bytes out(kMinDataOffset + static_cast<std::size_t>(e.size()) * static_cast<std::size_t>(esize), 0);
  Writer w(out);
  const Eigen::Vector3d dims = volume.voxel_dims();
  const Affine& a = volume.affine();

  w.at<std::int32_t>(0, 348);
  w.at<std::int16_t>(40, 3);
  w.at<std::int16_t>(42, static_cast<std::int16_t>(e.nx));
  w.at<std::int16_t>(44, static_cast<std::int16_t>(e.ny));
  w.at<std::int16_t>(46, static_cast<std::int16_t>(e.nz));
  for (int i = 4; i < 8; ++i) w.at<std::int16_t>(40 + 2 * i, 1);
  w.at<std::int16_t>(70, static_cast<std::int16_t>(datatype));
  w.at<std::int16_t>(72, static_cast<std::int16_t>(8 * esize));
  w.at<float>(76, 1.0f);
  for (int i = 0; i < 3; ++i) w.at<float>(80 + 4 * i, static_cast<float>(dims[i]));
  w.at<float>(108, static_cast<float>(kMinDataOffset));
  w.at<float>(112, 1.0f);
  w.at<float>(116, 0.0f);
  out[123] = 2;  // xyzt_units: mm
  w.at<std::int16_t>(252, 0);
  w.at<std::int16_t>(254, 2);
  for (int c = 0; c < 4; ++c) {
    w.at<float>(280 + 4 * c, static_cast<float>(a(0, c)));
    w.at<float>(296 + 4 * c, static_cast<float>(a(1, c)));
    w.at<float>(312 + 4 * c, static_cast<float>(a(2, c)));
  }
  std::memcpy(out.data() + 344, "n+1\0", 4);

  std::uint8_t* payload = out.data() + kMinDataOffset;
  switch (datatype) {
    case Datatype::UInt8: encode<std::uint8_t>(volume.voxels(), payload); break;
    case Datatype::Int16: encode<std::int16_t>(volume.voxels(), payload); break;
    case Datatype::Int32: encode<std::int32_t>(volume.voxels(), payload); break;
    case Datatype::Float32: encode<float>(volume.voxels(), payload); break;
    case Datatype::Float64: encode<double>(volume.voxels(), payload); break;
  }
  return out;
}

Volume read_nifti(const std::filesystem::path& path) { return parse_nifti(read_file(path)); }

void write_nifti_file(const Volume& volume, const std::filesystem::path& path, Datatype datatype) {
  Bytes bytes = write_nifti(volume, datatype);
  if (path.extension() == ".gz") bytes = gzip_compress(bytes);
  write_file_atomic(path, bytes);
}

}  // namespace cordmorph
