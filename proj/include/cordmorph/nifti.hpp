#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

#include "cordmorph/fileio.hpp"
#include "cordmorph/volume.hpp"

namespace cordmorph {

enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

int element_size(Datatype datatype);

/// The subset of the 348-byte NIfTI-1 header this library reads and writes.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  Datatype datatype = Datatype::UInt8;
  std::int16_t bitpix = 8;
  std::array<float, 8> pixdim{};
  float vox_offset = 352.0f;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0, quatern_c = 0, quatern_d = 0;
  float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
  std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
  std::array<char, 4> magic{'n', '+', '1', '\0'};
  bool big_endian = false;

  Extents extents() const { return {dim[1], dim[2], dim[3]}; }
  /// sform when sform_code > 0, else qform when qform_code > 0, else pixdim diagonal.
  Affine affine() const;
};

/// Validates and decodes the header of an (already decompressed) NIfTI-1 file.
NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes);

/// Parses a single-file NIfTI-1 volume, optionally gzip-wrapped. Voxels are
/// rescaled by scl_slope/scl_inter (a zero slope means no scaling).
Volume parse_nifti(std::span<const std::uint8_t> bytes);

/// Little-endian single-file NIfTI-1 with the affine stored as sform.
/// Integer targets reject non-integral values (PrecisionLoss) and
/// out-of-range values (ValueOverflow).
Bytes write_nifti(const Volume& volume, Datatype datatype);

Volume read_nifti(const std::filesystem::path& path);
/// Gzip-compresses when the path ends in ".gz"; written atomically.
void write_nifti_file(const Volume& volume, const std::filesystem::path& path, Datatype datatype);

}  // namespace cordmorph
