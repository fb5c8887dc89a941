#include "cordmorph/mask.hpp"

namespace cordmorph {

BinaryMask::BinaryMask(MaskGrid grid) : grid_(std::move(grid)) {
  if ((grid_.voxels() > 1).any()) throw Error(ErrorCode::NotBinary, "mask voxels must be 0 or 1");
  if (grid_.orientation() != OrientationCode::RPI()) {
    throw Error(ErrorCode::NotRPI, "mask orientation is " + grid_.orientation().str() + "; reorient to RPI first");
  }
}

BinaryMask BinaryMask::from_volume(const Volume& volume) {
  if (((volume.voxels() != 0.0) && (volume.voxels() != 1.0)).any()) {
    throw Error(ErrorCode::NotBinary, "volume holds values other than 0 and 1");
  }
  return BinaryMask(volume.with_voxels<std::uint8_t>(volume.voxels().cast<std::uint8_t>()));
}

std::int64_t BinaryMask::count() const { return grid_.voxels().cast<std::int64_t>().sum(); }

Volume BinaryMask::to_volume() const { return grid_.with_voxels<double>(grid_.voxels().cast<double>()); }

BinaryMask binarize(const Volume& volume, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
  }
  if (volume.orientation() != OrientationCode::RPI()) {
    throw Error(ErrorCode::NotRPI, "volume orientation is " + volume.orientation().str() + "; reorient to RPI first");
  }
  return BinaryMask(volume.with_voxels<std::uint8_t>((volume.voxels() >= threshold).cast<std::uint8_t>()));
}

}  // namespace cordmorph
