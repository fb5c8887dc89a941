#pragma once

#include <cstdint>

#include "cordmorph/volume.hpp"

namespace cordmorph {

using MaskGrid = BasicVolume<std::uint8_t>;

/// A {0,1} volume in RPI orientation: axis 0 runs right-left, axis 1
/// anterior-posterior, axis 2 is the slice (inferior-superior) axis.
class BinaryMask {
 public:
  /// Throws NotBinary for values other than 0/1 and NotRPI otherwise.
  explicit BinaryMask(MaskGrid grid);

  /// Exact conversion of a volume that already holds only 0 and 1.
  static BinaryMask from_volume(const Volume& volume);

  const MaskGrid& grid() const { return grid_; }
  const Extents& extents() const { return grid_.extents(); }
  const Affine& affine() const { return grid_.affine(); }
  Eigen::Vector3d voxel_dims() const { return grid_.voxel_dims(); }

  bool operator()(std::int64_t i, std::int64_t j, std::int64_t k) const { return grid_(i, j, k) != 0; }
  bool contains(std::int64_t i, std::int64_t j, std::int64_t k) const { return grid_.contains(i, j, k); }
  std::int64_t count() const;
  Volume to_volume() const;

  bool same_grid(const BinaryMask& other) const { return grid_.same_grid(other.grid_); }
  bool operator==(const BinaryMask& other) const {
    return same_grid(other) && (grid_.voxels() == other.grid_.voxels()).all();
  }

 private:
  MaskGrid grid_;
};

/// voxel -> 1 iff value >= threshold. The volume must already be RPI.
BinaryMask binarize(const Volume& volume, double threshold = 0.5);

}  // namespace cordmorph
