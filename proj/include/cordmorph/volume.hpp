#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "cordmorph/error.hpp"

namespace cordmorph {

using Affine = Eigen::Matrix4d;
using Index3 = std::array<std::int64_t, 3>;

struct Extents {
  std::int64_t nx = 0;
  std::int64_t ny = 0;
  std::int64_t nz = 0;

  std::int64_t operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  std::int64_t size() const { return nx * ny * nz; }
  bool operator==(const Extents&) const = default;
};

/// Anatomical orientation of the three voxel axes. Each letter names the
/// direction the corresponding index increases toward (R/L, A/P, S/I).
class OrientationCode {
 public:
  /// Throws InvalidOrientation unless the code holds one letter of each pair.
  static OrientationCode parse(std::string_view code);
  static OrientationCode RPI() { return parse("RPI"); }
  static OrientationCode RAS() { return parse("RAS"); }

  char letter(int axis) const { return letters_[axis]; }
  /// World axis (0=x, 1=y, 2=z) the voxel axis runs along.
  int world_axis(int axis) const;
  /// +1 when the voxel axis increases toward R, A or S.
  int sign(int axis) const;
  std::string str() const { return {letters_.begin(), letters_.end()}; }

  bool operator==(const OrientationCode&) const = default;

 private:
  explicit OrientationCode(std::array<char, 3> letters) : letters_(letters) {}
  std::array<char, 3> letters_;
};

/// Dominant-component orientation of the affine's upper-left 3x3 block.
OrientationCode orientation_from_affine(const Affine& affine);

/// Euclidean norms of the first three affine columns.
inline Eigen::Vector3d voxel_dims_of(const Affine& affine) {
  return affine.topLeftCorner<3, 3>().colwise().norm().transpose();
}

/// Dense 3D grid (x fastest) with a voxel-to-world affine. Immutable once
/// built; derived volumes are new values.
template <typename Scalar>
class BasicVolume {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicVolume(Extents extents, Storage voxels, const Affine& affine)
      : extents_(extents), voxels_(std::move(voxels)), affine_(affine), orientation_(validate()) {}

  BasicVolume(Extents extents, Scalar fill, const Affine& affine)
      : BasicVolume(extents, filled(extents, fill), affine) {}

  const Extents& extents() const { return extents_; }
  const Storage& voxels() const { return voxels_; }
  const Affine& affine() const { return affine_; }
  const OrientationCode& orientation() const { return orientation_; }
  Eigen::Vector3d voxel_dims() const { return voxel_dims_of(affine_); }

  std::int64_t linear_index(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return i + extents_.nx * (j + extents_.ny * k);
  }
  Index3 index_of(std::int64_t linear) const {
    return {linear % extents_.nx, (linear / extents_.nx) % extents_.ny,
            linear / (extents_.nx * extents_.ny)};
  }
  bool contains(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < extents_.nx && j < extents_.ny && k < extents_.nz;
  }
  Scalar operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return voxels_[linear_index(i, j, k)];
  }
  Eigen::Vector3d world(double i, double j, double k) const {
    return (affine_ * Eigen::Vector4d(i, j, k, 1.0)).template head<3>();
  }

  /// Same geometry, new voxel payload.
  template <typename Other>
  BasicVolume<Other> with_voxels(typename BasicVolume<Other>::Storage voxels) const {
    return BasicVolume<Other>(extents_, std::move(voxels), affine_);
  }
  BasicVolume with_voxels(Storage voxels) const { return BasicVolume(extents_, std::move(voxels), affine_); }

  bool same_grid(const BasicVolume& other, double tol = 1e-6) const {
    return extents_ == other.extents_ && affine_.isApprox(other.affine_, tol) &&
           (affine_ - other.affine_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  static Storage filled(Extents extents, Scalar fill) {
    if (extents.nx <= 0 || extents.ny <= 0 || extents.nz <= 0) {
      throw Error(ErrorCode::InvalidVolume, "volume extents must be positive");
    }
    return Storage::Constant(extents.size(), fill);
  }

  OrientationCode validate() const {
    if (extents_.nx <= 0 || extents_.ny <= 0 || extents_.nz <= 0) {
      throw Error(ErrorCode::InvalidVolume, "volume extents must be positive");
    }
    if (voxels_.size() != extents_.size()) {
      throw Error(ErrorCode::InvalidVolume, "voxel payload does not match extents");
    }
    if (!affine_.allFinite() || affine_.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
      throw Error(ErrorCode::InvalidVolume, "affine must be finite with bottom row (0 0 0 1)");
    }
    if ((voxel_dims_of(affine_).array() <= 0.0).any()) {
      throw Error(ErrorCode::InvalidVolume, "voxel dimensions must be positive");
    }
    return orientation_from_affine(affine_);
  }

  Extents extents_;
  Storage voxels_;
  Affine affine_;
  OrientationCode orientation_;
};

using Volume = BasicVolume<double>;

/// Diagonal affine with the given per-axis voxel sizes and sign pattern.
inline Affine diagonal_affine(const Eigen::Vector3d& dims, const Eigen::Vector3d& signs = Eigen::Vector3d::Ones(),
                              const Eigen::Vector3d& origin = Eigen::Vector3d::Zero()) {
  Affine a = Affine::Identity();
  a.topLeftCorner<3, 3>() = (dims.array() * signs.array()).matrix().asDiagonal();
  a.topRightCorner<3, 1>() = origin;
  return a;
}

}  // namespace cordmorph
