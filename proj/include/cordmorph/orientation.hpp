#pragma once

#include "cordmorph/volume.hpp"

namespace cordmorph {

/// Voxel-axis permutation and flips taking one orientation to another.
struct AxisMapping {
  std::array<int, 3> source_axis;  // target axis t reads source axis source_axis[t]
  std::array<bool, 3> flipped;
};

AxisMapping axis_mapping(const OrientationCode& from, const OrientationCode& to);

/// Pure permutation/flip reorientation. World coordinates of every voxel are
/// preserved; no interpolation happens.
template <typename Scalar>
BasicVolume<Scalar> reorient(const BasicVolume<Scalar>& volume, const OrientationCode& target) {
  if (volume.orientation() == target) return volume;
  const AxisMapping map = axis_mapping(volume.orientation(), target);
  const Extents& src = volume.extents();
  const Extents dst{src[map.source_axis[0]], src[map.source_axis[1]], src[map.source_axis[2]]};

  // new index n -> old index o = M n + offset
  Affine m = Affine::Zero();
  m(3, 3) = 1.0;
  for (int t = 0; t < 3; ++t) {
    const int s = map.source_axis[t];
    m(s, t) = map.flipped[t] ? -1.0 : 1.0;
    m(s, 3) = map.flipped[t] ? static_cast<double>(src[s] - 1) : 0.0;
  }

  typename BasicVolume<Scalar>::Storage out(dst.size());
  Index3 n{};
  std::int64_t linear = 0;
  for (n[2] = 0; n[2] < dst.nz; ++n[2]) {
    for (n[1] = 0; n[1] < dst.ny; ++n[1]) {
      for (n[0] = 0; n[0] < dst.nx; ++n[0], ++linear) {
        Index3 o{};
        for (int t = 0; t < 3; ++t) {
          const int s = map.source_axis[t];
          o[s] = map.flipped[t] ? src[s] - 1 - n[t] : n[t];
        }
        out[linear] = volume(o[0], o[1], o[2]);
      }
    }
  }
  return BasicVolume<Scalar>(dst, std::move(out), volume.affine() * m);
}

/// Trilinear resampling of a soft mask onto a grid with the given voxel
/// sizes, covering the same world extent. Values are left unthresholded.
Volume resample_mask(const Volume& volume, const Eigen::Vector3d& target_voxel_dims);

}  // namespace cordmorph
