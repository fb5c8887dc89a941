#include "cordmorph/orientation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace cordmorph {

namespace {

int world_axis_of(char c) {
  switch (c) {
    case 'R': case 'L': return 0;
    case 'A': case 'P': return 1;
    case 'S': case 'I': return 2;
    default: return -1;
  }
}

constexpr std::array<std::array<char, 2>, 3> kLetters{{{'L', 'R'}, {'P', 'A'}, {'I', 'S'}}};

}  // namespace

OrientationCode OrientationCode::parse(std::string_view code) {
  if (code.size() != 3) {
    throw Error(ErrorCode::InvalidOrientation, "orientation code must have 3 letters: '" + std::string(code) + "'");
  }
  std::array<char, 3> letters{};
  std::array<bool, 3> seen{};
  for (int a = 0; a < 3; ++a) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(code[a])));
    const int w = world_axis_of(c);
    if (w < 0 || seen[w]) {
      throw Error(ErrorCode::InvalidOrientation, "invalid orientation code '" + std::string(code) + "'");
    }
    seen[w] = true;
    letters[a] = c;
  }
  return OrientationCode(letters);
}

int OrientationCode::world_axis(int axis) const { return world_axis_of(letters_[axis]); }

int OrientationCode::sign(int axis) const {
  const char c = letters_[axis];
  return (c == 'R' || c == 'A' || c == 'S') ? 1 : -1;
}

OrientationCode orientation_from_affine(const Affine& affine) {
  const Eigen::Matrix3d block = affine.topLeftCorner<3, 3>();
  const double scale = block.cwiseAbs().maxCoeff();
  if (!block.allFinite() || scale == 0.0 || std::abs(block.determinant()) <= 1e-12 * scale * scale * scale) {
    throw Error(ErrorCode::SingularAffine, "affine rotation/scale block is singular");
  }
  std::array<char, 3> letters{};
  std::array<bool, 3> claimed{};
  for (int axis = 0; axis < 3; ++axis) {
    const Eigen::Vector3d column = block.col(axis);
    Eigen::Index world = 0;
    const double dominant = column.cwiseAbs().maxCoeff(&world);
    int ties = 0;
    for (int w = 0; w < 3; ++w) ties += (std::abs(column[w]) == dominant) ? 1 : 0;
    if (ties > 1 || claimed[world]) {
      throw Error(ErrorCode::AmbiguousAxis,
                  "voxel axis " + std::to_string(axis) + " has no unique dominant world direction");
    }
    claimed[world] = true;
    letters[axis] = kLetters[world][column[world] > 0.0 ? 1 : 0];
  }
  return OrientationCode::parse(std::string_view(letters.data(), 3));
}

AxisMapping axis_mapping(const OrientationCode& from, const OrientationCode& to) {
  AxisMapping map{};
  for (int t = 0; t < 3; ++t) {
    for (int s = 0; s < 3; ++s) {
      if (from.world_axis(s) == to.world_axis(t)) {
        map.source_axis[t] = s;
        map.flipped[t] = from.sign(s) != to.sign(t);
      }
    }
  }
  return map;
}

Volume resample_mask(const Volume& volume, const Eigen::Vector3d& target_voxel_dims) {
  if (!(target_voxel_dims.array() > 0.0).all() || !target_voxel_dims.allFinite()) {
    throw Error(ErrorCode::DegenerateTarget, "target voxel dimensions must be positive");
  }
  const Eigen::Vector3d src_dims = volume.voxel_dims();
  const Extents& src = volume.extents();
  std::array<std::int64_t, 3> n{};
  Eigen::Vector3d ratio;  // target voxel size in source voxel units
  for (int a = 0; a < 3; ++a) {
    n[a] = static_cast<std::int64_t>(std::llround(static_cast<double>(src[a]) * src_dims[a] / target_voxel_dims[a]));
    if (n[a] <= 0) throw Error(ErrorCode::DegenerateTarget, "target grid has zero extent along axis " + std::to_string(a));
    ratio[a] = target_voxel_dims[a] / src_dims[a];
  }
  const Extents dst{n[0], n[1], n[2]};

  // continuous source index of target voxel j along each axis
  auto source_coordinate = [&](int axis, std::int64_t j) { return (static_cast<double>(j) + 0.5) * ratio[axis] - 0.5; };
  struct Tap {
    std::int64_t lo, hi;
    double w;
  };
  auto tap = [&](int axis, std::int64_t j) {
    const double c = std::clamp(source_coordinate(axis, j), 0.0, static_cast<double>(src[axis] - 1));
    const auto lo = static_cast<std::int64_t>(std::floor(c));
    const std::int64_t hi = std::min(lo + 1, src[axis] - 1);
    return Tap{lo, hi, c - static_cast<double>(lo)};
  };

  Volume::Storage out(dst.size());
  std::int64_t linear = 0;
  for (std::int64_t k = 0; k < dst.nz; ++k) {
    const Tap tz = tap(2, k);
    for (std::int64_t j = 0; j < dst.ny; ++j) {
      const Tap ty = tap(1, j);
      for (std::int64_t i = 0; i < dst.nx; ++i, ++linear) {
        const Tap tx = tap(0, i);
        auto lerp_x = [&](std::int64_t y, std::int64_t z) {
          const double a = volume(tx.lo, y, z);
          return tx.w == 0.0 ? a : a + tx.w * (volume(tx.hi, y, z) - a);
        };
        auto lerp_xy = [&](std::int64_t z) {
          const double a = lerp_x(ty.lo, z);
          return ty.w == 0.0 ? a : a + ty.w * (lerp_x(ty.hi, z) - a);
        };
        const double a = lerp_xy(tz.lo);
        out[linear] = tz.w == 0.0 ? a : a + tz.w * (lerp_xy(tz.hi) - a);
      }
    }
  }

  Affine scale = Affine::Identity();
  for (int a = 0; a < 3; ++a) {
    scale(a, a) = ratio[a];
    scale(a, 3) = 0.5 * ratio[a] - 0.5;
  }
  return Volume(dst, std::move(out), volume.affine() * scale);
}

}  // namespace cordmorph
