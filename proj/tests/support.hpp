#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cordmorph/mask.hpp"
#include "cordmorph/volume.hpp"

namespace testing {

using namespace cordmorph;

inline Affine rpi_affine(const Eigen::Vector3d& dims = Eigen::Vector3d::Ones()) {
  return diagonal_affine(dims, Eigen::Vector3d(1, -1, -1));
}

inline BinaryMask empty_mask(Extents e, const Eigen::Vector3d& dims = Eigen::Vector3d::Ones()) {
  return BinaryMask(MaskGrid(e, std::uint8_t{0}, rpi_affine(dims)));
}

inline BinaryMask mask_from(Extents e, const std::vector<Index3>& on,
                            const Eigen::Vector3d& dims = Eigen::Vector3d::Ones()) {
  MaskGrid::Storage s = MaskGrid::Storage::Zero(e.size());
  for (const Index3& p : on) s[p[0] + e.nx * (p[1] + e.ny * p[2])] = 1;
  return BinaryMask(MaskGrid(e, std::move(s), rpi_affine(dims)));
}

/// Blob-ish random mask: a random box union with sprinkled voxels.
inline BinaryMask random_mask(std::mt19937_64& rng, Extents e, const Eigen::Vector3d& dims, double density) {
  std::bernoulli_distribution on(density);
  MaskGrid::Storage s(e.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = on(rng) ? 1 : 0;
  std::uniform_int_distribution<std::int64_t> ux(0, e.nx - 1), uy(0, e.ny - 1), uz(0, e.nz - 1);
  const std::int64_t x0 = ux(rng), y0 = uy(rng), z0 = uz(rng);
  const std::int64_t x1 = ux(rng), y1 = uy(rng), z1 = uz(rng);
  for (std::int64_t k = std::min(z0, z1); k <= std::max(z0, z1); ++k)
    for (std::int64_t j = std::min(y0, y1); j <= std::max(y0, y1); ++j)
      for (std::int64_t i = std::min(x0, x1); i <= std::max(x0, x1); ++i) s[i + e.nx * (j + e.ny * k)] = 1;
  return BinaryMask(MaskGrid(e, std::move(s), rpi_affine(dims)));
}

// Oracles below deliberately avoid the library's own helpers.

inline std::vector<Index3> oracle_voxels(const BinaryMask& m) {
  std::vector<Index3> out;
  const Extents& e = m.extents();
  for (std::int64_t k = 0; k < e.nz; ++k)
    for (std::int64_t j = 0; j < e.ny; ++j)
      for (std::int64_t i = 0; i < e.nx; ++i)
        if (m(i, j, k)) out.push_back({i, j, k});
  return out;
}

inline double oracle_dice(const BinaryMask& p, const BinaryMask& r) {
  std::int64_t np = 0, nr = 0, both = 0;
  const Extents& e = p.extents();
  for (std::int64_t k = 0; k < e.nz; ++k)
    for (std::int64_t j = 0; j < e.ny; ++j)
      for (std::int64_t i = 0; i < e.nx; ++i) {
        np += p(i, j, k);
        nr += r(i, j, k);
        both += p(i, j, k) && r(i, j, k);
      }
  if (np + nr == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + nr);
}

inline double oracle_rve(const BinaryMask& p, const BinaryMask& r) {
  const double np = static_cast<double>(oracle_voxels(p).size());
  const double nr = static_cast<double>(oracle_voxels(r).size());
  return 100.0 * (np - nr) / nr;
}

inline std::vector<Index3> oracle_surface(const BinaryMask& m) {
  std::vector<Index3> out;
  const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (const Index3& v : oracle_voxels(m)) {
    for (const auto& n : d) {
      const std::int64_t a = v[0] + n[0], b = v[1] + n[1], c = v[2] + n[2];
      if (!m.contains(a, b, c) || !m(a, b, c)) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

inline double oracle_directed(const std::vector<Index3>& from, const std::vector<Index3>& to,
                              const Eigen::Vector3d& dims) {
  double total = 0.0;
  for (const Index3& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Index3& b : to) {
      const double dx = static_cast<double>(a[0] - b[0]) * dims[0];
      const double dy = static_cast<double>(a[1] - b[1]) * dims[1];
      const double dz = static_cast<double>(a[2] - b[2]) * dims[2];
      best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    total += best;
  }
  return total / static_cast<double>(from.size());
}

inline double oracle_asd(const BinaryMask& p, const BinaryMask& r) {
  const auto sp = oracle_surface(p), sr = oracle_surface(r);
  const Eigen::Vector3d dims = p.voxel_dims();
  return 0.5 * (oracle_directed(sp, sr, dims) + oracle_directed(sr, sp, dims));
}

/// Two-pass textbook sample standard deviation.
inline double oracle_sample_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Checks that every start tag has a matching end tag in the right order.
inline bool xml_tags_balanced(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    const std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    const std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    if (tag.back() == '/') continue;
    stack.push_back(tag.substr(0, tag.find_first_of(" \t\n")));
  }
  return stack.empty();
}

}  // namespace testing
