#ifndef HWSAFE__SIM__GEOMETRY_HPP_
#define HWSAFE__SIM__GEOMETRY_HPP_

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <limits>

#include "hwsafe/sim/vehicle.hpp"

namespace hwsafe {

/// Rectangle centered at (x, y) with heading psi.
struct OrientedRect
{
  Eigen::Vector2d center;
  double psi;
  double length;
  double width;

  static OrientedRect of(const VehicleState & s, double length, double width)
  {
    return {Eigen::Vector2d(s.x, s.y), s.psi, length, width};
  }

  std::array<Eigen::Vector2d, 2> axes() const
  {
    const double c = std::cos(psi), s = std::sin(psi);
    return {Eigen::Vector2d(c, s), Eigen::Vector2d(-s, c)};
  }

  std::array<Eigen::Vector2d, 4> corners() const
  {
    const auto [ax, ay] = axes();
    const Eigen::Vector2d hl = 0.5 * length * ax, hw = 0.5 * width * ay;
    return {center + hl + hw, center + hl - hw, center - hl - hw, center - hl + hw};
  }

  bool contains(const Eigen::Vector2d & p) const
  {
    const auto [ax, ay] = axes();
    const Eigen::Vector2d d = p - center;
    return std::abs(d.dot(ax)) <= 0.5 * length && std::abs(d.dot(ay)) <= 0.5 * width;
  }
};

/// Separating-axis test. Touching rectangles count as overlapping.
inline bool rects_overlap(const OrientedRect & a, const OrientedRect & b)
{
  const auto ca = a.corners(), cb = b.corners();
  const auto aa = a.axes(), ab = b.axes();
  for (const auto & axes : {aa, ab}) {
    for (const auto & n : axes) {
      double amin = std::numeric_limits<double>::infinity(), amax = -amin;
      double bmin = amin, bmax = -amin;
      for (const auto & p : ca) {
        const double t = p.dot(n);
        amin           = std::min(amin, t);
        amax           = std::max(amax, t);
      }
      for (const auto & p : cb) {
        const double t = p.dot(n);
        bmin           = std::min(bmin, t);
        bmax           = std::max(bmax, t);
      }
      if (amax < bmin || bmax < amin) { return false; }
    }
  }
  return true;
}

}  // namespace hwsafe

#endif  // HWSAFE__SIM__GEOMETRY_HPP_
