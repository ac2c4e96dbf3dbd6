#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace iontrap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Axis-aligned box. Degenerate (zero-width) axes are allowed and mean
/// "fixed at this coordinate".
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  static Box centered(const Vec3& center, const Vec3& size) {
    return Box{center - 0.5 * size, center + 0.5 * size};
  }

  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 size() const { return hi - lo; }
  bool valid() const { return (hi.array() >= lo.array()).all(); }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
  bool intersects(const Box& o) const {
    return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
  }
  /// Euclidean distance from p to the box (0 inside).
  double distance(const Vec3& p) const {
    Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec3::Zero());
    return d.norm();
  }
};

}  // namespace iontrap
