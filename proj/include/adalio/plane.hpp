#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "adalio/geometry.hpp"
#include "adalio/state.hpp"

namespace adalio {

/// Plane {p : normal . p + d = 0}. `valid` means every fitting point was
/// within the residual margin.
struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  double d = 0.0;
  bool valid = false;
  std::size_t inlier_count = 0;
};

struct Correspondence {
  Point3 scan_point;   // body frame
  Point3 world_point;  // scan point in world frame at fit time
  PlaneFit plane;
};

// Second eigenvalue below this fraction of the largest marks a collinear set.
inline constexpr double kCollinearRatio = 1e-10;

inline PlaneFit fit_plane(std::span<const Vec3> pts, double residual_margin) {
  PlaneFit fit;
  if (pts.size() < 3) return fit;

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 q = p - centroid;
    cov += q * q.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= kCollinearRatio * ev(2)) return fit;

  Vec3 n = es.eigenvectors().col(0).normalized();
  Eigen::Index imax = 0;
  n.cwiseAbs().maxCoeff(&imax);
  if (n(imax) < 0.0) n = -n;

  fit.normal = n;
  fit.d = -n.dot(centroid);
  for (const auto& p : pts) {
    if (std::abs(n.dot(p) + fit.d) <= residual_margin) ++fit.inlier_count;
  }
  fit.valid = fit.inlier_count == pts.size();
  return fit;
}

inline PlaneFit fit_plane(std::span<const Point3> pts, double residual_margin) {
  std::vector<Vec3> xyz;
  xyz.reserve(pts.size());
  for (const auto& p : pts) xyz.push_back(p.position());
  return fit_plane(std::span<const Vec3>(xyz), residual_margin);
}

inline double point_to_plane_distance(const Vec3& p, const PlaneFit& plane) {
  return plane.normal.dot(p) + plane.d;
}

inline double point_to_plane_distance(const Point3& p, const PlaneFit& plane) {
  return point_to_plane_distance(p.position(), plane);
}

struct ResidualJacobian {
  double residual = 0.0;
  JacobianRow jacobian = JacobianRow::Zero();
};

/// r = n . (R p_body + t) + d, linearized on the right-perturbed error state.
inline ResidualJacobian residual_jacobian(const Correspondence& c, const NavState& state) {
  const Vec3& pb = c.scan_point.position();
  const Mat3 R = state.rotation.matrix();
  ResidualJacobian out;
  out.residual = c.plane.normal.dot(R * pb + state.position) + c.plane.d;
  out.jacobian.segment<3>(kRot) = -c.plane.normal.transpose() * R * skew(pb);
  out.jacobian.segment<3>(kPos) = c.plane.normal.transpose();
  return out;
}

}  // namespace adalio
