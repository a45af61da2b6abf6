#pragma once

#include <cmath>

namespace chat2map::geo {

// Wraps degrees into (-180, 180].
inline double wrap_angle(double deg) {
  deg = std::fmod(deg, 360.0);
  if (deg <= -180.0) deg += 360.0;
  if (deg > 180.0) deg -= 360.0;
  return deg;
}

// theta in degrees, 0 = +x, 90 = +y (counter-clockwise).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  bool operator==(const Pose&) const = default;
};

inline bool pose_close(const Pose& a, const Pose& b, double pos_tol = 1e-6,
                       double ang_tol = 1e-6) {
  return std::abs(a.x - b.x) <= pos_tol && std::abs(a.y - b.y) <= pos_tol &&
         std::abs(wrap_angle(a.theta - b.theta)) <= ang_tol;
}

// cos/sin with exact values at multiples of 90 degrees, so lattice poses stay
// bit-exact through rigid transforms.
inline void dir_of(double theta_deg, double& c, double& s) {
  double m = std::fmod(theta_deg, 360.0);
  if (m < 0) m += 360.0;
  if (m == 0.0) { c = 1; s = 0; return; }
  if (m == 90.0) { c = 0; s = 1; return; }
  if (m == 180.0) { c = -1; s = 0; return; }
  if (m == 270.0) { c = 0; s = -1; return; }
  double r = theta_deg * M_PI / 180.0;
  c = std::cos(r);
  s = std::sin(r);
}

// Like dir_of but also exact (same magnitudes bit-for-bit) at odd multiples of
// 45 degrees, so diagonal grid rays produce exact crossing ties.
inline void unit_dir(double theta_deg, double& c, double& s) {
  double m = std::fmod(theta_deg, 360.0);
  if (m < 0) m += 360.0;
  if (std::fmod(m, 45.0) == 0.0 && std::fmod(m, 90.0) != 0.0) {
    const double h = 0.70710678118654752;  // sqrt(1/2)
    c = (m > 90.0 && m < 270.0) ? -h : h;
    s = (m < 180.0) ? h : -h;
    return;
  }
  dir_of(theta_deg, c, s);
}

// Expresses p in ref's frame: translate by -ref, rotate by -ref.theta.
inline Pose normalize_pose(const Pose& p, const Pose& ref) {
  double dx = p.x - ref.x, dy = p.y - ref.y;
  double c, s;
  dir_of(-ref.theta, c, s);
  return {c * dx - s * dy, s * dx + c * dy, wrap_angle(p.theta - ref.theta)};
}

// Inverse of normalize_pose: maps a ref-frame pose back to the world frame.
inline Pose denormalize_pose(const Pose& p, const Pose& ref) {
  double c, s;
  dir_of(ref.theta, c, s);
  return {ref.x + c * p.x - s * p.y, ref.y + s * p.x + c * p.y, wrap_angle(p.theta + ref.theta)};
}

}  // namespace chat2map::geo
