#pragma once

#include <span>
#include <vector>

namespace emglabel::kinematics {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Point3 operator-(const Point3& a, const Point3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Point3 operator*(double s, const Point3& p) { return {s * p.x, s * p.y, s * p.z}; }
};

double dot(const Point3& a, const Point3& b) noexcept;
double norm(const Point3& a) noexcept;

/// Camera-space joint positions in meters, depth camera at the origin.
struct SkeletonFrame {
  double t = 0.0;
  Point3 tip;
  Point3 wrist;
  Point3 elbow;
  Point3 shoulder;
};

struct AngleFrame {
  double t = 0.0;
  double shoulder_deg = 0.0;
  double elbow_deg = 0.0;
  double wrist_deg = 0.0;

  friend bool operator==(const AngleFrame&, const AngleFrame&) = default;
};

inline constexpr double kDegenerateBoneLength = 1e-9;

/// Angle at `center` between the bones center->a and center->b, in degrees.
/// Throws DegenerateGeometry when either bone is shorter than 1e-9 m.
double joint_angle(const Point3& center, const Point3& a, const Point3& b);

struct KinematicsOptions {
  // Shoulder elevation is measured against this direction from the shoulder
  // (torso-down in camera coordinates).
  Point3 shoulder_reference{0.0, -1.0, 0.0};
};

/// elbow = angle(E; S, W), wrist = angle(W; E, T),
/// shoulder = angle(S; E, S + reference).
AngleFrame angles_from_skeleton(const SkeletonFrame& frame, const KinematicsOptions& options = {});

/// Converts a sequence, enforcing finite coordinates and strictly increasing t.
std::vector<AngleFrame> angles_from_skeletons(std::span<const SkeletonFrame> frames,
                                              const KinematicsOptions& options = {});

}  // namespace emglabel::kinematics
