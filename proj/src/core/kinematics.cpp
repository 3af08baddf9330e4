#include "emglabel/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "emglabel/error.hpp"

namespace emglabel::kinematics {

double dot(const Point3& a, const Point3& b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }

double norm(const Point3& a) noexcept { return std::sqrt(dot(a, a)); }

double joint_angle(const Point3& center, const Point3& a, const Point3& b) {
  const Point3 p = a - center;
  const Point3 q = b - center;
  const double np = norm(p);
  const double nq = norm(q);
  if (!(np > kDegenerateBoneLength) || !(nq > kDegenerateBoneLength)) {
    fail(ErrorCode::DegenerateGeometry, "bone shorter than 1e-9 m");
  }
  const double c = std::clamp(dot(p, q) / (np * nq), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

namespace {

bool finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

double named_angle(const char* joint, const Point3& c, const Point3& a, const Point3& b) {
  try {
    return joint_angle(c, a, b);
  } catch (const Error& e) {
    fail(e.code(), std::string(joint) + ": " + e.what());
  }
}

}  // namespace

AngleFrame angles_from_skeleton(const SkeletonFrame& f, const KinematicsOptions& options) {
  if (!std::isfinite(f.t) || !finite(f.tip) || !finite(f.wrist) || !finite(f.elbow) ||
      !finite(f.shoulder)) {
    fail(ErrorCode::InvalidInput, "skeleton frame has non-finite values");
  }
  AngleFrame out;
  out.t = f.t;
  out.elbow_deg = named_angle("elbow", f.elbow, f.shoulder, f.wrist);
  out.wrist_deg = named_angle("wrist", f.wrist, f.elbow, f.tip);
  out.shoulder_deg =
      named_angle("shoulder", f.shoulder, f.elbow, f.shoulder + options.shoulder_reference);
  return out;
}

std::vector<AngleFrame> angles_from_skeletons(std::span<const SkeletonFrame> frames,
                                              const KinematicsOptions& options) {
  std::vector<AngleFrame> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && !(frames[i].t > frames[i - 1].t)) {
      fail(ErrorCode::InvalidInput,
           "skeleton timestamps must increase strictly (frame " + std::to_string(i) + ")");
    }
    try {
      out.push_back(angles_from_skeleton(frames[i], options));
    } catch (const Error& e) {
      fail(e.code(), "frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace emglabel::kinematics
