#pragma once

#include <Eigen/Dense>
#include <iosfwd>

namespace talksplat::cam {

// Pinhole camera, OpenCV-style: x right, y down, z forward (into the scene).
// World-to-camera map: x_cam = rotation * x_world + translation.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const;
  Eigen::Vector3d to_cam(const Eigen::Vector3d& p_world) const {
    return rotation * p_world + translation;
  }
  Eigen::Vector3d center() const {  // camera position in world coordinates
    return -rotation.transpose() * translation;
  }
};

// camera at `eye` looking at `target`, `up` fixing the roll
Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
               const Eigen::Vector3d& up, double fx, double fy, int width,
               int height);

void write_camera(std::ostream& os, const Camera& c);
Camera read_camera(std::istream& is);

}  // namespace talksplat::cam
