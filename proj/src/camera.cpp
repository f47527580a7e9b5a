#include "talksplat/camera.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "talksplat/common.hpp"

namespace talksplat::cam {

void Camera::validate() const {
  check(fx > 0 && fy > 0, "camera focal lengths must be positive");
  check(width > 0 && height > 0, "camera image size must be positive");
  check((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm() <
            1e-10,
        "camera rotation is not orthonormal");
  check(rotation.determinant() > 0, "camera rotation is reflected");
}

Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
               const Eigen::Vector3d& up, double fx, double fy, int width,
               int height) {
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.width = width;
  c.height = height;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  const Eigen::Vector3d fwd = target - eye;
  check(fwd.norm() > 1e-12, "look_at: eye equals target");
  const Eigen::Vector3d z = fwd.normalized();
  Eigen::Vector3d x = z.cross(up);
  check(x.norm() > 1e-9, "look_at: view direction parallel to up");
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  c.rotation.row(0) = x;
  c.rotation.row(1) = y;
  c.rotation.row(2) = z;
  c.translation = -c.rotation * eye;
  c.validate();
  return c;
}

void write_camera(std::ostream& os, const Camera& c) {
  os.precision(17);
  os << "camera " << c.width << " " << c.height << " " << c.fx << " " << c.fy
     << " " << c.cx << " " << c.cy << "\n";
  for (int r = 0; r < 3; ++r)
    os << c.rotation(r, 0) << " " << c.rotation(r, 1) << " " << c.rotation(r, 2)
       << " " << c.translation(r) << "\n";
}

Camera read_camera(std::istream& is) {
  std::string tag;
  Camera c;
  is >> tag >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy;
  check(static_cast<bool>(is) && tag == "camera", "malformed camera record");
  for (int r = 0; r < 3; ++r) {
    is >> c.rotation(r, 0) >> c.rotation(r, 1) >> c.rotation(r, 2) >>
        c.translation(r);
  }
  check(static_cast<bool>(is), "truncated camera record");
  c.validate();
  return c;
}

}  // namespace talksplat::cam
