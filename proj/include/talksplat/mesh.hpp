#pragma once

// Blendshape face mesh with per-triangle rigging frames and region-targeted
// four-way subdivision. The deformed surface is template + basis*psi (+ free
// per-vertex offsets); each triangle induces an orthonormal frame (R, T) and
// scalar scale k = sqrt(2*area) that carry bound splats along with it.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "talksplat/rng.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::mesh {

enum class Region : std::uint8_t { kFace = 0, kLips = 1, kTeeth = 2 };

const char* region_name(Region r);
Region region_from_name(const std::string& s);

struct BlendMesh {
  std::vector<double> template_vertices;  // V*3 row-major
  std::vector<int> faces;                 // F*3, CCW
  int expr_dims = 0;
  std::vector<double> expr_basis;  // V*3*E, index (v*3+axis)*E + e
  std::vector<Region> region_tags;  // per face
  std::vector<int> lip_vertex_ids;

  int vertex_count() const { return static_cast<int>(template_vertices.size() / 3); }
  int face_count() const { return static_cast<int>(faces.size() / 3); }

  // Index bounds, tag/basis sizes, rest-pose degeneracy (area > 1e-12).
  void validate() const;
  std::uint64_t content_hash() const;
};

struct TriangleFrame {
  Eigen::Matrix3d rotation;     // columns: unit edge, in-plane perp, normal
  Eigen::Vector3d translation;  // vertex mean
  double scale = 0.0;           // sqrt(2*area)
};

// positions = template + expr_basis*psi + offsets (offsets optional).
std::vector<double> evaluate_mesh(const BlendMesh& mesh,
                                  const std::vector<double>& psi,
                                  const std::vector<double>* offsets = nullptr);

std::vector<TriangleFrame> triangle_frames(const std::vector<double>& positions,
                                           const std::vector<int>& faces);

// Differentiable frames: verts is a [V,3] tape tensor; outputs are packed
// rotations [F,9], translations [F,3] and scales [F,1] on the same tape.
struct FramesOnTape {
  ad::Tensor rot;
  ad::Tensor trans;
  ad::Tensor scale;
};
FramesOnTape triangle_frames_on_tape(const ad::Tensor& verts,
                                     const std::vector<int>& faces);

int count_region_faces(const BlendMesh& mesh, Region region);

// Uniform four-way subdivision of every face tagged `region`. Midpoint
// vertices are deduplicated across shared edges; their blendshape rows are
// the mean of the edge endpoints' rows; children inherit the parent tag.
BlendMesh subdivide_region(const BlendMesh& mesh, Region region);

// Procedural ellipsoid head with lips/teeth bands and a seeded sinusoidal
// expression basis whose component 0 opens the mouth (lip band moves
// monotonically).
BlendMesh make_head_mesh(int rings, int segments, int expr_dims,
                         std::uint64_t seed);

// ASCII OBJ (positions + faces) plus structured-text rig sidecar.
void save_mesh(const std::string& obj_path, const std::string& rig_path,
               const BlendMesh& mesh);
BlendMesh load_mesh(const std::string& obj_path, const std::string& rig_path);

}  // namespace talksplat::mesh
