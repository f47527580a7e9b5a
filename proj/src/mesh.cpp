#include "talksplat/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace talksplat::mesh {

const char* region_name(Region r) {
  switch (r) {
    case Region::kFace:
      return "face";
    case Region::kLips:
      return "lips";
    case Region::kTeeth:
      return "teeth";
  }
  fail("region_name: bad tag");
}

Region region_from_name(const std::string& s) {
  if (s == "face") return Region::kFace;
  if (s == "lips") return Region::kLips;
  if (s == "teeth") return Region::kTeeth;
  fail(strcat_("unknown region tag '", s, "'"));
}

namespace {

double face_area(const std::vector<double>& pos, const int* f) {
  Eigen::Vector3d a(pos[3 * static_cast<std::size_t>(f[0])],
                    pos[3 * static_cast<std::size_t>(f[0]) + 1],
                    pos[3 * static_cast<std::size_t>(f[0]) + 2]);
  Eigen::Vector3d b(pos[3 * static_cast<std::size_t>(f[1])],
                    pos[3 * static_cast<std::size_t>(f[1]) + 1],
                    pos[3 * static_cast<std::size_t>(f[1]) + 2]);
  Eigen::Vector3d c(pos[3 * static_cast<std::size_t>(f[2])],
                    pos[3 * static_cast<std::size_t>(f[2]) + 1],
                    pos[3 * static_cast<std::size_t>(f[2]) + 2]);
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

void BlendMesh::validate() const {
  const int V = vertex_count(), F = face_count();
  check(template_vertices.size() % 3 == 0 && faces.size() % 3 == 0,
        "BlendMesh: ragged vertex or face array");
  check(expr_dims >= 0 &&
            expr_basis.size() ==
                static_cast<std::size_t>(V) * 3 * static_cast<std::size_t>(expr_dims),
        "BlendMesh: expression basis size mismatch");
  check(region_tags.size() == static_cast<std::size_t>(F),
        "BlendMesh: one region tag per face required");
  for (int f = 0; f < F; ++f)
    for (int j = 0; j < 3; ++j) {
      const int v = faces[3 * static_cast<std::size_t>(f) + j];
      check(0 <= v && v < V,
            strcat_("BlendMesh: face ", f, " references vertex ", v,
                    " outside [0,", V, ")"));
    }
  for (int v : lip_vertex_ids)
    check(0 <= v && v < V, strcat_("BlendMesh: lip vertex ", v, " out of range"));
  for (int f = 0; f < F; ++f)
    check(face_area(template_vertices, &faces[3 * static_cast<std::size_t>(f)]) > 1e-12,
          strcat_("BlendMesh: face ", f, " is degenerate at rest"));
}

std::uint64_t BlendMesh::content_hash() const {
  std::uint64_t h = fnv1a(template_vertices.data(),
                          template_vertices.size() * sizeof(double));
  h = fnv1a(faces.data(), faces.size() * sizeof(int), h);
  h = fnv1a(&expr_dims, sizeof(expr_dims), h);
  h = fnv1a(expr_basis.data(), expr_basis.size() * sizeof(double), h);
  h = fnv1a(region_tags.data(), region_tags.size() * sizeof(Region), h);
  h = fnv1a(lip_vertex_ids.data(), lip_vertex_ids.size() * sizeof(int), h);
  return h;
}

std::vector<double> evaluate_mesh(const BlendMesh& mesh,
                                  const std::vector<double>& psi,
                                  const std::vector<double>* offsets) {
  const int V = mesh.vertex_count(), E = mesh.expr_dims;
  check(static_cast<int>(psi.size()) == E,
        strcat_("evaluate_mesh: psi has ", psi.size(), " entries, expected ",
                E));
  if (offsets)
    check(offsets->size() == mesh.template_vertices.size(),
          "evaluate_mesh: offsets must be V*3");
  std::vector<double> out = mesh.template_vertices;
  for (std::size_t row = 0; row < static_cast<std::size_t>(V) * 3; ++row) {
    double acc = 0.0;
    const double* brow = mesh.expr_basis.data() + row * static_cast<std::size_t>(E);
    for (int e = 0; e < E; ++e) acc += brow[e] * psi[static_cast<std::size_t>(e)];
    out[row] += acc;
    if (offsets) out[row] += (*offsets)[row];
  }
  return out;
}

std::vector<TriangleFrame> triangle_frames(const std::vector<double>& positions,
                                           const std::vector<int>& faces) {
  const int F = static_cast<int>(faces.size() / 3);
  std::vector<TriangleFrame> out(static_cast<std::size_t>(F));
  for (int f = 0; f < F; ++f) {
    const int* idx = &faces[3 * static_cast<std::size_t>(f)];
    Eigen::Vector3d v1(positions[3 * static_cast<std::size_t>(idx[0])],
                       positions[3 * static_cast<std::size_t>(idx[0]) + 1],
                       positions[3 * static_cast<std::size_t>(idx[0]) + 2]);
    Eigen::Vector3d v2(positions[3 * static_cast<std::size_t>(idx[1])],
                       positions[3 * static_cast<std::size_t>(idx[1]) + 1],
                       positions[3 * static_cast<std::size_t>(idx[1]) + 2]);
    Eigen::Vector3d v3(positions[3 * static_cast<std::size_t>(idx[2])],
                       positions[3 * static_cast<std::size_t>(idx[2]) + 1],
                       positions[3 * static_cast<std::size_t>(idx[2]) + 2]);
    const Eigen::Vector3d e1 = v2 - v1;
    const Eigen::Vector3d cr = e1.cross(v3 - v1);
    const double area2 = cr.norm();  // 2*area
    check(area2 > 2e-12,
          strcat_("triangle_frames: face ", f, " is degenerate"));
    const Eigen::Vector3d n = cr / area2;
    const Eigen::Vector3d c0 = e1.normalized();
    const Eigen::Vector3d c1 = n.cross(c0).normalized();
    TriangleFrame& fr = out[static_cast<std::size_t>(f)];
    fr.rotation.col(0) = c0;
    fr.rotation.col(1) = c1;
    fr.rotation.col(2) = n;
    fr.translation = (v1 + v2 + v3) / 3.0;
    fr.scale = std::sqrt(area2);
  }
  return out;
}

FramesOnTape triangle_frames_on_tape(const ad::Tensor& verts,
                                     const std::vector<int>& faces) {
  check(verts.ndim() == 2 && verts.dim(1) == 3,
        "triangle_frames_on_tape: verts must be [V,3]");
  const int F = static_cast<int>(faces.size() / 3);
  std::vector<int> i1(static_cast<std::size_t>(F)), i2(static_cast<std::size_t>(F)), i3(static_cast<std::size_t>(F));
  for (int f = 0; f < F; ++f) {
    i1[static_cast<std::size_t>(f)] = faces[3 * static_cast<std::size_t>(f)];
    i2[static_cast<std::size_t>(f)] = faces[3 * static_cast<std::size_t>(f) + 1];
    i3[static_cast<std::size_t>(f)] = faces[3 * static_cast<std::size_t>(f) + 2];
  }
  auto v1 = ad::gather_rows(verts, i1);
  auto v2 = ad::gather_rows(verts, i2);
  auto v3 = ad::gather_rows(verts, i3);
  auto e1 = ad::sub(v2, v1);
  auto cr = ad::cross3(e1, ad::sub(v3, v1));
  auto n = ad::normalize_rows(cr);
  auto c0 = ad::normalize_rows(e1);
  auto c1 = ad::normalize_rows(ad::cross3(n, c0));
  FramesOnTape out;
  out.rot = ad::mat3_from_cols(c0, c1, n);
  out.trans = ad::mul_scalar(ad::add(ad::add(v1, v2), v3), 1.0 / 3.0);
  out.scale = ad::sqrt_safe(ad::rows_norm(cr));  // sqrt(2*area)
  return out;
}

int count_region_faces(const BlendMesh& mesh, Region region) {
  int n = 0;
  for (Region r : mesh.region_tags) n += r == region;
  return n;
}

BlendMesh subdivide_region(const BlendMesh& mesh, Region region) {
  mesh.validate();
  check(count_region_faces(mesh, region) > 0,
        strcat_("subdivide_region: no faces tagged '", region_name(region),
                "'"));
  const int E = mesh.expr_dims;
  BlendMesh out;
  out.template_vertices = mesh.template_vertices;
  out.expr_dims = E;
  out.expr_basis = mesh.expr_basis;
  out.lip_vertex_ids = mesh.lip_vertex_ids;

  // Interior edges of the region must be manifold (shared by <= 2 faces).
  std::map<std::pair<int, int>, int> edge_uses;
  for (int f = 0; f < mesh.face_count(); ++f) {
    if (mesh.region_tags[static_cast<std::size_t>(f)] != region) continue;
    const int* idx = &mesh.faces[3 * static_cast<std::size_t>(f)];
    for (int j = 0; j < 3; ++j) {
      const int a = idx[j], b = idx[(j + 1) % 3];
      ++edge_uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [e, uses] : edge_uses)
    check(uses <= 2, strcat_("subdivide_region: edge (", e.first, ",", e.second,
                             ") shared by ", uses, " region faces"));

  std::map<std::pair<int, int>, int> midpoint;  // edge -> new vertex id
  auto midpoint_of = [&](int a, int b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(out.template_vertices.size() / 3);
    for (int axis = 0; axis < 3; ++axis)
      out.template_vertices.push_back(
          0.5 * (mesh.template_vertices[3 * static_cast<std::size_t>(a) + axis] +
                 mesh.template_vertices[3 * static_cast<std::size_t>(b) + axis]));
    for (int axis = 0; axis < 3; ++axis)
      for (int e = 0; e < E; ++e)
        out.expr_basis.push_back(
            0.5 * (mesh.expr_basis[(3 * static_cast<std::size_t>(a) + axis) * static_cast<std::size_t>(E) + e] +
                   mesh.expr_basis[(3 * static_cast<std::size_t>(b) + axis) * static_cast<std::size_t>(E) + e]));
    midpoint.emplace(key, id);
    return id;
  };

  for (int f = 0; f < mesh.face_count(); ++f) {
    const int* idx = &mesh.faces[3 * static_cast<std::size_t>(f)];
    const Region tag = mesh.region_tags[static_cast<std::size_t>(f)];
    if (tag != region) {
      out.faces.insert(out.faces.end(), {idx[0], idx[1], idx[2]});
      out.region_tags.push_back(tag);
      continue;
    }
    const int a = idx[0], b = idx[1], c = idx[2];
    const int mab = midpoint_of(a, b);
    const int mbc = midpoint_of(b, c);
    const int mca = midpoint_of(c, a);
    const int children[4][3] = {
        {a, mab, mca}, {mab, b, mbc}, {mca, mbc, c}, {mab, mbc, mca}};
    for (const auto& ch : children) {
      out.faces.insert(out.faces.end(), {ch[0], ch[1], ch[2]});
      out.region_tags.push_back(tag);
    }
  }
  out.validate();
  return out;
}

BlendMesh make_head_mesh(int rings, int segments, int expr_dims,
                         std::uint64_t seed) {
  check(rings >= 4 && segments >= 6, "make_head_mesh: too coarse");
  check(expr_dims >= 1, "make_head_mesh: need at least one expression dim");
  const double rx = 1.0, ry = 1.3, rz = 0.9;  // ellipsoid "head"
  BlendMesh m;
  m.expr_dims = expr_dims;

  // Poles on the y-axis; theta from the +y pole, phi around it. +z is the
  // "front" of the face.
  std::vector<double> theta_of, phi_of;  // per vertex, for the basis fields
  auto push_vertex = [&](double theta, double phi) {
    const double sy = std::cos(theta);
    const double sr = std::sin(theta);
    m.template_vertices.insert(
        m.template_vertices.end(),
        {rx * sr * std::sin(phi), ry * sy, rz * sr * std::cos(phi)});
    theta_of.push_back(theta);
    phi_of.push_back(phi);
  };
  push_vertex(0.0, 0.0);  // top pole
  for (int r = 1; r < rings; ++r)
    for (int s = 0; s < segments; ++s)
      push_vertex(M_PI * r / rings, 2.0 * M_PI * s / segments);
  push_vertex(M_PI, 0.0);  // bottom pole
  const int V = m.vertex_count();
  const int bottom = V - 1;
  auto ring_v = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };

  // Outward-facing CCW winding (checked against centroid direction in tests).
  for (int s = 0; s < segments; ++s)
    m.faces.insert(m.faces.end(), {0, ring_v(1, s), ring_v(1, s + 1)});
  for (int r = 1; r < rings - 1; ++r)
    for (int s = 0; s < segments; ++s) {
      const int a = ring_v(r, s), b = ring_v(r + 1, s), c = ring_v(r + 1, s + 1),
                d = ring_v(r, s + 1);
      m.faces.insert(m.faces.end(), {a, b, c});
      m.faces.insert(m.faces.end(), {a, c, d});
    }
  for (int s = 0; s < segments; ++s)
    m.faces.insert(m.faces.end(),
                   {bottom, ring_v(rings - 1, s + 1), ring_v(rings - 1, s)});

  // Region bands around the mouth (front of the lower face). Teeth sits
  // inside the lip band.
  const double mouth_theta = 0.65 * M_PI;
  m.region_tags.assign(static_cast<std::size_t>(m.face_count()), Region::kFace);
  for (int f = 0; f < m.face_count(); ++f) {
    const int* idx = &m.faces[3 * static_cast<std::size_t>(f)];
    double cy = 0, cz = 0, cx = 0;
    for (int j = 0; j < 3; ++j) {
      cx += m.template_vertices[3 * static_cast<std::size_t>(idx[j])];
      cy += m.template_vertices[3 * static_cast<std::size_t>(idx[j]) + 1];
      cz += m.template_vertices[3 * static_cast<std::size_t>(idx[j]) + 2];
    }
    cx /= 3, cy /= 3, cz /= 3;
    const double r = std::sqrt(cx * cx / (rx * rx) + cy * cy / (ry * ry) +
                               cz * cz / (rz * rz));
    const double th = std::acos(std::clamp(cy / (ry * r), -1.0, 1.0));
    if (cz <= 0.25 * rz) continue;  // only the front
    const double band = std::fabs(th - mouth_theta);
    if (band < 0.055 * M_PI && cz > 0.45 * rz)
      m.region_tags[static_cast<std::size_t>(f)] = Region::kTeeth;
    else if (band < 0.12 * M_PI)
      m.region_tags[static_cast<std::size_t>(f)] = Region::kLips;
  }

  // Lip vertex ids = vertices of lip- or teeth-tagged faces.
  {
    std::vector<char> is_lip(static_cast<std::size_t>(V), 0);
    for (int f = 0; f < m.face_count(); ++f)
      if (m.region_tags[static_cast<std::size_t>(f)] != Region::kFace)
        for (int j = 0; j < 3; ++j)
          is_lip[static_cast<std::size_t>(m.faces[3 * static_cast<std::size_t>(f) + j])] = 1;
    for (int v = 0; v < V; ++v)
      if (is_lip[static_cast<std::size_t>(v)]) m.lip_vertex_ids.push_back(v);
  }

  // Expression basis. Component 0 opens the mouth: a smooth bump around the
  // mouth band pushing lip vertices down/out, so lip motion is monotone in
  // psi[0]. Remaining components are seeded low-frequency surface wiggles.
  m.expr_basis.assign(static_cast<std::size_t>(V) * 3 * static_cast<std::size_t>(expr_dims), 0.0);
  Rng rng(derive_seed(seed, "head-basis"));
  std::vector<double> freq_t(static_cast<std::size_t>(expr_dims)), freq_p(static_cast<std::size_t>(expr_dims)),
      phase_t(static_cast<std::size_t>(expr_dims)), phase_p(static_cast<std::size_t>(expr_dims));
  for (int e = 0; e < expr_dims; ++e) {
    freq_t[static_cast<std::size_t>(e)] = 1.0 + rng.uniform_int(3);
    freq_p[static_cast<std::size_t>(e)] = 1.0 + rng.uniform_int(3);
    phase_t[static_cast<std::size_t>(e)] = rng.uniform(0, 2 * M_PI);
    phase_p[static_cast<std::size_t>(e)] = rng.uniform(0, 2 * M_PI);
  }
  for (int v = 0; v < V; ++v) {
    const double th = theta_of[static_cast<std::size_t>(v)];
    const double ph = phi_of[static_cast<std::size_t>(v)];
    const double z = m.template_vertices[3 * static_cast<std::size_t>(v) + 2];
    // unit outward direction (ellipsoid gradient, normalized)
    Eigen::Vector3d p(m.template_vertices[3 * static_cast<std::size_t>(v)] / (rx * rx),
                      m.template_vertices[3 * static_cast<std::size_t>(v) + 1] / (ry * ry),
                      z / (rz * rz));
    p.normalize();
    {
      const double bump = std::exp(-std::pow((th - mouth_theta) / (0.10 * M_PI), 2.0));
      const double front = std::max(0.0, z / rz);
      const double w = 0.18 * bump * front;
      m.expr_basis[(3 * static_cast<std::size_t>(v) + 0) * static_cast<std::size_t>(expr_dims)] = 0.0;
      m.expr_basis[(3 * static_cast<std::size_t>(v) + 1) * static_cast<std::size_t>(expr_dims)] = -w;
      m.expr_basis[(3 * static_cast<std::size_t>(v) + 2) * static_cast<std::size_t>(expr_dims)] = 0.35 * w;
    }
    for (int e = 1; e < expr_dims; ++e) {
      const double field = 0.035 *
                           std::sin(freq_t[static_cast<std::size_t>(e)] * th + phase_t[static_cast<std::size_t>(e)]) *
                           std::cos(freq_p[static_cast<std::size_t>(e)] * ph + phase_p[static_cast<std::size_t>(e)]);
      for (int axis = 0; axis < 3; ++axis)
        m.expr_basis[(3 * static_cast<std::size_t>(v) + axis) * static_cast<std::size_t>(expr_dims) + e] =
            field * p(axis);
    }
  }
  m.validate();
  return m;
}

// ---- persistence ---------------------------------------------------------

namespace {

void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

void save_mesh(const std::string& obj_path, const std::string& rig_path,
               const BlendMesh& mesh) {
  mesh.validate();
  {
    std::ofstream os(obj_path);
    check(static_cast<bool>(os), strcat_("save_mesh: cannot open ", obj_path));
    os << "# talksplat head mesh\n";
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      os << "v";
      for (int a = 0; a < 3; ++a) {
        os << ' ';
        write_double(os, mesh.template_vertices[3 * static_cast<std::size_t>(v) + a]);
      }
      os << '\n';
    }
    for (int f = 0; f < mesh.face_count(); ++f)
      os << "f " << mesh.faces[3 * static_cast<std::size_t>(f)] + 1 << ' '
         << mesh.faces[3 * static_cast<std::size_t>(f) + 1] + 1 << ' '
         << mesh.faces[3 * static_cast<std::size_t>(f) + 2] + 1 << '\n';
    check(static_cast<bool>(os), strcat_("save_mesh: write failed on ", obj_path));
  }
  {
    std::ofstream os(rig_path);
    check(static_cast<bool>(os), strcat_("save_mesh: cannot open ", rig_path));
    os << "talksplat-rig 1\n";
    os << "expr_dims " << mesh.expr_dims << "\n";
    os << "basis_rows " << mesh.vertex_count() * 3 << "\n";
    for (int row = 0; row < mesh.vertex_count() * 3; ++row) {
      for (int e = 0; e < mesh.expr_dims; ++e) {
        if (e) os << ' ';
        write_double(os, mesh.expr_basis[static_cast<std::size_t>(row) * static_cast<std::size_t>(mesh.expr_dims) + e]);
      }
      os << '\n';
    }
    os << "face_tags " << mesh.face_count() << "\n";
    for (int f = 0; f < mesh.face_count(); ++f)
      os << region_name(mesh.region_tags[static_cast<std::size_t>(f)]) << '\n';
    os << "lip_ids " << mesh.lip_vertex_ids.size() << "\n";
    for (std::size_t i = 0; i < mesh.lip_vertex_ids.size(); ++i)
      os << mesh.lip_vertex_ids[i] << (i + 1 < mesh.lip_vertex_ids.size() ? ' ' : '\n');
    if (mesh.lip_vertex_ids.empty()) os << '\n';
    os << "end\n";
    check(static_cast<bool>(os), strcat_("save_mesh: write failed on ", rig_path));
  }
}

BlendMesh load_mesh(const std::string& obj_path, const std::string& rig_path) {
  BlendMesh m;
  {
    std::ifstream is(obj_path);
    check(static_cast<bool>(is), strcat_("load_mesh: cannot open ", obj_path));
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string tag;
      if (!(ls >> tag)) continue;
      if (tag == "v") {
        double x, y, z;
        check(static_cast<bool>(ls >> x >> y >> z),
              strcat_("load_mesh: malformed vertex line '", line, "'"));
        m.template_vertices.insert(m.template_vertices.end(), {x, y, z});
      } else if (tag == "f") {
        int a, b, c;
        check(static_cast<bool>(ls >> a >> b >> c),
              strcat_("load_mesh: malformed face line '", line, "'"));
        m.faces.insert(m.faces.end(), {a - 1, b - 1, c - 1});
      }
    }
  }
  {
    std::ifstream is(rig_path);
    check(static_cast<bool>(is), strcat_("load_mesh: cannot open ", rig_path));
    std::string magic;
    int version = 0;
    is >> magic >> version;
    check(magic == "talksplat-rig" && version == 1,
          strcat_("load_mesh: ", rig_path, " is not a talksplat-rig v1 file"));
    auto expect_key = [&](const char* key) {
      std::string k;
      is >> k;
      check(k == key, strcat_("load_mesh: expected '", key, "', found '", k,
                              "' in ", rig_path));
    };
    expect_key("expr_dims");
    is >> m.expr_dims;
    expect_key("basis_rows");
    int rows = 0;
    is >> rows;
    check(rows == m.vertex_count() * 3,
          strcat_("load_mesh: sidecar rows ", rows, " but OBJ has ",
                  m.vertex_count(), " vertices"));
    m.expr_basis.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(m.expr_dims));
    for (auto& v : m.expr_basis)
      check(static_cast<bool>(is >> v), "load_mesh: truncated basis table");
    expect_key("face_tags");
    int ftags = 0;
    is >> ftags;
    check(ftags == m.face_count(),
          strcat_("load_mesh: sidecar tags ", ftags, " but OBJ has ",
                  m.face_count(), " faces"));
    for (int f = 0; f < ftags; ++f) {
      std::string t;
      check(static_cast<bool>(is >> t), "load_mesh: truncated tag list");
      m.region_tags.push_back(region_from_name(t));
    }
    expect_key("lip_ids");
    int nl = 0;
    is >> nl;
    m.lip_vertex_ids.resize(static_cast<std::size_t>(nl));
    for (auto& v : m.lip_vertex_ids)
      check(static_cast<bool>(is >> v), "load_mesh: truncated lip id list");
    expect_key("end");
  }
  m.validate();
  return m;
}

}  // namespace talksplat::mesh
