#include "talksplat/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "talksplat/bytesio.hpp"
#include "talksplat/common.hpp"

namespace talksplat::engine {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kFseqMagic = 0x51455346;  // "FSEQ"
constexpr std::uint32_t kFseqVersion = 1;

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  check(os.is_open(), "cannot open for write: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.is_open(), "cannot open for read: " + path);
  return is;
}

std::string fmt(const char* pattern, int value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, value);
  return buf;
}

}  // namespace

void write_fseq(const std::string& path, const seq::FeatureSequence& s) {
  s.validate();
  auto os = open_out(path);
  bytesio::write_u32(os, kFseqMagic);
  bytesio::write_u32(os, kFseqVersion);
  bytesio::write_u64(os, static_cast<std::uint64_t>(s.n));
  bytesio::write_u64(os, static_cast<std::uint64_t>(s.d));
  bytesio::write_f64(os, s.rate);
  os.write(reinterpret_cast<const char*>(s.data.data()),
           static_cast<std::streamsize>(s.data.size() * sizeof(double)));
  check(static_cast<bool>(os), "fseq: short write to " + path);
}

seq::FeatureSequence read_fseq(const std::string& path) {
  auto is = open_in(path);
  check(bytesio::read_u32(is) == kFseqMagic, "fseq: bad magic in " + path);
  check(bytesio::read_u32(is) == kFseqVersion, "fseq: bad version in " + path);
  seq::FeatureSequence s;
  s.n = static_cast<int>(bytesio::read_u64(is));
  s.d = static_cast<int>(bytesio::read_u64(is));
  s.rate = bytesio::read_f64(is);
  check(s.n > 0 && s.d > 0, "fseq: empty sequence in " + path);
  s.data.resize(static_cast<std::size_t>(s.n) * static_cast<std::size_t>(s.d));
  is.read(reinterpret_cast<char*>(s.data.data()),
          static_cast<std::streamsize>(s.data.size() * sizeof(double)));
  check(static_cast<bool>(is), "fseq: short read from " + path);
  s.validate();
  return s;
}

void write_cameras(const std::string& path,
                   const std::vector<cam::Camera>& cams) {
  check(!cams.empty(), "write_cameras: no cameras");
  auto os = open_out(path);
  bytesio::write_u64(os, cams.size());
  for (const auto& c : cams) cam::write_camera(os, c);
  check(static_cast<bool>(os), "cameras: short write to " + path);
}

std::vector<cam::Camera> read_cameras(const std::string& path) {
  auto is = open_in(path);
  const auto n = bytesio::read_u64(is);
  check(n > 0 && n < 1024, "cameras: implausible count in " + path);
  std::vector<cam::Camera> cams;
  cams.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) cams.push_back(cam::read_camera(is));
  for (const auto& c : cams) c.validate();
  return cams;
}

std::string sequence_dir(const std::string& root, int sequence) {
  return root + "/" + fmt("seq_%03d", sequence);
}

std::string Dataset::frame_path(int sequence, int camera, int frame) const {
  return sequence_dir(root, sequence) + "/frames/" + fmt("cam%d", camera) +
         fmt("_f%03d.png", frame);
}

void Dataset::validate() const {
  mesh.validate();
  check(!cameras.empty(), "dataset: no cameras");
  for (const auto& c : cameras) c.validate();
  check(!seqs.empty(), "dataset: no sequences");
  for (const auto& s : seqs) {
    s.features.validate();
    s.vertices.validate();
    s.expressions.validate();
    check(s.vertices.n == s.expressions.n,
          "dataset: vertex/expression frame counts differ");
    check(s.vertices.d == 3 * mesh.vertex_count(),
          "dataset: vertex track width does not match mesh");
    check(s.expressions.d == mesh.expr_dims,
          "dataset: expression track width does not match mesh");
  }
}

Dataset load_dataset(const std::string& root) {
  Dataset ds;
  ds.root = root;
  ds.mesh = mesh::load_mesh(root + "/mesh.obj", root + "/mesh.rig");
  ds.cameras = read_cameras(root + "/cameras.txt");
  for (int s = 0;; ++s) {
    const auto dir = sequence_dir(root, s);
    if (!fs::is_directory(dir)) break;
    SequenceData sd;
    sd.dir = dir;
    sd.features = read_fseq(dir + "/features.fseq");
    sd.vertices = read_fseq(dir + "/vertices.fseq");
    sd.expressions = read_fseq(dir + "/expressions.fseq");
    ds.seqs.push_back(std::move(sd));
  }
  ds.validate();
  return ds;
}

}  // namespace talksplat::engine
