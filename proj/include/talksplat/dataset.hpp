#pragma once

#include <string>
#include <vector>

#include "talksplat/camera.hpp"
#include "talksplat/mesh.hpp"
#include "talksplat/sequence.hpp"

namespace talksplat::engine {

// Binary feature-sequence file: magic, version, N, D, rate, then N*D
// little-endian doubles row-major.
void write_fseq(const std::string& path, const seq::FeatureSequence& s);
seq::FeatureSequence read_fseq(const std::string& path);

void write_cameras(const std::string& path,
                   const std::vector<cam::Camera>& cams);
std::vector<cam::Camera> read_cameras(const std::string& path);

struct SequenceData {
  seq::FeatureSequence features;     // raw rate, pre-interpolation
  seq::FeatureSequence vertices;     // [T, V*3] at video rate (base mesh)
  seq::FeatureSequence expressions;  // [T, E] at video rate
  std::string dir;
};

struct Dataset {
  mesh::BlendMesh mesh;  // base rig (no subdivision applied)
  std::vector<cam::Camera> cameras;
  std::vector<SequenceData> seqs;
  std::string root;

  std::string frame_path(int sequence, int camera, int frame) const;
  void validate() const;
};

std::string sequence_dir(const std::string& root, int sequence);
Dataset load_dataset(const std::string& root);

}  // namespace talksplat::engine
