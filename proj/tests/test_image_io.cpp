#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "talksplat/camera.hpp"
#include "talksplat/image_io.hpp"
#include "talksplat/rng.hpp"

using namespace talksplat;
using namespace talksplat::img;

namespace {

std::filesystem::path test_dir() {
  auto d = std::filesystem::temp_directory_path() / "talksplat_img_test";
  std::filesystem::create_directories(d);
  return d;
}

ImageRGB random_image(Rng& rng, int h, int w) {
  ImageRGB im(h, w);
  for (auto& v : im.px) v = rng.uniform();
  return im;
}

void put_be32_at(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk_at(std::vector<std::uint8_t>& out, const char* type,
                  const std::vector<std::uint8_t>& data) {
  put_be32_at(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  put_be32_at(out, static_cast<std::uint32_t>(crc32(
                       0, out.data() + start, static_cast<uInt>(4 + data.size()))));
}

int paeth_ref(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

TEST_CASE("quantize8: clamp and round half up") {
  CHECK(quantize8(0.0) == 0);
  CHECK(quantize8(-1.0) == 0);
  CHECK(quantize8(1.0) == 255);
  CHECK(quantize8(2.0) == 255);
  CHECK(quantize8(std::nan("")) == 0);
  CHECK(quantize8(0.5) == 128);          // 127.5 + 0.5 -> 128
  CHECK(quantize8(0.5 / 255.0) == 1);    // exact half rounds up
  CHECK(quantize8(0.49 / 255.0) == 0);
  CHECK(quantize8(254.5 / 255.0) == 255);
}

TEST_CASE("ppm: round trip through 8-bit quantization") {
  Rng rng(3);
  auto im = random_image(rng, 9, 13);
  const auto path = (test_dir() / "a.ppm").string();
  save_ppm(path, im);
  auto back = load_ppm(path);
  REQUIRE(back.height == 9);
  REQUIRE(back.width == 13);
  for (std::size_t i = 0; i < im.px.size(); ++i)
    CHECK(back.px[i] == quantize8(im.px[i]) / 255.0);

  // an already-quantized image survives a second trip bit-for-bit
  save_ppm(path, back);
  CHECK(load_ppm(path).px == back.px);
}

TEST_CASE("png: round trip through 8-bit quantization") {
  Rng rng(4);
  auto im = random_image(rng, 16, 11);
  const auto path = (test_dir() / "a.png").string();
  save_png(path, im);
  auto back = load_png(path);
  REQUIRE(back.height == 16);
  REQUIRE(back.width == 11);
  for (std::size_t i = 0; i < im.px.size(); ++i)
    CHECK(back.px[i] == quantize8(im.px[i]) / 255.0);

  save_png(path, back);
  CHECK(load_png(path).px == back.px);
}

TEST_CASE("png: reader handles all five filter types") {
  // hand-built file: 5 rows, one per filter type, independently encoded
  Rng rng(5);
  const int w = 7, h = 5;
  const std::size_t stride = static_cast<std::size_t>(w) * 3;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * stride);
  for (auto& b : raw) b = static_cast<std::uint8_t>(rng.uniform_int(256));

  std::vector<std::uint8_t> scan;
  for (int y = 0; y < h; ++y) {
    const auto filter = static_cast<std::uint8_t>(y);  // 0..4
    scan.push_back(filter);
    for (std::size_t i = 0; i < stride; ++i) {
      const std::size_t at = static_cast<std::size_t>(y) * stride + i;
      const int cur = raw[at];
      const int a = i >= 3 ? raw[at - 3] : 0;
      const int b = y > 0 ? raw[at - stride] : 0;
      const int c = (y > 0 && i >= 3) ? raw[at - stride - 3] : 0;
      int enc = cur;
      switch (filter) {
        case 0: break;
        case 1: enc = cur - a; break;
        case 2: enc = cur - b; break;
        case 3: enc = cur - (a + b) / 2; break;
        case 4: enc = cur - paeth_ref(a, b, c); break;
      }
      scan.push_back(static_cast<std::uint8_t>(enc & 0xff));
    }
  }
  uLongf zlen = compressBound(static_cast<uLong>(scan.size()));
  std::vector<std::uint8_t> zdata(zlen);
  REQUIRE(compress2(zdata.data(), &zlen, scan.data(),
                    static_cast<uLong>(scan.size()), 6) == Z_OK);
  zdata.resize(zlen);

  std::vector<std::uint8_t> file;
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  file.insert(file.end(), sig, sig + 8);
  std::vector<std::uint8_t> ihdr;
  put_be32_at(ihdr, w);
  put_be32_at(ihdr, h);
  for (std::uint8_t v : {8, 2, 0, 0, 0}) ihdr.push_back(v);
  put_chunk_at(file, "IHDR", ihdr);
  put_chunk_at(file, "IDAT", zdata);
  put_chunk_at(file, "IEND", {});

  const auto path = (test_dir() / "filters.png").string();
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(file.data()),
             static_cast<std::streamsize>(file.size()));
  auto im = load_png(path);
  REQUIRE(im.height == h);
  REQUIRE(im.width == w);
  for (std::size_t i = 0; i < raw.size(); ++i) CHECK(im.px[i] == raw[i] / 255.0);
}

TEST_CASE("png: corrupt inputs are rejected") {
  const auto dir = test_dir();
  Rng rng(6);
  auto im = random_image(rng, 4, 4);
  const auto good = (dir / "good.png").string();
  save_png(good, im);

  std::ifstream in(good, std::ios::binary);
  std::vector<char> bytes{std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>()};

  auto write_bytes = [&](const std::string& p, const std::vector<char>& b) {
    std::ofstream(p, std::ios::binary)
        .write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  auto bad_magic = bytes;
  bad_magic[1] = 'Q';
  write_bytes((dir / "m.png").string(), bad_magic);
  CHECK_THROWS_WITH_AS(load_png((dir / "m.png").string()),
                       doctest::Contains("not a PNG"), std::runtime_error);

  auto bad_crc = bytes;
  bad_crc[20] ^= 0x5a;  // inside IHDR payload
  write_bytes((dir / "c.png").string(), bad_crc);
  CHECK_THROWS_WITH_AS(load_png((dir / "c.png").string()),
                       doctest::Contains("crc"), std::runtime_error);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 16);
  write_bytes((dir / "t.png").string(), truncated);
  CHECK_THROWS(load_png((dir / "t.png").string()));
}

TEST_CASE("save_image/load_image dispatch on extension") {
  Rng rng(7);
  auto im = random_image(rng, 3, 5);
  const auto dir = test_dir();
  save_image((dir / "x.ppm").string(), im);
  save_image((dir / "x.png").string(), im);
  CHECK(load_image((dir / "x.ppm").string()).px ==
        load_image((dir / "x.png").string()).px);
  CHECK_THROWS_WITH_AS(save_image((dir / "x.jpg").string(), im),
                       doctest::Contains("unsupported image extension"),
                       std::runtime_error);
}

TEST_CASE("camera: look_at geometry and validation") {
  using namespace talksplat::cam;
  const Eigen::Vector3d eye(0, 0, -3);
  auto c = look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), 50, 50,
                   16, 16);
  CHECK((c.center() - eye).norm() < 1e-12);
  CHECK((c.to_cam(Eigen::Vector3d::Zero()) - Eigen::Vector3d(0, 0, 3)).norm() <
        1e-12);
  // a point above the target appears with smaller v (y is down in the image)
  CHECK(c.to_cam(Eigen::Vector3d(0, 0.5, 0))(1) < 0.0);

  CHECK_THROWS_WITH_AS(look_at(eye, eye, Eigen::Vector3d::UnitY(), 50, 50, 8, 8),
                       doctest::Contains("eye equals target"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(look_at(eye, Eigen::Vector3d(0, 5, -3),
                               Eigen::Vector3d::UnitY(), 50, 50, 8, 8),
                       doctest::Contains("parallel to up"), std::runtime_error);

  auto bad = c;
  bad.fx = -1;
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.rotation(0, 0) += 0.01;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("camera: text round trip is exact") {
  using namespace talksplat::cam;
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d eye(rng.uniform(-3, 3), rng.uniform(-3, 3),
                              rng.uniform(-5, -2));
    auto c = look_at(eye, Eigen::Vector3d(rng.uniform(-0.2, 0.2), 0, 0),
                     Eigen::Vector3d::UnitY(), rng.uniform(30, 90),
                     rng.uniform(30, 90), 32, 24);
    std::stringstream ss;
    write_camera(ss, c);
    auto back = read_camera(ss);
    CHECK(back.fx == c.fx);
    CHECK(back.fy == c.fy);
    CHECK(back.cx == c.cx);
    CHECK(back.cy == c.cy);
    CHECK(back.width == c.width);
    CHECK(back.height == c.height);
    CHECK(back.rotation == c.rotation);
    CHECK(back.translation == c.translation);
  }
  std::stringstream junk("not-a-camera 1 2");
  CHECK_THROWS(read_camera(junk));
}
