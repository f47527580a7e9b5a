#include "talksplat/image_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

#include "talksplat/common.hpp"

namespace talksplat::img {

namespace {

std::vector<std::uint8_t> quantize_rows(const ImageRGB& im) {
  std::vector<std::uint8_t> bytes(im.px.size());
  for (std::size_t i = 0; i < im.px.size(); ++i) bytes[i] = quantize8(im.px[i]);
  return bytes;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), strcat_("cannot open ", path));
  std::vector<std::uint8_t> data{std::istreambuf_iterator<char>(in),
                                 std::istreambuf_iterator<char>()};
  return data;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[5],
               const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = static_cast<std::uint32_t>(
      crc32(0, out.data() + crc_start, static_cast<uInt>(4 + data.size())));
  put_be32(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void save_ppm(const std::string& path, const ImageRGB& im) {
  check(im.height > 0 && im.width > 0, "empty image");
  std::ofstream out(path, std::ios::binary);
  check(static_cast<bool>(out), strcat_("cannot write ", path));
  out << "P6\n" << im.width << " " << im.height << "\n255\n";
  auto bytes = quantize_rows(im);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  check(static_cast<bool>(out), strcat_("short write to ", path));
}

ImageRGB load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), strcat_("cannot open ", path));
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  check(magic == "P6", strcat_(path, " is not a binary PPM"));
  check(w > 0 && h > 0 && maxval == 255, strcat_(path, ": unsupported PPM header"));
  in.get();  // single whitespace after header
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  check(in.gcount() == static_cast<std::streamsize>(bytes.size()),
        strcat_(path, ": truncated PPM payload"));
  ImageRGB im(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) im.px[i] = bytes[i] / 255.0;
  return im;
}

void save_png(const std::string& path, const ImageRGB& im) {
  check(im.height > 0 && im.width > 0, "empty image");
  const auto w = static_cast<std::size_t>(im.width);
  const auto h = static_cast<std::size_t>(im.height);
  auto bytes = quantize_rows(im);

  // raw scanlines, filter type 0 per row
  std::vector<std::uint8_t> raw;
  raw.reserve(h * (1 + w * 3));
  for (std::size_t y = 0; y < h; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), bytes.begin() + static_cast<std::ptrdiff_t>(y * w * 3),
               bytes.begin() + static_cast<std::ptrdiff_t>((y + 1) * w * 3));
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> zdata(zlen);
  check(compress2(zdata.data(), &zlen, raw.data(),
                  static_cast<uLong>(raw.size()), 6) == Z_OK,
        "deflate failed");
  zdata.resize(zlen);

  std::vector<std::uint8_t> out;
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.insert(out.end(), sig, sig + 8);
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(im.width));
  put_be32(ihdr, static_cast<std::uint32_t>(im.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filters
  ihdr.push_back(0);  // no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", zdata);
  put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  check(static_cast<bool>(f), strcat_("cannot write ", path));
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  check(static_cast<bool>(f), strcat_("short write to ", path));
}

ImageRGB load_png(const std::string& path) {
  auto data = read_file(path);
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  check(data.size() > 8 && std::memcmp(data.data(), sig, 8) == 0,
        strcat_(path, " is not a PNG"));

  std::size_t at = 8;
  int w = 0, h = 0;
  bool saw_ihdr = false, saw_iend = false;
  std::vector<std::uint8_t> zdata;
  while (at + 12 <= data.size()) {
    const std::uint32_t len = get_be32(&data[at]);
    check(at + 12 + len <= data.size(), strcat_(path, ": truncated chunk"));
    const char* type = reinterpret_cast<const char*>(&data[at + 4]);
    const std::uint8_t* body = &data[at + 8];
    const std::uint32_t want_crc = get_be32(&data[at + 8 + len]);
    const auto got_crc = static_cast<std::uint32_t>(
        crc32(0, &data[at + 4], static_cast<uInt>(4 + len)));
    check(want_crc == got_crc, strcat_(path, ": chunk crc mismatch"));
    if (std::memcmp(type, "IHDR", 4) == 0) {
      check(len == 13, strcat_(path, ": bad IHDR"));
      w = static_cast<int>(get_be32(body));
      h = static_cast<int>(get_be32(body + 4));
      check(body[8] == 8 && body[9] == 2 && body[10] == 0 && body[11] == 0 &&
                body[12] == 0,
            strcat_(path, ": only 8-bit non-interlaced truecolor supported"));
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      zdata.insert(zdata.end(), body, body + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
      break;
    }
    at += 12 + len;
  }
  check(saw_ihdr && saw_iend && w > 0 && h > 0, strcat_(path, ": malformed PNG"));

  const std::size_t stride = static_cast<std::size_t>(w) * 3;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (1 + stride));
  uLongf rlen = static_cast<uLongf>(raw.size());
  check(uncompress(raw.data(), &rlen, zdata.data(),
                   static_cast<uLong>(zdata.size())) == Z_OK &&
            rlen == raw.size(),
        strcat_(path, ": inflate failed"));

  // undo per-row filters (bytes-per-pixel = 3)
  std::vector<std::uint8_t> img(static_cast<std::size_t>(h) * stride, 0);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[static_cast<std::size_t>(y) * (1 + stride)];
    const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * (1 + stride) + 1];
    std::uint8_t* dst = &img[static_cast<std::size_t>(y) * stride];
    const std::uint8_t* up = y > 0 ? dst - stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= 3 ? dst[i - 3] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= 3) ? up[i - 3] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: fail(strcat_(path, ": unknown filter ", int(filter)));
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  ImageRGB im(h, w);
  for (std::size_t i = 0; i < img.size(); ++i) im.px[i] = img[i] / 255.0;
  return im;
}

namespace {
bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

void save_image(const std::string& path, const ImageRGB& im) {
  if (ends_with(path, ".ppm"))
    save_ppm(path, im);
  else if (ends_with(path, ".png"))
    save_png(path, im);
  else
    fail(strcat_("unsupported image extension: ", path));
}

ImageRGB load_image(const std::string& path) {
  if (ends_with(path, ".ppm")) return load_ppm(path);
  if (ends_with(path, ".png")) return load_png(path);
  fail(strcat_("unsupported image extension: ", path));
}

}  // namespace talksplat::img
