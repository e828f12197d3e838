#include "edgestereo/codecs.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace edgestereo {

namespace {
static_assert(std::endian::native == std::endian::little,
              "PFM writer emits little-endian payloads; add byte swapping for this platform");

void check_map_shape(const Tensor& map, const char* who) {
  check(map.rank() == 3 && map.dim(0) == 1,
        std::string(who) + ": expected a [1,H,W] map, got " + map.shape_str());
}
}  // namespace

std::vector<std::uint8_t> pfm_encode(const Tensor& map) {
  check_map_shape(map, "pfm_encode");
  const int H = map.dim(1), W = map.dim(2);
  std::string header = "Pf\n" + std::to_string(W) + " " + std::to_string(H) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.size() + static_cast<std::size_t>(H) * W * 4);
  std::memcpy(out.data(), header.data(), header.size());
  std::uint8_t* p = out.data() + header.size();
  for (int y = H - 1; y >= 0; --y)  // bottom-to-top
    for (int x = 0; x < W; ++x) {
      const float v = static_cast<float>(map.get(static_cast<std::int64_t>(y) * W + x));
      std::memcpy(p, &v, 4);
      p += 4;
    }
  return out;
}

Tensor pfm_decode(const std::uint8_t* data, std::size_t size) {
  std::size_t pos = 0;
  const auto next_token = [&]() {
    while (pos < size && std::isspace(data[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < size && !std::isspace(data[pos])) ++pos;
    check(pos > start && pos < size, "pfm: truncated header");
    ++pos;  // exactly one whitespace terminates the token
    return std::string(reinterpret_cast<const char*>(data) + start, pos - 1 - start);
  };

  const std::string magic = next_token();
  check(magic != "PF", "pfm: color 'PF' files are not supported, expected grayscale 'Pf'");
  check(magic == "Pf", "pfm: bad magic '" + magic + "'");
  int W = 0, H = 0;
  double scale = 0.0;
  try {
    W = std::stoi(next_token());
    H = std::stoi(next_token());
    scale = std::stod(next_token());
  } catch (const std::exception&) {
    throw Error("pfm: malformed header");
  }
  check(W > 0 && H > 0, "pfm: non-positive extents");
  check(scale != 0.0, "pfm: zero scale");
  const bool little = scale < 0.0;
  const std::size_t payload = static_cast<std::size_t>(W) * H * 4;
  check(size - pos >= payload, "pfm: truncated payload (" + std::to_string(size - pos) +
                                   " of " + std::to_string(payload) + " bytes)");

  Tensor map({1, H, W}, DType::F32);
  const std::uint8_t* p = data + pos;
  for (int y = H - 1; y >= 0; --y)
    for (int x = 0; x < W; ++x, p += 4) {
      std::uint8_t b[4];
      std::memcpy(b, p, 4);
      if (!little) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      float v;
      std::memcpy(&v, b, 4);
      map.set(static_cast<std::int64_t>(y) * W + x, v);
    }
  return map;
}

void pfm_write(const std::string& path, const Tensor& map) {
  auto bytes = pfm_encode(map);
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "pfm: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  check(out.good(), "pfm: write failed for '" + path + "'");
}

Tensor pfm_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "pfm: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return pfm_decode(bytes.data(), bytes.size());
}

namespace {

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;

  PngWriter(const std::string& path, int w, int h, int bit_depth, int color_type) {
    fp = std::fopen(path.c_str(), "wb");
    check(fp != nullptr, "png: cannot open '" + path + "' for writing");
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png_create_info_struct(png);
    check(png && info, "png: allocation failure");
    if (setjmp(png_jmpbuf(png))) throw Error("png: write error");
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
  }

  void write_rows(std::vector<png_bytep>& rows) {
    if (setjmp(png_jmpbuf(png))) throw Error("png: write error");
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  }

  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, &info);
    if (fp) std::fclose(fp);
  }
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  int width = 0, height = 0, bit_depth = 0, color_type = 0;

  explicit PngReader(const std::string& path) {
    fp = std::fopen(path.c_str(), "rb");
    check(fp != nullptr, "png: cannot open '" + path + "'");
    png_byte sig[8];
    check(std::fread(sig, 1, 8, fp) == 8 && png_sig_cmp(sig, 0, 8) == 0,
          "png: '" + path + "' is not a PNG file");
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png_create_info_struct(png);
    check(png && info, "png: allocation failure");
    if (setjmp(png_jmpbuf(png))) throw Error("png: read error");
    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    bit_depth = png_get_bit_depth(png, info);
    color_type = png_get_color_type(png, info);
  }

  void read_rows(std::vector<png_bytep>& rows) {
    if (setjmp(png_jmpbuf(png))) throw Error("png: read error");
    png_read_image(png, rows.data());
  }

  ~PngReader() {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    if (fp) std::fclose(fp);
  }
};

std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void png_write_gray8(const std::string& path, const Tensor& img) {
  check_map_shape(img, "png_write_gray8");
  const int H = img.dim(1), W = img.dim(2);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(H) * W);
  for (std::int64_t i = 0; i < img.numel(); ++i) buf[static_cast<std::size_t>(i)] = quantize8(img.get(i));
  std::vector<png_bytep> rows(static_cast<std::size_t>(H));
  for (int y = 0; y < H; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * W;
  PngWriter w(path, W, H, 8, PNG_COLOR_TYPE_GRAY);
  w.write_rows(rows);
}

void png_write_rgb8(const std::string& path, const Tensor& img) {
  check(img.rank() == 3 && img.dim(0) == 3, "png_write_rgb8: expected [3,H,W], got " + img.shape_str());
  const int H = img.dim(1), W = img.dim(2);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(H) * W * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        buf[(static_cast<std::size_t>(y) * W + x) * 3 + c] =
            quantize8(img.get((static_cast<std::int64_t>(c) * H + y) * W + x));
  std::vector<png_bytep> rows(static_cast<std::size_t>(H));
  for (int y = 0; y < H; ++y)
    rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * W * 3;
  PngWriter w(path, W, H, 8, PNG_COLOR_TYPE_RGB);
  w.write_rows(rows);
}

Tensor png_read_gray8(const std::string& path) {
  PngReader r(path);
  check(r.color_type == PNG_COLOR_TYPE_GRAY && r.bit_depth == 8,
        "png: '" + path + "' is not 8-bit grayscale");
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(r.height) * r.width);
  std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y)
    rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * r.width;
  r.read_rows(rows);
  Tensor img({1, r.height, r.width}, DType::F32);
  for (std::int64_t i = 0; i < img.numel(); ++i)
    img.set(i, buf[static_cast<std::size_t>(i)] / 255.0);
  return img;
}

Tensor png_read_rgb8(const std::string& path) {
  PngReader r(path);
  check(r.color_type == PNG_COLOR_TYPE_RGB && r.bit_depth == 8,
        "png: '" + path + "' is not 8-bit RGB");
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(r.height) * r.width * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y)
    rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * r.width * 3;
  r.read_rows(rows);
  Tensor img({3, r.height, r.width}, DType::F32);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.set((static_cast<std::int64_t>(c) * r.height + y) * r.width + x,
                buf[(static_cast<std::size_t>(y) * r.width + x) * 3 + c] / 255.0);
  return img;
}

void png16_disparity_write(const std::string& path, const Tensor& d, const Tensor* valid) {
  check_map_shape(d, "png16_disparity_write");
  if (valid) check(d.same_shape(*valid), "png16_disparity_write: mask shape mismatch");
  const int H = d.dim(1), W = d.dim(2);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(H) * W * 2);
  for (std::int64_t i = 0; i < d.numel(); ++i) {
    const double v = d.get(i);
    check(v >= 0.0 && v <= 255.0,
          "png16_disparity_write: disparity " + std::to_string(v) + " out of [0,255]");
    std::uint16_t q = static_cast<std::uint16_t>(std::lround(v * 256.0));
    if (valid && valid->get(i) == 0.0) q = 0;
    buf[static_cast<std::size_t>(2 * i)] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
    buf[static_cast<std::size_t>(2 * i + 1)] = static_cast<std::uint8_t>(q & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(H));
  for (int y = 0; y < H; ++y)
    rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * W * 2;
  PngWriter w(path, W, H, 16, PNG_COLOR_TYPE_GRAY);
  w.write_rows(rows);
}

DisparityImage png16_disparity_read(const std::string& path) {
  PngReader r(path);
  check(r.color_type == PNG_COLOR_TYPE_GRAY && r.bit_depth == 16,
        "png: '" + path + "' is not 16-bit grayscale");
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(r.height) * r.width * 2);
  std::vector<png_bytep> rows(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y)
    rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * r.width * 2;
  r.read_rows(rows);
  DisparityImage out{Tensor({1, r.height, r.width}, DType::F32),
                     Tensor({1, r.height, r.width}, DType::F32)};
  for (std::int64_t i = 0; i < out.disparity.numel(); ++i) {
    const std::uint16_t q = static_cast<std::uint16_t>(
        (buf[static_cast<std::size_t>(2 * i)] << 8) | buf[static_cast<std::size_t>(2 * i + 1)]);
    out.disparity.set(i, q / 256.0);
    out.valid.set(i, q == 0 ? 0.0 : 1.0);
  }
  return out;
}

void manifest_write(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  check(out.good(), "manifest: cannot open '" + path + "' for writing");
  for (const auto& e : entries)
    out << e.left << ' ' << e.right << ' ' << e.disparity << ' ' << e.mask << ' ' << e.edges << '\n';
  check(out.good(), "manifest: write failed for '" + path + "'");
}

std::vector<ManifestEntry> manifest_read(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "manifest: cannot open '" + path + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    check(static_cast<bool>(ss >> e.left >> e.right >> e.disparity >> e.mask >> e.edges),
          "manifest: malformed line '" + line + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

ManifestSource::ManifestSource(const std::string& manifest_path)
    : dir_(std::filesystem::path(manifest_path).parent_path().string()),
      entries_(manifest_read(manifest_path)) {
  check(!entries_.empty(), "manifest: '" + manifest_path + "' lists no samples");
}

StereoSample ManifestSource::sample(std::int64_t index) const {
  check(index >= 0 && index < size(), "manifest: sample index out of range");
  const auto& e = entries_[static_cast<std::size_t>(index)];
  const auto resolve = [this](const std::string& rel) {
    return dir_.empty() ? rel : dir_ + "/" + rel;
  };
  StereoSample s;
  s.left = png_read_rgb8(resolve(e.left));
  s.right = png_read_rgb8(resolve(e.right));
  s.gt_disparity = pfm_read(resolve(e.disparity));
  s.valid_mask = png_read_gray8(resolve(e.mask));
  s.gt_edges = png_read_gray8(resolve(e.edges));
  // masks quantize through 8-bit PNGs; anything above half counts as set
  for (Tensor* t : {&s.valid_mask, &s.gt_edges})
    for (std::int64_t i = 0; i < t->numel(); ++i) t->set(i, t->get(i) > 0.5 ? 1.0 : 0.0);
  return s;
}

}  // namespace edgestereo
