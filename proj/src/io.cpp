#include "texflow/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "texflow/error.hpp"

namespace texflow {

namespace {

constexpr char kTensorMagic[4] = {'T', 'G', 'R', '1'};

void append_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path);
  return bytes;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("rename failed for " + path);
  }
}

void write_tensor(const std::string& path, const std::vector<uint32_t>& dims,
                  const std::vector<double>& data) {
  size_t product = 1;
  for (uint32_t d : dims) product *= d;
  if (product != data.size())
    throw ShapeError("tensor payload length " + std::to_string(data.size()) +
                     " != product of dims " + std::to_string(product));

  std::string bytes;
  bytes.reserve(8 + 4 * dims.size() + 8 * data.size());
  bytes.append(kTensorMagic, 4);
  append_u32_le(bytes, static_cast<uint32_t>(dims.size()));
  for (uint32_t d : dims) append_u32_le(bytes, d);
  static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);
  // Host is little-endian on every target we build for; serialize by memcpy.
  const size_t head = bytes.size();
  bytes.resize(head + 8 * data.size());
  std::memcpy(bytes.data() + head, data.data(), 8 * data.size());
  write_file_atomic(path, bytes);
}

Tensor read_tensor(const std::string& path) {
  const std::string bytes = read_all(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, kTensorMagic, 4) != 0)
    throw FormatError(path + ": not a TGR1 tensor");
  const uint32_t rank = read_u32_le(p + 4);
  if (bytes.size() < 8 + 4 * static_cast<size_t>(rank))
    throw FormatError(path + ": truncated dim list");
  Tensor t;
  t.dims.resize(rank);
  size_t product = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    t.dims[i] = read_u32_le(p + 8 + 4 * i);
    product *= t.dims[i];
  }
  const size_t head = 8 + 4 * static_cast<size_t>(rank);
  if (bytes.size() != head + 8 * product)
    throw FormatError(path + ": payload size mismatch (have " +
                      std::to_string(bytes.size() - head) + " bytes, expect " +
                      std::to_string(8 * product) + ")");
  t.data.resize(product);
  std::memcpy(t.data.data(), p + head, 8 * product);
  return t;
}

namespace {

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

}  // namespace

Image load_image(const std::string& path) {
  PngReadCloser c;
  c.fp = std::fopen(path.c_str(), "rb");
  if (!c.fp) throw IoError("cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, c.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError(path + ": not a PNG file");

  c.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!c.png) throw IoError("png_create_read_struct failed");
  c.info = png_create_info_struct(c.png);
  if (!c.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(c.png))) throw FormatError(path + ": corrupt PNG data");

  png_init_io(c.png, c.fp);
  png_set_sig_bytes(c.png, 8);
  png_read_info(c.png, c.info);

  const png_uint_32 w = png_get_image_width(c.png, c.info);
  const png_uint_32 h = png_get_image_height(c.png, c.info);
  const int depth = png_get_bit_depth(c.png, c.info);
  const int color = png_get_color_type(c.png, c.info);
  if (depth != 8)
    throw FormatError(path + ": unsupported bit depth " + std::to_string(depth));
  int channels;
  if (color == PNG_COLOR_TYPE_GRAY) {
    channels = 1;
  } else if (color == PNG_COLOR_TYPE_RGB) {
    channels = 3;
  } else {
    throw FormatError(path + ": unsupported color type " + std::to_string(color));
  }

  Image img(static_cast<int>(h), static_cast<int>(w), channels);
  std::vector<unsigned char> row(static_cast<size_t>(w) * channels);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(c.png, row.data(), nullptr);
    for (size_t i = 0; i < row.size(); ++i)
      img.data[static_cast<size_t>(y) * w * channels + i] = row[i] / 255.0;
  }
  png_read_end(c.png, nullptr);
  return img;
}

void save_image(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ShapeError("save_image: need 1 or 3 channels, got " + std::to_string(img.channels));
  if (img.height < 1 || img.width < 1) throw ShapeError("save_image: empty image");

  // Quantize first so a failure cannot leave a partial file behind the rename.
  std::vector<unsigned char> bytes(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    double v = img.data[i];
    if (!(v > 0.0)) v = 0.0;  // also catches NaN
    if (v > 1.0) v = 1.0;
    bytes[i] = static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
  }

  const std::string tmp = path + ".tmp";
  PngWriteCloser c;
  c.fp = std::fopen(tmp.c_str(), "wb");
  if (!c.fp) throw IoError("cannot open " + tmp + " for writing");
  c.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!c.png) throw IoError("png_create_write_struct failed");
  c.info = png_create_info_struct(c.png);
  if (!c.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(c.png))) {
    std::remove(tmp.c_str());
    throw IoError("PNG encode failed for " + path);
  }

  png_init_io(c.png, c.fp);
  png_set_IHDR(c.png, c.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(c.png, c.info);
  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y)
    png_write_row(c.png, const_cast<png_bytep>(bytes.data() + y * stride));
  png_write_end(c.png, nullptr);
  std::fclose(c.fp);
  c.fp = nullptr;

  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("rename failed for " + path);
  }
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_cell(double v) { return format_real(v); }
std::string csv_cell(int v) { return std::to_string(v); }
std::string csv_cell(const std::string& v) { return v; }

CsvWriter::CsvWriter(std::string columns, uint64_t config_hash, const std::string& version) {
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash));
  buf_ = "# config_hash=";
  buf_ += hash_hex;
  buf_ += " toolkit_version=" + version + "\n";
  n_cols_ = static_cast<size_t>(std::count(columns.begin(), columns.end(), ',')) + 1;
  buf_ += columns;
  buf_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != n_cols_)
    throw ShapeError("csv row has " + std::to_string(cells.size()) + " cells, header has " +
                     std::to_string(n_cols_));
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) buf_ += ',';
    buf_ += cells[i];
  }
  buf_ += '\n';
}

void CsvWriter::write(const std::string& path) const { write_file_atomic(path, buf_); }

}  // namespace texflow
