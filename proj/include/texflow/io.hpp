#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "texflow/grid.hpp"

namespace texflow {

// Binary tensor container. Layout, all little-endian:
//   bytes 0-3   magic "TGR1"
//   bytes 4-7   u32 rank
//   then        rank x u32 dims
//   then        f64 payload, row-major
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<double> data;
};

// Throws ShapeError if data length != product of dims; IoError on I/O failure.
void write_tensor(const std::string& path, const std::vector<uint32_t>& dims,
                  const std::vector<double>& data);

// Throws FormatError on bad magic or truncated payload; IoError on I/O failure.
Tensor read_tensor(const std::string& path);

// 8-bit PNG, grayscale or RGB only; everything else is a FormatError.
// Loaded values are byte/255.
Image load_image(const std::string& path);

// Clamps to [0, 1], quantizes round-half-up. Image must have 1 or 3 channels.
void save_image(const std::string& path, const Image& img);

// All writers above go through this: write to a sibling temp file, then
// rename into place so readers never observe a half-written file.
void write_file_atomic(const std::string& path, const std::string& bytes);

// Shortest round-trippable decimal (printf %.17g).
std::string format_real(double v);

// CSV accumulator. Line one is a comment stamping the producing settings
// ("# config_hash=<hex16> toolkit_version=<ver>"), line two the column
// names; rows are LF-terminated, reals rendered by format_real. The file
// only appears on write(), atomically.
class CsvWriter {
 public:
  CsvWriter(std::string columns, uint64_t config_hash, const std::string& version);
  void row(const std::vector<std::string>& cells);
  void write(const std::string& path) const;
  const std::string& text() const { return buf_; }

 private:
  std::string buf_;
  size_t n_cols_;
};

std::string csv_cell(double v);
std::string csv_cell(int v);
std::string csv_cell(const std::string& v);

}  // namespace texflow
