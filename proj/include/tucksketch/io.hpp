#pragma once

// Binary containers. All integers and scalars are little-endian; every file
// starts with a five-byte magic whose last character is the format version.
//
// TensorFile  "TKTN1" u8 scalar_tag(1 = f64) u32 N u64 extents[N]
//             f64 payload[prod(extents)]   (first index fastest)
// SketchFile  "TKSK1" u32 N u64 shape[N] u64 k[N] u64 s[N]
//             u8 factor_kind u8 core_kind u8 trp_constituent f64 density
//             u64 master_seed f64 V_0 … f64 V_{N-1} (column-major) f64 H
//             u64 checksum (FNV-1a 64 of every preceding byte)
// TuckerFile  "TKTF1" u32 count, count × (u8 kind, u64 bytes), then the
//             blobs in manifest order. kind 0 is the core, kind 1 a factor;
//             each blob is a complete TensorFile (factors have order 2).
// UpdateStream "TKUS1" u32 N u64 shape[N], then records until end of file:
//             u8 type f64 θ1 f64 θ2, and for type 0 (full) a payload of the
//             declared shape, for type 1 (slab) u32 mode u64 offset
//             u64 extent and a payload of the shape with extent along mode.
//             Each record means sk ← θ1·sk + θ2·sketch(payload).
//
// Readers report truncation and malformed content as ErrorCode::format with
// the byte offset; open/write failures are ErrorCode::io. Writers to a path
// go through a temporary file that is renamed into place.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "tucksketch/sketch.hpp"
#include "tucksketch/tensor.hpp"

namespace tks::io {

// Bytes in a SketchFile besides the 8·sketch_storage payload bytes.
std::uint64_t sketch_file_overhead(std::size_t order);

void write_tensor(std::ostream& os, const Tensor& x);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& x);
Tensor load_tensor(const std::filesystem::path& path);
// Shape only, without reading the payload.
Shape peek_tensor_shape(const std::filesystem::path& path);

void write_sketch(std::ostream& os, const TuckerSketch& sk);
TuckerSketch read_sketch(std::istream& is);
void save_sketch(const std::filesystem::path& path, const TuckerSketch& sk);
TuckerSketch load_sketch(const std::filesystem::path& path);

void write_tucker(std::ostream& os, const TuckerFactorization& t);
TuckerFactorization read_tucker(std::istream& is);
void save_tucker(const std::filesystem::path& path, const TuckerFactorization& t);
TuckerFactorization load_tucker(const std::filesystem::path& path);

// Writes a text or binary file through the same temporary-and-rename path.
void save_text(const std::filesystem::path& path, const std::function<void(std::ostream&)>& write);

struct UpdateRecord {
  bool slab = false;
  double theta1 = 1.0;
  double theta2 = 1.0;
  Index mode = 0;
  Index offset = 0;
  Tensor data;
};

class UpdateStreamWriter {
 public:
  UpdateStreamWriter(const std::filesystem::path& path, const Shape& shape);
  ~UpdateStreamWriter();
  UpdateStreamWriter(const UpdateStreamWriter&) = delete;
  UpdateStreamWriter& operator=(const UpdateStreamWriter&) = delete;

  void write_full(const Tensor& x, double theta1 = 1.0, double theta2 = 1.0);
  void write_slab(Index mode, Index offset, const Tensor& slab, double theta1 = 1.0, double theta2 = 1.0);
  // Publishes the file; without it the destructor discards the output.
  void commit();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Reads one record at a time so that memory stays bounded by one payload.
class UpdateStreamReader {
 public:
  explicit UpdateStreamReader(const std::filesystem::path& path);
  ~UpdateStreamReader();
  UpdateStreamReader(const UpdateStreamReader&) = delete;
  UpdateStreamReader& operator=(const UpdateStreamReader&) = delete;

  const Shape& shape() const;
  std::optional<UpdateRecord> next();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tks::io
