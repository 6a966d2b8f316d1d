#include "tucksketch/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include "tucksketch/error.hpp"

namespace tks::io {

namespace {

constexpr std::size_t kMagicLen = 5;
constexpr char kTensorMagic[] = "TKTN1";
constexpr char kSketchMagic[] = "TKSK1";
constexpr char kTuckerMagic[] = "TKTF1";
constexpr char kStreamMagic[] = "TKUS1";
constexpr std::uint8_t kScalarF64 = 1;
constexpr std::uint8_t kEntryCore = 0;
constexpr std::uint8_t kEntryFactor = 1;
constexpr std::uint8_t kRecordFull = 0;
constexpr std::uint8_t kRecordSlab = 1;
// Refuse headers that declare absurd orders before allocating anything.
constexpr std::uint32_t kMaxOrder = 64;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::uint64_t h, const char* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= kFnvPrime;
  }
  return h;
}

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void raw(const char* p, std::size_t n) {
    os_.write(p, static_cast<std::streamsize>(n));
    if (!os_) fail(ErrorCode::io, "write failed");
    hash_ = fnv1a(hash_, p, n);
  }
  template <typename T>
  void put(T v) {
    v = to_little(v);
    raw(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void doubles(std::span<const double> d) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
    } else {
      for (double v : d) put(v);
    }
  }
  void magic(const char* m) { raw(m, kMagicLen); }
  std::uint64_t hash() const { return hash_; }

 private:
  std::ostream& os_;
  std::uint64_t hash_ = kFnvOffset;
};

class Reader {
 public:
  explicit Reader(std::istream& is, std::uint64_t base = 0) : is_(is), offset_(base) {}

  void raw(char* p, std::size_t n, const char* what) {
    is_.read(p, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(is_.gcount());
    if (got != n) {
      std::ostringstream msg;
      msg << "truncated file: expected " << n << " bytes of " << what << " at offset " << offset_ << ", found "
          << got;
      fail(ErrorCode::format, msg.str());
    }
    hash_ = fnv1a(hash_, p, n);
    offset_ += n;
  }
  template <typename T>
  T get(const char* what) {
    T v;
    raw(reinterpret_cast<char*>(&v), sizeof v, what);
    return to_little(v);
  }
  void doubles(std::span<double> d, const char* what) {
    raw(reinterpret_cast<char*>(d.data()), d.size() * sizeof(double), what);
    if constexpr (std::endian::native != std::endian::little)
      for (double& v : d) v = to_little(v);
  }
  // True at a clean end of input.
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

  void magic(const char* expected, const char* format_name) {
    char m[kMagicLen];
    const std::uint64_t start = offset_;
    raw(m, kMagicLen, "magic");
    if (std::memcmp(m, expected, kMagicLen - 1) != 0)
      fail(ErrorCode::format, "not a " + std::string(format_name) + " (bad magic at offset " +
                                  std::to_string(start) + ")");
    if (m[kMagicLen - 1] != expected[kMagicLen - 1])
      fail(ErrorCode::format, "unsupported " + std::string(format_name) + " version '" +
                                  std::string(1, m[kMagicLen - 1]) + "' (this build reads version '" +
                                  std::string(1, expected[kMagicLen - 1]) + "')");
  }

  Shape shape(std::uint32_t order, const char* what) {
    Shape s(order);
    for (auto& e : s) {
      const std::uint64_t pos = offset_;
      const auto v = get<std::uint64_t>(what);
      if (v == 0 || v > (std::uint64_t{1} << 40))
        fail(ErrorCode::format, std::string("invalid ") + what + " " + std::to_string(v) + " at offset " +
                                    std::to_string(pos));
      e = static_cast<Index>(v);
    }
    return s;
  }

  std::uint32_t order(const char* what) {
    const std::uint64_t pos = offset_;
    const auto n = get<std::uint32_t>(what);
    if (n == 0 || n > kMaxOrder)
      fail(ErrorCode::format, std::string("invalid ") + what + " " + std::to_string(n) + " at offset " +
                                  std::to_string(pos));
    return n;
  }

  std::uint64_t offset() const { return offset_; }
  std::uint64_t hash() const { return hash_; }

 private:
  std::istream& is_;
  std::uint64_t offset_;
  std::uint64_t hash_ = kFnvOffset;
};

void put_shape(Writer& w, const Shape& s) {
  w.put(static_cast<std::uint32_t>(s.size()));
  for (Index e : s) w.put(static_cast<std::uint64_t>(e));
}

void put_extents(Writer& w, const std::vector<Index>& v) {
  for (Index e : v) w.put(static_cast<std::uint64_t>(e));
}

void write_tensor_to(Writer& w, const Tensor& x) {
  w.magic(kTensorMagic);
  w.put(kScalarF64);
  put_shape(w, x.shape());
  w.doubles(x.data());
}

Tensor read_tensor_from(Reader& r) {
  r.magic(kTensorMagic, "tensor file");
  const std::uint64_t tag_pos = r.offset();
  const auto tag = r.get<std::uint8_t>("scalar tag");
  if (tag != kScalarF64)
    fail(ErrorCode::format,
         "unsupported scalar tag " + std::to_string(tag) + " at offset " + std::to_string(tag_pos) + " (only f64)");
  const auto n = r.order("tensor order");
  Tensor x(r.shape(n, "tensor extent"));
  r.doubles(x.data(), "tensor payload");
  return x;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot open '" + path.string() + "' for reading: " + std::strerror(errno));
  return f;
}

// Writes to a sibling temporary file and renames it over `path` on commit.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path path) : path_(std::move(path)) {
    tmp_ = path_;
    tmp_ += ".tmp." + std::to_string(::getpid());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) fail(ErrorCode::io, "cannot open '" + path_.string() + "' for writing: " + std::strerror(errno));
  }
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    out_.close();
    if (!out_) fail(ErrorCode::io, "failed writing '" + path_.string() + "'");
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) fail(ErrorCode::io, "cannot move output into place at '" + path_.string() + "': " + ec.message());
    committed_ = true;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

template <typename F>
void save_atomic(const std::filesystem::path& path, F&& write) {
  AtomicFile f(path);
  write(f.stream());
  f.commit();
}

DrmKind drm_kind_from(std::uint8_t v, std::uint64_t pos) {
  if (v > static_cast<std::uint8_t>(DrmKind::trp))
    fail(ErrorCode::format, "unknown map kind " + std::to_string(v) + " at offset " + std::to_string(pos));
  return static_cast<DrmKind>(v);
}

}  // namespace

void save_text(const std::filesystem::path& path, const std::function<void(std::ostream&)>& write) {
  save_atomic(path, write);
}

std::uint64_t sketch_file_overhead(std::size_t order) {
  // magic, N, shape/k/s, three kind bytes, density, seed, checksum
  return kMagicLen + 4 + 3 * 8 * order + 3 + 8 + 8 + 8;
}

void write_tensor(std::ostream& os, const Tensor& x) {
  Writer w(os);
  write_tensor_to(w, x);
}

Tensor read_tensor(std::istream& is) {
  Reader r(is);
  return read_tensor_from(r);
}

void save_tensor(const std::filesystem::path& path, const Tensor& x) {
  save_atomic(path, [&](std::ostream& os) { write_tensor(os, x); });
}

Tensor load_tensor(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_tensor(f);
}

Shape peek_tensor_shape(const std::filesystem::path& path) {
  auto f = open_in(path);
  Reader r(f);
  r.magic(kTensorMagic, "tensor file");
  if (r.get<std::uint8_t>("scalar tag") != kScalarF64) fail(ErrorCode::format, "unsupported scalar tag");
  const auto n = r.order("tensor order");
  return r.shape(n, "tensor extent");
}

void write_sketch(std::ostream& os, const TuckerSketch& sk) {
  const auto& p = sk.params;
  require(p.k.size() == sk.shape.size() && p.s.size() == sk.shape.size(), "sketch parameters do not match its order");
  Writer w(os);
  w.magic(kSketchMagic);
  put_shape(w, sk.shape);
  put_extents(w, p.k);
  put_extents(w, p.s);
  w.put(static_cast<std::uint8_t>(p.factor_kind));
  w.put(static_cast<std::uint8_t>(p.core_kind));
  w.put(static_cast<std::uint8_t>(p.trp_constituent));
  w.put(p.density);
  w.put(p.master_seed);
  for (const auto& v : sk.factor_sketches) w.doubles({v.data(), static_cast<std::size_t>(v.size())});
  w.doubles(sk.core_sketch.data());
  w.put(w.hash());
}

TuckerSketch read_sketch(std::istream& is) {
  Reader r(is);
  r.magic(kSketchMagic, "sketch file");
  TuckerSketch sk;
  const auto n = r.order("sketch order");
  sk.shape = r.shape(n, "sketch extent");
  sk.params.k = r.shape(n, "factor sketch size k");
  sk.params.s = r.shape(n, "core sketch size s");
  std::uint64_t pos = r.offset();
  sk.params.factor_kind = drm_kind_from(r.get<std::uint8_t>("factor map kind"), pos);
  pos = r.offset();
  sk.params.core_kind = drm_kind_from(r.get<std::uint8_t>("core map kind"), pos);
  pos = r.offset();
  sk.params.trp_constituent = drm_kind_from(r.get<std::uint8_t>("constituent kind"), pos);
  sk.params.density = r.get<double>("density");
  sk.params.master_seed = r.get<std::uint64_t>("master seed");
  const std::uint64_t params_end = r.offset();
  try {
    validate(sk.params, sk.shape);
  } catch (const Error& e) {
    fail(ErrorCode::format, "invalid sketch parameters before offset " + std::to_string(params_end) + ": " + e.what());
  }
  for (std::size_t m = 0; m < n; ++m) {
    Matrix v(sk.shape[m], sk.params.k[m]);
    r.doubles({v.data(), static_cast<std::size_t>(v.size())}, "factor sketch payload");
    sk.factor_sketches.push_back(std::move(v));
  }
  sk.core_sketch = Tensor(sk.params.s);
  r.doubles(sk.core_sketch.data(), "core sketch payload");
  const std::uint64_t expected = r.hash();
  const std::uint64_t pos_sum = r.offset();
  const auto stored = r.get<std::uint64_t>("checksum");
  if (stored != expected) {
    std::ostringstream msg;
    msg << "sketch checksum mismatch at offset " << pos_sum << " (stored " << std::hex << stored << ", computed "
        << expected << ")";
    fail(ErrorCode::format, msg.str());
  }
  return sk;
}

void save_sketch(const std::filesystem::path& path, const TuckerSketch& sk) {
  save_atomic(path, [&](std::ostream& os) { write_sketch(os, sk); });
}

TuckerSketch load_sketch(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_sketch(f);
}

void write_tucker(std::ostream& os, const TuckerFactorization& t) {
  validate(t);
  std::vector<std::string> blobs;
  std::ostringstream core;
  write_tensor(core, t.core);
  blobs.push_back(core.str());
  for (const auto& f : t.factors) {
    std::ostringstream b;
    write_tensor(b, matrix_to_tensor(f));
    blobs.push_back(b.str());
  }
  Writer w(os);
  w.magic(kTuckerMagic);
  w.put(static_cast<std::uint32_t>(blobs.size()));
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    w.put(i == 0 ? kEntryCore : kEntryFactor);
    w.put(static_cast<std::uint64_t>(blobs[i].size()));
  }
  for (const auto& b : blobs) w.raw(b.data(), b.size());
}

TuckerFactorization read_tucker(std::istream& is) {
  Reader r(is);
  r.magic(kTuckerMagic, "tucker file");
  const auto count = r.order("entry count");
  if (count < 2) fail(ErrorCode::format, "tucker file needs a core and at least one factor");
  std::vector<std::pair<std::uint8_t, std::uint64_t>> manifest(count);
  for (auto& [kind, bytes] : manifest) {
    kind = r.get<std::uint8_t>("manifest kind");
    bytes = r.get<std::uint64_t>("manifest length");
  }
  TuckerFactorization t;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto [kind, bytes] = manifest[i];
    const std::uint64_t start = r.offset();
    const std::uint8_t expected = i == 0 ? kEntryCore : kEntryFactor;
    if (kind != expected)
      fail(ErrorCode::format, "manifest entry " + std::to_string(i) + " has kind " + std::to_string(kind));
    Tensor x = read_tensor_from(r);
    if (r.offset() - start != bytes)
      fail(ErrorCode::format, "entry " + std::to_string(i) + " at offset " + std::to_string(start) +
                                  " does not match its manifest length");
    if (i == 0) {
      t.core = std::move(x);
    } else {
      if (x.order() != 2) fail(ErrorCode::format, "factor entry " + std::to_string(i) + " is not a matrix");
      t.factors.push_back(tensor_to_matrix(x));
    }
  }
  try {
    validate(t);
  } catch (const Error& e) {
    fail(ErrorCode::format, std::string("inconsistent tucker file: ") + e.what());
  }
  return t;
}

void save_tucker(const std::filesystem::path& path, const TuckerFactorization& t) {
  save_atomic(path, [&](std::ostream& os) { write_tucker(os, t); });
}

TuckerFactorization load_tucker(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_tucker(f);
}

struct UpdateStreamWriter::Impl {
  Impl(const std::filesystem::path& path, Shape s) : file(path), writer(file.stream()), shape(std::move(s)) {}
  AtomicFile file;
  Writer writer;
  Shape shape;
};

UpdateStreamWriter::UpdateStreamWriter(const std::filesystem::path& path, const Shape& shape) {
  require(!shape.empty(), "update stream needs a non-empty shape");
  impl_ = std::make_unique<Impl>(path, shape);
  impl_->writer.magic(kStreamMagic);
  put_shape(impl_->writer, shape);
}

UpdateStreamWriter::~UpdateStreamWriter() = default;

void UpdateStreamWriter::write_full(const Tensor& x, double theta1, double theta2) {
  require(x.shape() == impl_->shape, "update payload does not match the stream shape");
  auto& w = impl_->writer;
  w.put(kRecordFull);
  w.put(theta1);
  w.put(theta2);
  w.doubles(x.data());
}

void UpdateStreamWriter::write_slab(Index mode, Index offset, const Tensor& slab, double theta1, double theta2) {
  const Shape& shape = impl_->shape;
  require(mode >= 0 && mode < static_cast<Index>(shape.size()), "slab mode out of range");
  require(slab.order() == static_cast<Index>(shape.size()), "slab order differs from the stream shape");
  for (std::size_t m = 0; m < shape.size(); ++m)
    if (static_cast<Index>(m) != mode) require(slab.shape()[m] == shape[m], "slab extents differ off the slab mode");
  const Index extent = slab.extent(mode);
  require(offset >= 0 && offset + extent <= shape[static_cast<std::size_t>(mode)], "slab exceeds the stream shape");
  auto& w = impl_->writer;
  w.put(kRecordSlab);
  w.put(theta1);
  w.put(theta2);
  w.put(static_cast<std::uint32_t>(mode));
  w.put(static_cast<std::uint64_t>(offset));
  w.put(static_cast<std::uint64_t>(extent));
  w.doubles(slab.data());
}

void UpdateStreamWriter::commit() { impl_->file.commit(); }

struct UpdateStreamReader::Impl {
  explicit Impl(const std::filesystem::path& path) : file(open_in(path)), reader(file) {}
  std::ifstream file;
  Reader reader;
  Shape shape;
};

UpdateStreamReader::UpdateStreamReader(const std::filesystem::path& path) : impl_(std::make_unique<Impl>(path)) {
  auto& r = impl_->reader;
  r.magic(kStreamMagic, "update stream");
  const auto n = r.order("stream order");
  impl_->shape = r.shape(n, "stream extent");
}

UpdateStreamReader::~UpdateStreamReader() = default;

const Shape& UpdateStreamReader::shape() const { return impl_->shape; }

std::optional<UpdateRecord> UpdateStreamReader::next() {
  auto& r = impl_->reader;
  if (r.at_end()) return std::nullopt;
  const std::uint64_t start = r.offset();
  UpdateRecord rec;
  const auto type = r.get<std::uint8_t>("record type");
  if (type != kRecordFull && type != kRecordSlab)
    fail(ErrorCode::format, "unknown record type " + std::to_string(type) + " at offset " + std::to_string(start));
  rec.theta1 = r.get<double>("theta1");
  rec.theta2 = r.get<double>("theta2");
  Shape shape = impl_->shape;
  if (type == kRecordSlab) {
    rec.slab = true;
    const std::uint64_t pos = r.offset();
    const auto mode = r.get<std::uint32_t>("slab mode");
    const auto offset = r.get<std::uint64_t>("slab offset");
    const auto extent = r.get<std::uint64_t>("slab extent");
    if (mode >= shape.size() || extent == 0 || offset + extent > static_cast<std::uint64_t>(shape[mode]))
      fail(ErrorCode::format, "slab header at offset " + std::to_string(pos) + " does not fit the stream shape");
    rec.mode = mode;
    rec.offset = static_cast<Index>(offset);
    shape[mode] = static_cast<Index>(extent);
  }
  rec.data = Tensor(shape);
  r.doubles(rec.data.data(), "record payload");
  return rec;
}

}  // namespace tks::io
