#include "neurn/tensorio.hpp"

#include "neurn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace neurn {

namespace {

constexpr std::string_view kNtfMagic = "NTF1";
constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

void check_finite(const Plane& p) {
  if (!p.allFinite()) throw UsageError("image contains non-finite values");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(std::string_view bytes, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

std::uint32_t get_be32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  }
  return v;
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

DataError data_error(const std::string& source, std::size_t offset, const std::string& what) {
  std::ostringstream msg;
  msg << source << ": " << what << " at byte " << offset;
  return DataError(msg.str());
}

}  // namespace

// ---- Image ----------------------------------------------------------------

Image::Image(int width, int height, int channels, double fill) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw UsageError("image dimensions must be positive");
  }
  if (!std::isfinite(fill)) throw UsageError("image fill value must be finite");
  planes_.assign(static_cast<std::size_t>(channels), Plane::Constant(height, width, fill));
}

Image::Image(std::vector<Plane> planes) : planes_(std::move(planes)) {
  if (planes_.empty()) throw UsageError("image needs at least one channel");
  const auto rows = planes_.front().rows();
  const auto cols = planes_.front().cols();
  if (rows <= 0 || cols <= 0) throw UsageError("image dimensions must be positive");
  for (const auto& p : planes_) {
    if (p.rows() != rows || p.cols() != cols) {
      throw UsageError("image channels differ in size");
    }
    check_finite(p);
  }
}

Image::Image(Plane plane) : Image(std::vector<Plane>{std::move(plane)}) {}

std::vector<double> Image::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& p : planes_) out.insert(out.end(), p.data(), p.data() + p.size());
  return out;
}

bool Image::operator==(const Image& other) const {
  if (planes_.size() != other.planes_.size()) return false;
  for (std::size_t c = 0; c < planes_.size(); ++c) {
    if (planes_[c].rows() != other.planes_[c].rows() ||
        planes_[c].cols() != other.planes_[c].cols() || planes_[c] != other.planes_[c]) {
      return false;
    }
  }
  return true;
}

// ---- Tensor ---------------------------------------------------------------

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_, Meta meta_)
    : shape(std::move(shape_)), data(std::move(data_)), meta(std::move(meta_)) {
  validate();
}

void Tensor::validate() const {
  if (shape_product(shape) != data.size()) {
    throw UsageError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape product " + std::to_string(shape_product(shape)));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw UsageError("tensor contains non-finite values");
  }
}

// ---- NTF ------------------------------------------------------------------

std::string encode_ntf(const Tensor& t, Dtype dtype) {
  t.validate();
  nlohmann::json header;
  header["dtype"] = dtype == Dtype::f64 ? "f64" : "f32";
  header["shape"] = t.shape;
  header["meta"] = t.meta;
  const std::string text = header.dump();

  std::string out;
  const std::size_t width = dtype == Dtype::f64 ? 8 : 4;
  out.reserve(8 + text.size() + t.data.size() * width);
  out.append(kNtfMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  for (double v : t.data) {
    if (dtype == Dtype::f64) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Tensor decode_ntf(std::string_view bytes, const std::string& source) {
  if (bytes.size() < 4) throw data_error(source, bytes.size(), "truncated magic");
  if (bytes.substr(0, 4) != kNtfMagic) throw data_error(source, 0, "bad magic");
  if (bytes.size() < 8) throw data_error(source, bytes.size(), "truncated header length");
  const auto header_len = get_le<std::uint32_t>(bytes, 4);
  if (bytes.size() - 8 < header_len) throw data_error(source, bytes.size(), "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw data_error(source, 8, std::string("unparseable header (") + e.what() + ")");
  }

  Tensor t;
  std::size_t width = 0;
  try {
    const auto dtype = header.at("dtype").get<std::string>();
    if (dtype == "f64") {
      width = 8;
    } else if (dtype == "f32") {
      width = 4;
    } else {
      throw data_error(source, 8, "unknown dtype '" + dtype + "'");
    }
    t.shape = header.at("shape").get<std::vector<std::size_t>>();
    if (header.contains("meta")) t.meta = header.at("meta").get<Meta>();
  } catch (const nlohmann::json::exception& e) {
    throw data_error(source, 8, std::string("malformed header (") + e.what() + ")");
  }

  const std::size_t payload_at = 8 + header_len;
  const std::size_t expected = shape_product(t.shape) * width;
  const std::size_t actual = bytes.size() - payload_at;
  if (actual < expected) {
    throw data_error(source, bytes.size(),
                     "truncated payload (expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(actual) + ")");
  }
  if (actual > expected) {
    throw data_error(source, payload_at + expected,
                     "payload longer than shape " + std::to_string(expected) + " bytes");
  }

  t.data.resize(shape_product(t.shape));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const std::size_t at = payload_at + i * width;
    const double v = width == 8 ? std::bit_cast<double>(get_le<std::uint64_t>(bytes, at))
                                : static_cast<double>(
                                      std::bit_cast<float>(get_le<std::uint32_t>(bytes, at)));
    if (!std::isfinite(v)) throw data_error(source, at, "non-finite value");
    t.data[i] = v;
  }
  return t;
}

void save_ntf(const Tensor& t, const std::filesystem::path& path, Dtype dtype) {
  write_file(path, encode_ntf(t, dtype));
}

Tensor load_ntf(const std::filesystem::path& path) {
  return decode_ntf(read_file(path), path.string());
}

bool is_ntf_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string_view(magic, 4) == kNtfMagic;
}

// ---- IDX ------------------------------------------------------------------

Tensor load_idx(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string source = path.string();
  if (bytes.size() < 8) throw data_error(source, bytes.size(), "truncated IDX header");
  const std::uint32_t magic = get_be32(bytes, 0);
  const std::uint32_t count = get_be32(bytes, 4);

  Tensor t;
  std::size_t payload_at = 8;
  double scale = 1.0;
  if (magic == kIdxImages) {
    if (bytes.size() < 16) throw data_error(source, bytes.size(), "truncated IDX header");
    const std::uint32_t rows = get_be32(bytes, 8);
    const std::uint32_t cols = get_be32(bytes, 12);
    t.shape = {count, rows, cols};
    payload_at = 16;
    scale = 1.0 / 255.0;
  } else if (magic == kIdxLabels) {
    t.shape = {count};
  } else {
    std::ostringstream msg;
    msg << "unknown IDX magic 0x" << std::hex << magic;
    throw data_error(source, 0, msg.str());
  }

  const std::size_t n = shape_product(t.shape);
  if (bytes.size() - payload_at != n) {
    throw data_error(source, bytes.size(),
                     "IDX item count mismatch (header implies " + std::to_string(n) +
                         " bytes, payload has " + std::to_string(bytes.size() - payload_at) + ")");
  }
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.data[i] = static_cast<unsigned char>(bytes[payload_at + i]) * scale;
  }
  return t;
}

void save_idx(const Tensor& t, const std::filesystem::path& path) {
  t.validate();
  std::string out;
  double scale = 1.0;
  if (t.rank() == 3) {
    put_be32(out, kIdxImages);
    for (auto d : t.shape) put_be32(out, static_cast<std::uint32_t>(d));
    scale = 255.0;
  } else if (t.rank() == 1) {
    put_be32(out, kIdxLabels);
    put_be32(out, static_cast<std::uint32_t>(t.shape[0]));
  } else {
    throw UsageError("IDX export supports rank 1 (labels) or rank 3 (images)");
  }
  for (double v : t.data) {
    const double b = std::round(v * scale);
    if (b < 0.0 || b > 255.0) throw UsageError("IDX value out of byte range");
    out.push_back(static_cast<char>(static_cast<unsigned char>(b)));
  }
  write_file(path, out);
}

// ---- Image operations -----------------------------------------------------

namespace detail {
void require_positive_dims(int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) {
    throw UsageError("resize target must be positive, got " + std::to_string(out_w) + "x" +
                     std::to_string(out_h));
  }
}
}  // namespace detail

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  detail::require_positive_dims(out_w, out_h);
  std::vector<Plane> planes;
  planes.reserve(img.planes().size());
  for (const auto& p : img.planes()) planes.push_back(resize_bilinear(p, out_w, out_h));
  return Image(std::move(planes));
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw UsageError("grayscale conversion needs 1 or 3 channels, got " +
                     std::to_string(img.channels()));
  }
  Plane g = 0.299 * img.channel(0) + 0.587 * img.channel(1) + 0.114 * img.channel(2);
  return Image(std::move(g));
}

std::vector<Plane> planes_from_tensor(const Tensor& t) {
  std::size_t n = 0, h = 0, w = 0;
  if (t.rank() == 3) {
    n = t.shape[0];
    h = t.shape[1];
    w = t.shape[2];
  } else if (t.rank() == 2) {
    n = t.shape[0];
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(double(t.shape[1]))));
    if (side * side != t.shape[1]) {
      throw DataError("rank-2 tensor rows of length " + std::to_string(t.shape[1]) +
                      " are not square maps");
    }
    h = w = side;
  } else {
    throw DataError("expected a [n, h, w] or [n, side*side] tensor, got rank " +
                    std::to_string(t.rank()));
  }
  std::vector<Plane> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(Eigen::Map<const Plane>(t.data.data() + i * h * w, Eigen::Index(h),
                                          Eigen::Index(w)));
  }
  return out;
}

Tensor tensor_from_planes(const std::vector<Plane>& planes, Meta meta) {
  Tensor t;
  t.meta = std::move(meta);
  const std::size_t h = planes.empty() ? 0 : static_cast<std::size_t>(planes.front().rows());
  const std::size_t w = planes.empty() ? 0 : static_cast<std::size_t>(planes.front().cols());
  t.shape = {planes.size(), h, w};
  t.data.reserve(planes.size() * h * w);
  for (const auto& p : planes) {
    if (static_cast<std::size_t>(p.rows()) != h || static_cast<std::size_t>(p.cols()) != w) {
      throw UsageError("planes differ in size");
    }
    t.data.insert(t.data.end(), p.data(), p.data() + p.size());
  }
  t.validate();
  return t;
}

}  // namespace neurn
