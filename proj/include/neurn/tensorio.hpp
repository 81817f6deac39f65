#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace neurn {

/// One image channel, height rows by width columns.
template <typename Scalar>
using PlaneT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Plane = PlaneT<double>;

using Meta = std::map<std::string, std::string>;

/// A C-channel image stored as one row-major plane per channel.
///
/// All planes share the same size and every value is finite; the
/// constructors enforce both. Nominal intensity range is [0, 1] but
/// it is not enforced, since shifted domains and intermediate maps leave it.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  explicit Image(std::vector<Plane> planes);
  explicit Image(Plane plane);

  int width() const { return planes_.empty() ? 0 : static_cast<int>(planes_.front().cols()); }
  int height() const { return planes_.empty() ? 0 : static_cast<int>(planes_.front().rows()); }
  int channels() const { return static_cast<int>(planes_.size()); }
  std::size_t size() const {
    return static_cast<std::size_t>(width()) * height() * channels();
  }

  const Plane& channel(int c) const { return planes_.at(static_cast<std::size_t>(c)); }
  Plane& channel(int c) { return planes_.at(static_cast<std::size_t>(c)); }
  const std::vector<Plane>& planes() const { return planes_; }

  /// Pixels in channel-major, row-major order.
  std::vector<double> flatten() const;

  bool operator==(const Image& other) const;

 private:
  std::vector<Plane> planes_;
};

/// Dense row-major tensor with free-form string metadata.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  Meta meta;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_, Meta meta_ = {});

  std::size_t rank() const { return shape.size(); }
  std::size_t numel() const { return data.size(); }

  /// Throws UsageError when data length or finiteness is off.
  void validate() const;

  bool operator==(const Tensor& other) const = default;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

enum class Dtype { f32, f64 };

// NTF: "NTF1" | u32 LE header length | JSON header | LE payload.
std::string encode_ntf(const Tensor& t, Dtype dtype = Dtype::f64);
Tensor decode_ntf(std::string_view bytes, const std::string& source = "<memory>");
void save_ntf(const Tensor& t, const std::filesystem::path& path, Dtype dtype = Dtype::f64);
Tensor load_ntf(const std::filesystem::path& path);

/// Reads an unsigned-byte IDX file. Image sets (magic 0x00000803) come back
/// as [count, rows, cols] scaled to [0, 1]; label sets (0x00000801) as
/// [count] holding the raw label values.
Tensor load_idx(const std::filesystem::path& path);

/// Writes [count, rows, cols] values in [0, 1] as an image set, or [count]
/// integers in [0, 255] as a label set.
void save_idx(const Tensor& t, const std::filesystem::path& path);

/// True when the file starts with the NTF magic.
bool is_ntf_file(const std::filesystem::path& path);

/// Bilinear resampling with corner-aligned sample positions: output
/// sample i lands on input coordinate i * (in - 1) / (out - 1).
template <typename Derived>
PlaneT<typename Derived::Scalar> resize_bilinear(const Eigen::MatrixBase<Derived>& src,
                                                 int out_w, int out_h);

Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Luma (0.299, 0.587, 0.114) for three channels; single channel passes through.
Image to_grayscale(const Image& img);

/// Splits a [n, h, w] tensor (or [n, s*s] with square s) into planes.
std::vector<Plane> planes_from_tensor(const Tensor& t);

/// Stacks equally sized planes into a [n, h, w] tensor.
Tensor tensor_from_planes(const std::vector<Plane>& planes, Meta meta = {});

// ---------------------------------------------------------------------------

namespace detail {
void require_positive_dims(int out_w, int out_h);

// Corner-aligned source coordinate for output index i.
inline double source_coord(int i, int in, int out) {
  if (out == 1 || in == 1) return 0.0;
  return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
}
}  // namespace detail

template <typename Derived>
PlaneT<typename Derived::Scalar> resize_bilinear(const Eigen::MatrixBase<Derived>& src,
                                                 int out_w, int out_h) {
  using Scalar = typename Derived::Scalar;
  detail::require_positive_dims(out_w, out_h);
  const int in_h = static_cast<int>(src.rows());
  const int in_w = static_cast<int>(src.cols());
  detail::require_positive_dims(in_w, in_h);
  PlaneT<Scalar> out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    const double y = detail::source_coord(r, in_h, out_h);
    const int y0 = std::min(static_cast<int>(y), in_h - 1);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const Scalar fy = static_cast<Scalar>(y - y0);
    for (int c = 0; c < out_w; ++c) {
      const double x = detail::source_coord(c, in_w, out_w);
      const int x0 = std::min(static_cast<int>(x), in_w - 1);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const Scalar fx = static_cast<Scalar>(x - x0);
      const Scalar top = src(y0, x0) + fx * (src(y0, x1) - src(y0, x0));
      const Scalar bottom = src(y1, x0) + fx * (src(y1, x1) - src(y1, x0));
      out(r, c) = top + fy * (bottom - top);
    }
  }
  return out;
}

}  // namespace neurn
