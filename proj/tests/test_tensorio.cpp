#include "neurn/error.hpp"
#include "neurn/tensorio.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <bit>
#include <fstream>

using namespace neurn;
using testing_support::random_plane;

namespace {

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[std::size_t(i)] = char((v >> (8 * i)) & 0xff);
  return s;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("ntf layout is magic, LE header length, JSON header, LE payload") {
  Tensor t({2}, {1.0, -2.5}, {{"k", "v"}});
  const std::string bytes = encode_ntf(t);
  CHECK(bytes.substr(0, 4) == "NTF1");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::uint32_t(static_cast<unsigned char>(bytes[4 + std::size_t(i)])) << (8 * i);
  const auto header = nlohmann::json::parse(bytes.substr(8, len));
  CHECK(header["dtype"] == "f64");
  CHECK(header["shape"] == nlohmann::json::array({2}));
  CHECK(header["meta"]["k"] == "v");
  REQUIRE(bytes.size() == 8 + len + 16);
  auto read_le64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes[at + std::size_t(i)])) << (8 * i);
    return std::bit_cast<double>(v);
  };
  CHECK(read_le64(8 + len) == 1.0);
  CHECK(read_le64(8 + len + 8) == -2.5);
}

TEST_CASE("ntf round trip is bit exact for f64 and widened for f32") {
  Rng rng(7);
  std::vector<double> data(60);
  for (auto& v : data) v = rng.normal() * 1e3;
  Tensor t({3, 4, 5}, data, {{"name", "x"}});
  CHECK(decode_ntf(encode_ntf(t)) == t);

  const Tensor f = decode_ntf(encode_ntf(t, Dtype::f32));
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(f.data[i] == double(float(data[i])));
}

TEST_CASE("ntf decode reports the byte offset of corruption") {
  Tensor t({2, 2}, {0, 1, 2, 3});
  std::string bytes = encode_ntf(t);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_ntf(bad, "f.ntf"), doctest::Contains("byte 0"), DataError);

  CHECK_THROWS_AS(decode_ntf(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(decode_ntf(bytes.substr(0, 6)), DataError);

  const std::string header = R"({"dtype":"f64","shape":[1],"meta":{}})";
  const std::string payload("\0\0\0\0\0\0\xf8\x7f", 8);  // quiet NaN, little-endian
  CHECK_THROWS_AS(decode_ntf("NTF1" + le32(std::uint32_t(header.size())) + header + payload), DataError);

  const std::string wrong = R"({"dtype":"i8","shape":[1],"meta":{}})";
  CHECK_THROWS_AS(decode_ntf("NTF1" + le32(std::uint32_t(wrong.size())) + wrong + "x"), DataError);
}

TEST_CASE("ntf with a zero-length dimension") {
  Tensor t({0, 3}, {});
  CHECK(decode_ntf(encode_ntf(t)).shape == std::vector<std::size_t>{0, 3});
}

TEST_CASE("idx images and labels round trip") {
  const auto dir = testing_support::scratch_dir("idx");
  std::vector<double> pixels;
  for (int i = 0; i < 2 * 3 * 4; ++i) pixels.push_back(double(i * 10 % 256) / 255.0);
  save_idx(Tensor({2, 3, 4}, pixels), dir / "img.idx");
  save_idx(Tensor({2}, {3, 9}), dir / "lbl.idx");

  const Tensor img = load_idx(dir / "img.idx");
  CHECK(img.shape == std::vector<std::size_t>{2, 3, 4});
  for (std::size_t i = 0; i < pixels.size(); ++i) CHECK(img.data[i] == doctest::Approx(pixels[i]).epsilon(1e-15));
  CHECK(load_idx(dir / "lbl.idx").data == std::vector<double>{3, 9});
  CHECK_FALSE(is_ntf_file(dir / "img.idx"));

  // big-endian magic 0x00000803 then count 2, rows 3, cols 4
  std::ifstream in(dir / "img.idx", std::ios::binary);
  std::string head(16, '\0');
  in.read(head.data(), 16);
  CHECK(head.substr(0, 8) == std::string("\0\0\x08\x03\0\0\0\x02", 8));
}

TEST_CASE("idx count mismatch and unknown magic are data errors") {
  const auto dir = testing_support::scratch_dir("idx_bad");
  write_bytes(dir / "short.idx", std::string("\0\0\x08\x01\0\0\0\x05\x01\x02", 10));
  CHECK_THROWS_AS(load_idx(dir / "short.idx"), DataError);
  write_bytes(dir / "magic.idx", std::string("\0\0\x09\x01\0\0\0\x00", 8));
  CHECK_THROWS_AS(load_idx(dir / "magic.idx"), DataError);
  CHECK_THROWS_AS(load_idx(dir / "missing.idx"), DataError);
}

TEST_CASE("bilinear resize matches the tent-filter oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + int(rng.below(9)), w = 1 + int(rng.below(9));
    const int oh = 1 + int(rng.below(12)), ow = 1 + int(rng.below(12));
    const Plane p = random_plane(rng, h, w);
    const Plane r = resize_bilinear(p, ow, oh);
    CHECK(testing_support::max_abs_diff(r, oracle::bilinear(testing_support::to_grid(p), ow, oh)) < 1e-12);
  }
}

TEST_CASE("bilinear resize properties") {
  Rng rng(3);
  const Plane p = random_plane(rng, 6, 5);
  CHECK(resize_bilinear(p, 5, 6) == p);
  const Plane big = resize_bilinear(p, 13, 17);
  CHECK(big(0, 0) == p(0, 0));
  CHECK(big(16, 12) == p(5, 4));
  CHECK(big.minCoeff() >= p.minCoeff() - 1e-15);
  CHECK(big.maxCoeff() <= p.maxCoeff() + 1e-15);
  const Plane c = Plane::Constant(4, 4, 0.3);
  CHECK((resize_bilinear(c, 9, 7).array() - 0.3).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(resize_bilinear(p, 0, 3), UsageError);

  const PlaneT<float> pf = p.cast<float>();
  CHECK(resize_bilinear(pf, 10, 12).rows() == 12);
}

TEST_CASE("image construction rejects non-finite and mismatched planes") {
  Plane bad = Plane::Zero(2, 2);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Image{bad}, UsageError);
  CHECK_THROWS_AS((Image{std::vector<Plane>{Plane::Zero(2, 2), Plane::Zero(3, 2)}}), UsageError);
  CHECK_THROWS_AS(Image(0, 2, 1), UsageError);
  const Image img(4, 3, 2, 0.5);
  CHECK(img.width() == 4);
  CHECK(img.height() == 3);
  CHECK(img.flatten().size() == 24);
}

TEST_CASE("grayscale weights and planes/tensor helpers") {
  const Image rgb(std::vector<Plane>{Plane::Constant(2, 2, 1.0), Plane::Zero(2, 2), Plane::Zero(2, 2)});
  CHECK(to_grayscale(rgb).channel(0)(0, 0) == doctest::Approx(0.299));
  CHECK_THROWS_AS(to_grayscale(Image(2, 2, 2)), UsageError);

  const Tensor flat({2, 9}, std::vector<double>(18, 0.25));
  const auto planes = planes_from_tensor(flat);
  REQUIRE(planes.size() == 2);
  CHECK(planes[0].rows() == 3);
  CHECK(tensor_from_planes(planes).shape == std::vector<std::size_t>{2, 3, 3});
  CHECK_THROWS_AS(planes_from_tensor(Tensor({2, 8}, std::vector<double>(16))), DataError);
}

TEST_CASE("ntf file size for a small tensor and an empty one") {
  const auto dir = testing_support::scratch_dir("ntf_size");
  save_ntf(Tensor({2, 2}, {1, 2, 3, 4}), dir / "a.ntf");
  const std::string bytes = encode_ntf(Tensor({2, 2}, {1, 2, 3, 4}));
  CHECK(std::filesystem::file_size(dir / "a.ntf") == bytes.size());
  CHECK(load_ntf(dir / "a.ntf").data == std::vector<double>{1, 2, 3, 4});
  CHECK(is_ntf_file(dir / "a.ntf"));
  const Tensor empty = decode_ntf(encode_ntf(Tensor({0}, {})));
  CHECK(empty.numel() == 0);
}

TEST_CASE("grayscale of a single channel is the identity") {
  Rng rng(4);
  const Image one(random_plane(rng, 3, 4));
  CHECK(to_grayscale(one) == one);
  const Image white(2, 2, 3, 1.0);
  CHECK(to_grayscale(white).channel(0)(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
}
