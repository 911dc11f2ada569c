#include "pbwn/mnist.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace pbwn::harness {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;  // 2051
constexpr std::uint32_t kLabelMagic = 0x00000801;  // 2049

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path,
                          std::size_t offset) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(path + ": truncated at offset " + std::to_string(offset) +
                      " while reading a 32-bit field");
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>(v & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx_pair(const std::string& image_path, const std::string& label_path) {
  std::ifstream img(image_path, std::ios::binary);
  if (!img) throw FormatError(image_path + ": cannot open");
  const std::uint32_t img_magic = read_u32_be(img, image_path, 0);
  if (img_magic != kImageMagic) {
    throw FormatError(image_path + ": bad magic " + std::to_string(img_magic) +
                      " at offset 0, expected " + std::to_string(kImageMagic));
  }
  const std::uint32_t count = read_u32_be(img, image_path, 4);
  const std::uint32_t rows = read_u32_be(img, image_path, 8);
  const std::uint32_t cols = read_u32_be(img, image_path, 12);
  if (count == 0 || rows == 0 || cols == 0) {
    throw FormatError(image_path + ": zero count or image dimensions in header");
  }

  std::ifstream lab(label_path, std::ios::binary);
  if (!lab) throw FormatError(label_path + ": cannot open");
  const std::uint32_t lab_magic = read_u32_be(lab, label_path, 0);
  if (lab_magic != kLabelMagic) {
    throw FormatError(label_path + ": bad magic " + std::to_string(lab_magic) +
                      " at offset 0, expected " + std::to_string(kLabelMagic));
  }
  const std::uint32_t lab_count = read_u32_be(lab, label_path, 4);
  if (lab_count != count) {
    throw FormatError(label_path + ": holds " + std::to_string(lab_count) +
                      " labels but " + image_path + " holds " +
                      std::to_string(count) + " images");
  }

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(count) * dim);
  if (!img.read(reinterpret_cast<char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size()))) {
    throw FormatError(image_path + ": truncated pixel payload at offset " +
                      std::to_string(16 + img.gcount()));
  }
  std::vector<std::uint8_t> raw_labels(count);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(raw_labels.size()))) {
    throw FormatError(label_path + ": truncated label payload at offset " +
                      std::to_string(8 + lab.gcount()));
  }

  Dataset out;
  out.images = Matrix(count, dim);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    out.images.data()[i] = static_cast<double>(pixels[i]) / 255.0;
  }
  out.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    out.labels[i] = static_cast<int>(raw_labels[i]);
  }
  return out;
}

MnistData load_mnist_idx(const std::string& data_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(data_dir);
  MnistData data;
  data.train = load_idx_pair((dir / "train-images-idx3-ubyte").string(),
                             (dir / "train-labels-idx1-ubyte").string());
  data.test = load_idx_pair((dir / "t10k-images-idx3-ubyte").string(),
                            (dir / "t10k-labels-idx1-ubyte").string());
  return data;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
    throw DimensionError("write_idx_images: pixel buffer size " +
                         std::to_string(pixels.size()) + " does not match " +
                         std::to_string(count) + " images of " + std::to_string(rows) +
                         "x" + std::to_string(cols));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  write_u32_be(out, kImageMagic);
  write_u32_be(out, count);
  write_u32_be(out, rows);
  write_u32_be(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  write_u32_be(out, kLabelMagic);
  write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

namespace {

constexpr std::uint32_t kSide = 28;

// Renders one sample of the given class as a sparse high-contrast glyph:
// class-specific stroke bumps plus distractor bumps shared with neighboring
// classes, under positional jitter, per-sample bump dropout, brightness
// variation, and speckle noise. Most of the canvas stays at exactly zero,
// keeping input statistics (and so gradient scales) close to handwritten
// digit data.
void render_sample(int label, SeededRng& rng, std::uint8_t* out) {
  SeededRng layout(0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(label));
  double cx[5], cy[5], amp[5];
  for (int b = 0; b < 3; ++b) {
    cx[b] = 6.0 + 16.0 * layout.next_uniform();
    cy[b] = 6.0 + 16.0 * layout.next_uniform();
    amp[b] = 0.7 + 0.3 * layout.next_uniform();
  }
  SeededRng pair_shared(0x2545f4914f6cdd1dULL + static_cast<std::uint64_t>(label / 2));
  cx[3] = 6.0 + 16.0 * pair_shared.next_uniform();
  cy[3] = 6.0 + 16.0 * pair_shared.next_uniform();
  amp[3] = 0.8;
  SeededRng trio_shared(0x94d049bb133111ebULL + static_cast<std::uint64_t>(label % 3));
  cx[4] = 6.0 + 16.0 * trio_shared.next_uniform();
  cy[4] = 6.0 + 16.0 * trio_shared.next_uniform();
  amp[4] = 0.7;

  // One bump is mostly suppressed per sample, widening each class manifold.
  const int dropped = static_cast<int>(rng.next_below(5));
  amp[dropped] *= 0.15;

  const double dx = rng.next_uniform(-2.5, 2.5);
  const double dy = rng.next_uniform(-2.5, 2.5);
  const double brightness = rng.next_uniform(0.6, 1.0);
  const double sigma_sq = 2.0 * 2.4 * 2.4;

  for (std::uint32_t y = 0; y < kSide; ++y) {
    for (std::uint32_t x = 0; x < kSide; ++x) {
      double v = 0.0;
      for (int b = 0; b < 5; ++b) {
        const double ddx = static_cast<double>(x) - (cx[b] + dx);
        const double ddy = static_cast<double>(y) - (cy[b] + dy);
        v += amp[b] * std::exp(-(ddx * ddx + ddy * ddy) / sigma_sq);
      }
      // Threshold to zero so the background is exactly empty, then speckle.
      v = (v - 0.12) * brightness * 1.3;
      if (rng.next_uniform() < 0.015) v += rng.next_uniform(0.3, 0.9);
      const double clamped = std::clamp(v, 0.0, 1.0);
      out[y * kSide + x] = static_cast<std::uint8_t>(std::lround(clamped * 255.0));
    }
  }
}

void write_split(const std::string& img_path, const std::string& lab_path,
                 std::size_t count, SeededRng& rng) {
  std::vector<std::uint8_t> pixels(count * kSide * kSide);
  std::vector<std::uint8_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    int label = static_cast<int>(rng.next_below(10));
    render_sample(label, rng, pixels.data() + i * kSide * kSide);
    // 4% label noise: an irreducible loss floor punishes overconfident
    // weight growth the way real data does.
    if (rng.next_uniform() < 0.04) label = static_cast<int>(rng.next_below(10));
    labels[i] = static_cast<std::uint8_t>(label);
  }
  write_idx_images(img_path, pixels, static_cast<std::uint32_t>(count), kSide, kSide);
  write_idx_labels(lab_path, labels);
}

}  // namespace

void generate_synthetic_idx(const std::string& dir, std::size_t train_count,
                            std::size_t test_count, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  SeededRng rng(seed);
  write_split((base / "train-images-idx3-ubyte").string(),
              (base / "train-labels-idx1-ubyte").string(), train_count, rng);
  write_split((base / "t10k-images-idx3-ubyte").string(),
              (base / "t10k-labels-idx1-ubyte").string(), test_count, rng);
}

bool idx_files_present(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  return fs::exists(base / "train-images-idx3-ubyte") &&
         fs::exists(base / "train-labels-idx1-ubyte") &&
         fs::exists(base / "t10k-images-idx3-ubyte") &&
         fs::exists(base / "t10k-labels-idx1-ubyte");
}

}  // namespace pbwn::harness
