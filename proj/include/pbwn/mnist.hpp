#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pbwn/matrix.hpp"

// IDX-format dataset I/O. The layout is the public one used by the MNIST
// distribution, bit for bit: a 32-bit big-endian magic (0x00000803 for image
// files, 0x00000801 for label files), big-endian 32-bit dimensions, then raw
// bytes. Malformed files raise FormatError naming the file and byte offset.

namespace pbwn::harness {

/// Images as rows scaled to [0, 1] (byte / 255), labels as ints in [0, 9].
struct Dataset {
  Matrix images;
  std::vector<int> labels;
};

struct MnistData {
  Dataset train;
  Dataset test;
};

/// Loads one images/labels file pair; the two counts must agree.
Dataset load_idx_pair(const std::string& image_path, const std::string& label_path);

/// Loads the four standard files (train-images-idx3-ubyte and friends)
/// from data_dir.
MnistData load_mnist_idx(const std::string& data_dir);

/// Writers for the same layout, used by the synthetic generator and tests.
void write_idx_images(const std::string& path,
                      const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

/// Writes a deterministic 10-class 28x28 dataset in the standard four-file
/// layout under dir: every class renders a fixed arrangement of intensity
/// bumps, jittered per sample in position, brightness, and pixel noise.
/// Stands in for the real digits when no downloaded copy is available; the
/// task is hard enough that optimizer differences stay visible.
void generate_synthetic_idx(const std::string& dir, std::size_t train_count,
                            std::size_t test_count, std::uint64_t seed);

/// True when the four standard files exist under dir.
bool idx_files_present(const std::string& dir);

}  // namespace pbwn::harness
