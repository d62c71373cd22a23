#pragma once

// MNIST ingestion from IDX files and the two sequence views of an image:
// 28 rows of 28 pixels, or 784 single pixels, both in row-major order.
//
// IDX layout (all integers big-endian u32):
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols bytes
//   labels: magic 0x00000801, count, then count bytes

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "grnn/numkernel.hpp"

namespace grnn {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct RawImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels; // count * rows * cols, row-major per image
    std::vector<std::uint8_t> labels;

    std::uint8_t byte(std::size_t image, std::size_t r, std::size_t c) const {
        return pixels[(image * rows + r) * cols + c];
    }
    // Pixel scaled to [0, 1].
    Real pixel(std::size_t image, std::size_t r, std::size_t c) const {
        return static_cast<Real>(byte(image, r, c)) / 255.0;
    }
    // First `limit` images (all of them if limit >= count).
    RawImages head(std::size_t limit) const;
};

RawImages parse_idx(std::span<const std::uint8_t> image_bytes,
                    std::span<const std::uint8_t> label_bytes);
std::vector<std::uint8_t> serialize_idx_images(const RawImages& images);
std::vector<std::uint8_t> serialize_idx_labels(const RawImages& images);

// Whole file contents; files ending in .gz are inflated.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

RawImages load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

struct MnistSplit {
    RawImages train;
    RawImages test;
};

// Looks for train-images-idx3-ubyte etc. in `dir`, falling back to the same
// names with a .gz suffix.
MnistSplit load_mnist_dir(const std::filesystem::path& dir);

struct LabeledSequence {
    Matrix xs; // T x m, row t is the input at timestep t
    std::size_t label = 0;
    std::size_t source_id = 0;
};

struct SequenceDataset {
    std::vector<LabeledSequence> examples;
    std::size_t length = 0; // T
    std::size_t input_size = 0; // m
    std::size_t classes = 0; // k

    std::size_t size() const noexcept { return examples.size(); }
    bool empty() const noexcept { return examples.empty(); }
};

inline constexpr std::size_t kMnistSide = 28;
inline constexpr std::size_t kMnistClasses = 10;

// T = 28, m = 28: timestep t is image row t.
SequenceDataset to_row_sequences(const RawImages& images);
// T = 784, m = 1: timestep t is pixel (t / 28, t % 28).
SequenceDataset to_pixel_sequences(const RawImages& images);

// One epoch of mini-batches: a permutation (identity when shuffle is false)
// cut into consecutive chunks, the last of which may be short.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size,
                                                 SeededRng& rng, bool shuffle);

// Class j's sequences are a fixed per-class pattern plus Gaussian noise of the
// given standard deviation. Labels cycle 0, 1, ..., k-1.
SequenceDataset synthetic_dataset(SeededRng& rng, std::size_t length, std::size_t input_size,
                                  std::size_t classes, std::size_t count, Real noise = 0.1);

} // namespace grnn
