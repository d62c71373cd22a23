#include "grnn/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "grnn/errors.hpp"

namespace grnn {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s = "0x";
    for (int shift = 28; shift >= 0; shift -= 4) s.push_back(digits[(v >> shift) & 0xF]);
    return s;
}

void require_mnist_shape(const RawImages& images) {
    if (images.rows != kMnistSide || images.cols != kMnistSide) {
        throw DimensionError("expected 28x28 images, got " + std::to_string(images.rows) + "x" +
                             std::to_string(images.cols));
    }
}

std::size_t checked_label(const RawImages& images, std::size_t i) {
    const std::size_t label = images.labels[i];
    if (label >= kMnistClasses) {
        throw FormatError("label " + std::to_string(label) + " at index " + std::to_string(i) +
                          " is outside 0..9");
    }
    return label;
}

std::filesystem::path resolve(const std::filesystem::path& dir, const char* name) {
    std::filesystem::path plain = dir / name;
    if (std::filesystem::exists(plain)) return plain;
    std::filesystem::path gz = dir / (std::string(name) + ".gz");
    if (std::filesystem::exists(gz)) return gz;
    throw IoError("MNIST file not found: " + plain.string() + " (or .gz)");
}

} // namespace

RawImages RawImages::head(std::size_t limit) const {
    RawImages out;
    out.count = std::min(limit, count);
    out.rows = rows;
    out.cols = cols;
    out.pixels.assign(pixels.begin(),
                      pixels.begin() + static_cast<std::ptrdiff_t>(out.count * rows * cols));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(out.count));
    return out;
}

RawImages parse_idx(std::span<const std::uint8_t> image_bytes,
                    std::span<const std::uint8_t> label_bytes) {
    if (image_bytes.size() < 16) throw FormatError("image file shorter than its 16-byte header");
    if (label_bytes.size() < 8) throw FormatError("label file shorter than its 8-byte header");
    const std::uint32_t image_magic = read_be32(image_bytes, 0);
    if (image_magic != kIdxImageMagic) {
        throw FormatError("bad image file magic " + hex32(image_magic));
    }
    const std::uint32_t label_magic = read_be32(label_bytes, 0);
    if (label_magic != kIdxLabelMagic) {
        throw FormatError("bad label file magic " + hex32(label_magic));
    }

    RawImages out;
    out.count = read_be32(image_bytes, 4);
    out.rows = read_be32(image_bytes, 8);
    out.cols = read_be32(image_bytes, 12);
    const std::size_t label_count = read_be32(label_bytes, 4);
    if (label_count != out.count) {
        throw FormatError("image count " + std::to_string(out.count) +
                          " does not match label count " + std::to_string(label_count));
    }
    // Each factor is below 2^32, so the product of two cannot overflow.
    const std::size_t per_image = out.rows * out.cols;
    if (per_image != 0 && out.count > (image_bytes.size() - 16) / per_image) {
        throw FormatError("image file truncated: header promises " + std::to_string(out.count) +
                          " images of " + std::to_string(per_image) + " bytes");
    }
    const std::size_t pixel_bytes = out.count * per_image;
    if (image_bytes.size() != 16 + pixel_bytes) {
        throw FormatError("image file holds " + std::to_string(image_bytes.size() - 16) +
                          " pixel bytes, header promises " + std::to_string(pixel_bytes));
    }
    if (label_bytes.size() != 8 + label_count) {
        throw FormatError("label file holds " + std::to_string(label_bytes.size() - 8) +
                          " labels, header promises " + std::to_string(label_count));
    }
    out.pixels.assign(image_bytes.begin() + 16, image_bytes.end());
    out.labels.assign(label_bytes.begin() + 8, label_bytes.end());
    return out;
}

std::vector<std::uint8_t> serialize_idx_images(const RawImages& images) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + images.pixels.size());
    append_be32(out, kIdxImageMagic);
    append_be32(out, static_cast<std::uint32_t>(images.count));
    append_be32(out, static_cast<std::uint32_t>(images.rows));
    append_be32(out, static_cast<std::uint32_t>(images.cols));
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const RawImages& images) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + images.labels.size());
    append_be32(out, kIdxLabelMagic);
    append_be32(out, static_cast<std::uint32_t>(images.count));
    out.insert(out.end(), images.labels.begin(), images.labels.end());
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    if (path.extension() == ".gz") {
        gzFile file = gzopen(path.string().c_str(), "rb");
        if (file == nullptr) throw IoError("cannot open " + path.string());
        std::vector<std::uint8_t> out;
        std::uint8_t buffer[1 << 16];
        int got = 0;
        while ((got = gzread(file, buffer, sizeof buffer)) > 0) {
            out.insert(out.end(), buffer, buffer + got);
        }
        const bool failed = got < 0;
        gzclose(file);
        if (failed) throw FormatError("corrupt gzip stream in " + path.string());
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RawImages load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto image_bytes = read_file_bytes(images);
    const auto label_bytes = read_file_bytes(labels);
    return parse_idx(image_bytes, label_bytes);
}

MnistSplit load_mnist_dir(const std::filesystem::path& dir) {
    return {
        load_mnist_idx(resolve(dir, "train-images-idx3-ubyte"),
                       resolve(dir, "train-labels-idx1-ubyte")),
        load_mnist_idx(resolve(dir, "t10k-images-idx3-ubyte"),
                       resolve(dir, "t10k-labels-idx1-ubyte")),
    };
}

SequenceDataset to_row_sequences(const RawImages& images) {
    require_mnist_shape(images);
    SequenceDataset out{{}, kMnistSide, kMnistSide, kMnistClasses};
    out.examples.reserve(images.count);
    for (std::size_t i = 0; i < images.count; ++i) {
        LabeledSequence seq{Matrix(kMnistSide, kMnistSide), checked_label(images, i), i};
        for (std::size_t r = 0; r < kMnistSide; ++r) {
            for (std::size_t c = 0; c < kMnistSide; ++c) seq.xs(r, c) = images.pixel(i, r, c);
        }
        out.examples.push_back(std::move(seq));
    }
    return out;
}

SequenceDataset to_pixel_sequences(const RawImages& images) {
    require_mnist_shape(images);
    constexpr std::size_t kLength = kMnistSide * kMnistSide;
    SequenceDataset out{{}, kLength, 1, kMnistClasses};
    out.examples.reserve(images.count);
    for (std::size_t i = 0; i < images.count; ++i) {
        LabeledSequence seq{Matrix(kLength, 1), checked_label(images, i), i};
        for (std::size_t t = 0; t < kLength; ++t) {
            seq.xs(t, 0) = images.pixel(i, t / kMnistSide, t % kMnistSide);
        }
        out.examples.push_back(std::move(seq));
    }
    return out;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size,
                                                 SeededRng& rng, bool shuffle) {
    if (batch_size == 0) throw InputError("batch size must be at least 1");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) {
        for (std::size_t i = count; i > 1; --i) {
            const std::size_t j = rng.uniform_index(i);
            std::swap(order[i - 1], order[j]);
        }
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t stop = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

SequenceDataset synthetic_dataset(SeededRng& rng, std::size_t length, std::size_t input_size,
                                  std::size_t classes, std::size_t count, Real noise) {
    if (length == 0 || input_size == 0 || classes == 0 || count == 0) {
        throw InputError("synthetic dataset sizes must all be at least 1");
    }
    std::vector<Matrix> patterns;
    patterns.reserve(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        Matrix p(length, input_size);
        for (Real& v : p.span()) v = rng.uniform01();
        patterns.push_back(std::move(p));
    }
    SequenceDataset out{{}, length, input_size, classes};
    out.examples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t label = i % classes;
        LabeledSequence seq{patterns[label], label, i};
        if (noise > 0.0) {
            for (Real& v : seq.xs.span()) v += noise * rng.normal();
        }
        out.examples.push_back(std::move(seq));
    }
    return out;
}

} // namespace grnn
