#pragma once
// Image corpora: synthetic sets with known spectra, image-directory ingestion,
// and seeded batching.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fregan/image_io.hpp"
#include "fregan/tensor.hpp"

namespace fregan::data {

enum class DatasetKind { sinusoid_mix, checkerboard, gradient_blobs, directory };

DatasetKind parse_kind(const std::string& name);
std::string kind_name(DatasetKind kind);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::sinusoid_mix;
    int n = 16;
    int size = 64;
    std::uint64_t seed = 0;
    std::filesystem::path path;  // directory kind only

    // sinusoid-mix: one horizontal cosine of this frequency per image.
    std::optional<int> fixed_frequency;
    // checkerboard: fixed tile and amplitudes instead of random draws.
    std::optional<int> tile;
    std::optional<float> amplitude_a;
    std::optional<float> amplitude_b;
};

// Throws std::invalid_argument on size ∉ {32,64,128}, n < 1, bad options.
void validate(const DatasetSpec& spec);

// n RGB images of size×size, values in [-1,1], stored planar (C, H, W).
class ImageSet {
public:
    ImageSet() = default;
    explicit ImageSet(int size) : size_(size) {}

    int size() const { return size_; }
    std::size_t count() const { return images_.size(); }
    const std::vector<float>& image(std::size_t i) const { return images_.at(i); }
    void push_back(std::vector<float> planar);

    // N×3×size×size in the given order.
    Tensor stack(const std::vector<std::size_t>& indices) const;
    Tensor all() const;

private:
    int size_ = 0;
    std::vector<std::vector<float>> images_;
};

ImageSet synth_dataset(const DatasetSpec& spec);

// PNG / PPM files sorted by filename, area-resized to size×size.
ImageSet load_image_dir(const std::filesystem::path& dir, int size);

// Builds the set described by spec (synthetic or directory).
ImageSet make_dataset(const DatasetSpec& spec);

// Box-filter resample of one interleaved 8-bit image to size×size, planar [-1,1].
std::vector<float> area_resize(const io::Image8& image, int size);

// Seeded shuffled epochs, batches wrap across epoch boundaries.
class BatchIterator {
public:
    BatchIterator(const ImageSet& set, int batch, std::uint64_t seed);

    Tensor next();
    // Advances past `batches` batches without materializing them.
    void skip(std::uint64_t batches);
    std::uint64_t position() const { return cursor_; }
    // Image indices of the next batch, without advancing.
    std::vector<std::size_t> peek_indices() const;

private:
    std::size_t index_at(std::uint64_t flat) const;

    const ImageSet* set_;
    int batch_;
    std::uint64_t seed_;
    std::uint64_t cursor_ = 0;  // flat position in the concatenated epoch sequence
    mutable std::uint64_t cached_epoch_ = ~std::uint64_t{0};
    mutable std::vector<std::size_t> perm_;
};

// Planar [-1,1] image → interleaved 8-bit RGB.
io::Image8 to_image8(const float* planar, int channels, int size);
void write_image(const std::filesystem::path& path, const float* planar, int channels, int size);

}  // namespace fregan::data
