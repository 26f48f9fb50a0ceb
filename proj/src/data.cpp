#include "fregan/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fregan/rng.hpp"

namespace fregan::data {

namespace {

constexpr std::uint64_t kImageStream = 0x1001;
constexpr std::uint64_t kShuffleStream = 0x1002;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t plane_of(int size) { return static_cast<std::size_t>(size) * size; }

std::vector<float> sinusoid_image(const DatasetSpec& spec, Rng& rng) {
    const int s = spec.size;
    std::vector<float> out(3 * plane_of(s));
    if (spec.fixed_frequency) {
        const double k = *spec.fixed_frequency;
        const double phase = rng.uniform(0.0, kTwoPi);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const float v = static_cast<float>(std::cos(kTwoPi * k * x / s + phase));
                for (int c = 0; c < 3; ++c) out[c * plane_of(s) + y * s + x] = v;
            }
        return out;
    }
    constexpr int kComponents = 2;
    struct Wave {
        double k, cos_t, sin_t, phase;
        double gain[3];
    } waves[kComponents];
    for (auto& w : waves) {
        w.k = rng.uniform_int(1, s / 4);
        const double theta = rng.uniform(0.0, std::numbers::pi);
        w.cos_t = std::cos(theta);
        w.sin_t = std::sin(theta);
        w.phase = rng.uniform(0.0, kTwoPi);
        for (double& g : w.gain) g = rng.uniform(0.5, 1.0);
    }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                double v = 0.0;
                for (const auto& w : waves) {
                    v += w.gain[c] * std::cos(kTwoPi * w.k * (x * w.cos_t + y * w.sin_t) / s + w.phase);
                }
                out[c * plane_of(s) + y * s + x] = static_cast<float>(v / kComponents);
            }
    return out;
}

std::vector<float> checkerboard_image(const DatasetSpec& spec, Rng& rng) {
    static constexpr int kTiles[] = {2, 4, 8};
    const int s = spec.size;
    const int tile = spec.tile ? *spec.tile : kTiles[rng.uniform_int(0, 2)];
    const float a = spec.amplitude_a ? *spec.amplitude_a : static_cast<float>(rng.uniform(0.2, 1.0));
    const float b = spec.amplitude_b ? *spec.amplitude_b : static_cast<float>(-rng.uniform(0.2, 1.0));
    // tile is the pattern period: squares of side tile/2
    const int side = tile / 2;
    std::vector<float> out(3 * plane_of(s));
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const float v = ((y / side + x / side) % 2 == 0) ? a : b;
            for (int c = 0; c < 3; ++c) out[c * plane_of(s) + y * s + x] = v;
        }
    return out;
}

std::vector<float> blobs_image(const DatasetSpec& spec, Rng& rng) {
    const int s = spec.size;
    const double half = s / 2.0;
    const double theta = rng.uniform(0.0, kTwoPi);
    const double slope = rng.uniform(0.2, 0.6);
    double offset[3];
    for (double& o : offset) o = rng.uniform(-0.3, 0.3);
    std::vector<float> out(3 * plane_of(s));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const double t = ((x - half) * std::cos(theta) + (y - half) * std::sin(theta)) / half;
                out[c * plane_of(s) + y * s + x] = static_cast<float>(std::clamp(offset[c] + slope * t, -1.0, 1.0));
            }
    const int discs = rng.uniform_int(1, 4);
    for (int d = 0; d < discs; ++d) {
        const double cx = rng.uniform(0.0, s), cy = rng.uniform(0.0, s);
        const double r = rng.uniform(s / 16.0, s / 4.0);
        float color[3];
        for (float& v : color) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                if (dx * dx + dy * dy > r * r) continue;
                for (int c = 0; c < 3; ++c) out[c * plane_of(s) + y * s + x] = color[c];
            }
    }
    return out;
}

// Weights of source pixels covering output pixel o along one axis.
struct Span {
    int first;
    std::vector<double> weights;
};

std::vector<Span> area_weights(int src, int dst) {
    std::vector<Span> spans(dst);
    const double ratio = static_cast<double>(src) / dst;
    for (int o = 0; o < dst; ++o) {
        const double lo = o * ratio, hi = (o + 1) * ratio;
        Span sp;
        sp.first = static_cast<int>(std::floor(lo));
        const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
        for (int i = sp.first; i <= last; ++i) {
            const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            sp.weights.push_back(w / ratio);
        }
        spans[o] = std::move(sp);
    }
    return spans;
}

}  // namespace

DatasetKind parse_kind(const std::string& name) {
    if (name == "sinusoid-mix") return DatasetKind::sinusoid_mix;
    if (name == "checkerboard") return DatasetKind::checkerboard;
    if (name == "gradient-blobs") return DatasetKind::gradient_blobs;
    if (name == "directory") return DatasetKind::directory;
    throw std::invalid_argument("unknown dataset kind '" + name +
                                "' (expected sinusoid-mix, checkerboard, gradient-blobs, directory)");
}

std::string kind_name(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::sinusoid_mix: return "sinusoid-mix";
        case DatasetKind::checkerboard: return "checkerboard";
        case DatasetKind::gradient_blobs: return "gradient-blobs";
        case DatasetKind::directory: return "directory";
    }
    return "?";
}

void validate(const DatasetSpec& spec) {
    if (spec.size != 32 && spec.size != 64 && spec.size != 128) {
        throw std::invalid_argument("dataset size must be 32, 64 or 128 (got " + std::to_string(spec.size) + ")");
    }
    if (spec.kind != DatasetKind::directory && spec.n < 1) {
        throw std::invalid_argument("dataset n must be >= 1 (got " + std::to_string(spec.n) + ")");
    }
    if (spec.kind == DatasetKind::directory && spec.path.empty()) {
        throw std::invalid_argument("directory dataset needs a path");
    }
    if (spec.fixed_frequency && (*spec.fixed_frequency < 0 || *spec.fixed_frequency > spec.size / 2)) {
        throw std::invalid_argument("sinusoid frequency must lie in [0, size/2]");
    }
    if (spec.tile && (*spec.tile < 2 || *spec.tile % 2 != 0 || spec.size % *spec.tile != 0)) {
        throw std::invalid_argument("checkerboard tile must be even and divide the image size");
    }
    for (const auto& amp : {spec.amplitude_a, spec.amplitude_b}) {
        if (amp && (*amp < -1.0f || *amp > 1.0f)) throw std::invalid_argument("checkerboard amplitudes must lie in [-1,1]");
    }
}

void ImageSet::push_back(std::vector<float> planar) {
    if (planar.size() != 3 * plane_of(size_)) {
        throw std::invalid_argument("ImageSet: image has " + std::to_string(planar.size()) + " values, expected " +
                                    std::to_string(3 * plane_of(size_)));
    }
    images_.push_back(std::move(planar));
}

Tensor ImageSet::stack(const std::vector<std::size_t>& indices) const {
    const std::size_t each = 3 * plane_of(size_);
    std::vector<float> buf;
    buf.reserve(each * indices.size());
    for (std::size_t i : indices) {
        const auto& img = images_.at(i);
        buf.insert(buf.end(), img.begin(), img.end());
    }
    return Tensor::from_data({static_cast<int>(indices.size()), 3, size_, size_}, std::move(buf));
}

Tensor ImageSet::all() const {
    std::vector<std::size_t> idx(count());
    std::iota(idx.begin(), idx.end(), 0);
    return stack(idx);
}

ImageSet synth_dataset(const DatasetSpec& spec) {
    validate(spec);
    ImageSet set(spec.size);
    for (int i = 0; i < spec.n; ++i) {
        Rng rng(derive_seed(spec.seed, kImageStream, static_cast<std::uint64_t>(i)));
        switch (spec.kind) {
            case DatasetKind::sinusoid_mix: set.push_back(sinusoid_image(spec, rng)); break;
            case DatasetKind::checkerboard: set.push_back(checkerboard_image(spec, rng)); break;
            case DatasetKind::gradient_blobs: set.push_back(blobs_image(spec, rng)); break;
            case DatasetKind::directory: throw std::invalid_argument("synth_dataset: directory kind is not synthetic");
        }
    }
    return set;
}

std::vector<float> area_resize(const io::Image8& image, int size) {
    if (image.channels != 3) throw std::invalid_argument("area_resize: expected RGB input");
    const auto wy = area_weights(image.height, size);
    const auto wx = area_weights(image.width, size);
    std::vector<float> out(3 * plane_of(size));
    for (int c = 0; c < 3; ++c)
        for (int oy = 0; oy < size; ++oy)
            for (int ox = 0; ox < size; ++ox) {
                double acc = 0.0;
                const auto& sy = wy[oy];
                const auto& sx = wx[ox];
                for (std::size_t a = 0; a < sy.weights.size(); ++a)
                    for (std::size_t b = 0; b < sx.weights.size(); ++b) {
                        const std::size_t px = (static_cast<std::size_t>(sy.first + a) * image.width + sx.first + b) * 3 + c;
                        acc += sy.weights[a] * sx.weights[b] * image.pixels[px];
                    }
                out[c * plane_of(size) + oy * size + ox] = static_cast<float>(acc / 127.5 - 1.0);
            }
    return out;
}

ImageSet load_image_dir(const std::filesystem::path& dir, int size) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw io::ImageError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
    }
    if (files.empty()) throw io::ImageError("no PNG/PPM images in " + dir.string());
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
    ImageSet set(size);
    for (const auto& f : files) set.push_back(area_resize(io::read_image(f), size));
    return set;
}

ImageSet make_dataset(const DatasetSpec& spec) {
    validate(spec);
    if (spec.kind == DatasetKind::directory) return load_image_dir(spec.path, spec.size);
    return synth_dataset(spec);
}

BatchIterator::BatchIterator(const ImageSet& set, int batch, std::uint64_t seed)
    : set_(&set), batch_(batch), seed_(seed) {
    if (batch < 1) throw std::invalid_argument("batch size must be >= 1");
    if (static_cast<std::size_t>(batch) > set.count()) {
        throw std::invalid_argument("batch size " + std::to_string(batch) + " exceeds dataset size " +
                                    std::to_string(set.count()));
    }
}

std::size_t BatchIterator::index_at(std::uint64_t flat) const {
    const std::uint64_t n = set_->count();
    const std::uint64_t epoch = flat / n;
    if (epoch != cached_epoch_) {
        perm_.resize(n);
        std::iota(perm_.begin(), perm_.end(), 0);
        Rng rng(derive_seed(seed_, kShuffleStream, epoch));
        for (std::size_t i = n - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)));
            std::swap(perm_[i], perm_[j]);
        }
        cached_epoch_ = epoch;
    }
    return perm_[flat % n];
}

std::vector<std::size_t> BatchIterator::peek_indices() const {
    std::vector<std::size_t> idx(batch_);
    for (int i = 0; i < batch_; ++i) idx[i] = index_at(cursor_ + i);
    return idx;
}

Tensor BatchIterator::next() {
    auto idx = peek_indices();
    cursor_ += batch_;
    return set_->stack(idx);
}

void BatchIterator::skip(std::uint64_t batches) { cursor_ += batches * static_cast<std::uint64_t>(batch_); }

io::Image8 to_image8(const float* planar, int channels, int size) {
    io::Image8 img;
    img.width = img.height = size;
    img.channels = channels;
    img.pixels.resize(static_cast<std::size_t>(channels) * plane_of(size));
    for (int c = 0; c < channels; ++c)
        for (std::size_t p = 0; p < plane_of(size); ++p) img.pixels[p * channels + c] = io::to_byte(planar[c * plane_of(size) + p]);
    return img;
}

void write_image(const std::filesystem::path& path, const float* planar, int channels, int size) {
    io::write_png(path, to_image8(planar, channels, size));
}

}  // namespace fregan::data
