#include "fregan/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>

#include "fregan/image_io.hpp"
#include "fregan/wavelet.hpp"

namespace fregan::spectral {

namespace {

// One in-place complex plan per size; FFTW planning is not re-entrant, and the
// library is used from a single thread.
class Plan {
public:
    explicit Plan(int size) : size_(size) {
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size * size));
        if (!buf_) throw std::bad_alloc();
        plan_ = fftw_plan_dft_2d(size, size, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    ~Plan() {
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    fftw_complex* buffer() { return buf_; }
    void run() { fftw_execute(plan_); }

private:
    int size_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

Plan& plan_for(int size) {
    static std::map<int, std::unique_ptr<Plan>> plans;
    auto& p = plans[size];
    if (!p) p = std::make_unique<Plan>(size);
    return *p;
}

void require_rgb_square(const char* op, const Tensor& images) {
    const Shape& s = images.shape();
    if (s.n < 1) throw std::invalid_argument(std::string(op) + ": empty image set");
    if (s.c != 3 || s.h != s.w || s.h < 2) {
        throw std::invalid_argument(std::string(op) + ": expected N×3×S×S images, got " + s.str());
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(10);
    return out;
}

}  // namespace

std::vector<double> grayscale(const float* rgb, int size) {
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    std::vector<double> g(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        g[i] = 0.2989 * rgb[i] + 0.5870 * rgb[plane + i] + 0.1140 * rgb[2 * plane + i];
    }
    return g;
}

std::vector<double> power_2d(const std::vector<double>& gray, int size) {
    if (gray.size() != static_cast<std::size_t>(size) * size) throw std::invalid_argument("power_2d: size mismatch");
    Plan& plan = plan_for(size);
    fftw_complex* buf = plan.buffer();
    for (std::size_t i = 0; i < gray.size(); ++i) {
        buf[i][0] = gray[i];
        buf[i][1] = 0.0;
    }
    plan.run();
    std::vector<double> out(gray.size());
    const int half = size / 2;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const fftw_complex& c = buf[static_cast<std::size_t>(y) * size + x];
            const int sy = (y + half) % size, sx = (x + half) % size;
            out[static_cast<std::size_t>(sy) * size + sx] = c[0] * c[0] + c[1] * c[1];
        }
    return out;
}

Spectrum2D power_spectrum_2d(const Tensor& images) {
    require_rgb_square("power_spectrum_2d", images);
    const Shape& s = images.shape();
    Spectrum2D spec;
    spec.size = s.h;
    spec.count = s.n;
    spec.values.assign(static_cast<std::size_t>(s.h) * s.w, 0.0);
    const std::size_t each = 3 * static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
        const auto power = power_2d(grayscale(images.data().data() + each * n, s.h), s.h);
        for (std::size_t i = 0; i < power.size(); ++i) spec.values[i] += std::log10(power[i] + kPowerFloor);
    }
    for (double& v : spec.values) v /= s.n;
    return spec;
}

SpectrumProfile azimuthal_average(const Spectrum2D& spec) {
    const int size = spec.size;
    const int half = size / 2;
    SpectrumProfile p;
    p.mean.assign(half + 1, 0.0);
    p.variance.assign(half + 1, 0.0);
    p.counts.assign(half + 1, 0);
    std::vector<int> bin_of(spec.values.size());
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double r = std::hypot(y - half, x - half);
            const int b = std::min(half, static_cast<int>(std::lround(r)));
            bin_of[static_cast<std::size_t>(y) * size + x] = b;
            p.mean[b] += spec.at(y, x);
            p.counts[b]++;
        }
    for (int b = 0; b <= half; ++b) p.mean[b] /= static_cast<double>(p.counts[b]);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        const double d = spec.values[i] - p.mean[bin_of[i]];
        p.variance[bin_of[i]] += d * d;
    }
    for (int b = 0; b <= half; ++b) p.variance[b] /= static_cast<double>(p.counts[b]);
    return p;
}

std::vector<double> spectrum_slice(const Spectrum2D& spec) {
    const int half = spec.size / 2;
    std::vector<double> out(half + 1);
    // The Nyquist column sits at index 0 after the shift.
    for (int j = 0; j <= half; ++j) out[j] = spec.at(half, (half + j) % spec.size);
    return out;
}

SpectrumDistance spectrum_distance(const SpectrumProfile& a, const SpectrumProfile& b) {
    if (a.bins() != b.bins() || a.bins() == 0) {
        throw std::invalid_argument("spectrum_distance: profiles have " + std::to_string(a.bins()) + " and " +
                                    std::to_string(b.bins()) + " bins");
    }
    SpectrumDistance d;
    const std::size_t n = a.bins();
    d.gap.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = a.mean[i] - b.mean[i];
        d.gap[i] = std::fabs(g);
        d.distance += g * g;
    }
    d.distance /= static_cast<double>(n);
    const std::size_t start = n / 2;
    for (std::size_t i = start; i < n; ++i) d.high_half_gap += d.gap[i];
    d.high_half_gap /= static_cast<double>(n - start);
    return d;
}

BandShares band_energy_stats(const Tensor& images) {
    const Shape& s = images.shape();
    if (s.n < 1) throw std::invalid_argument("band_energy_stats: empty image set");
    const auto bands = wavelet::wave_pool(images);
    const std::size_t per = static_cast<std::size_t>(s.c) * (s.h / 2) * (s.w / 2);
    auto energy = [per](const Tensor& t, int n) {
        double e = 0.0;
        const float* p = t.data().data() + per * n;
        for (std::size_t i = 0; i < per; ++i) e += static_cast<double>(p[i]) * p[i];
        return e;
    };
    BandShares out;
    int used = 0;
    for (int n = 0; n < s.n; ++n) {
        const double ll = energy(bands.ll, n), lh = energy(bands.lh, n), hl = energy(bands.hl, n),
                     hh = energy(bands.hh, n);
        const double total = ll + lh + hl + hh;
        if (total <= 0.0) continue;
        out.ll += ll / total;
        out.lh += lh / total;
        out.hl += hl / total;
        out.hh += hh / total;
        ++used;
    }
    if (used == 0) throw std::invalid_argument("band_energy_stats: every image has zero energy");
    out.ll /= used;
    out.lh /= used;
    out.hl /= used;
    out.hh /= used;
    return out;
}

void write_profile_csv(const std::filesystem::path& path, const SpectrumProfile& p) {
    auto out = open_out(path);
    out << "bin,mean,variance\n";
    for (std::size_t b = 0; b < p.bins(); ++b) out << b << ',' << p.mean[b] << ',' << p.variance[b] << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum2D& spec) {
    auto out = open_out(path);
    for (int y = 0; y < spec.size; ++y) {
        for (int x = 0; x < spec.size; ++x) out << (x ? "," : "") << spec.at(y, x);
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_spectrum_png(const std::filesystem::path& path, const Spectrum2D& spec) {
    const double hi = *std::max_element(spec.values.begin(), spec.values.end());
    const double range = hi - kLogFloor;
    io::Image8 img{spec.size, spec.size, 1, std::vector<std::uint8_t>(spec.values.size())};
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        const double t = range > 0.0 ? (spec.values[i] - kLogFloor) / range : 0.0;
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
    }
    io::write_png(path, img);
}

void write_slice_csv(const std::filesystem::path& path, const std::vector<double>& slice) {
    auto out = open_out(path);
    out << "index,value\n";
    for (std::size_t i = 0; i < slice.size(); ++i) out << i << ',' << slice[i] << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_gap_csv(const std::filesystem::path& path, const SpectrumDistance& d) {
    auto out = open_out(path);
    out << "bin,gap\n";
    for (std::size_t i = 0; i < d.gap.size(); ++i) out << i << ',' << d.gap[i] << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace fregan::spectral
