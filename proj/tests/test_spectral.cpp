#include <complex>
#include <numbers>

#include "doctest.h"
#include "fregan/data.hpp"
#include "fregan/image_io.hpp"
#include "fregan/spectral.hpp"
#include "test_util.hpp"

using namespace fregan;
using namespace fregan::spectral;
using fregan::testing::random_tensor;
using fregan::testing::TempDir;

namespace {

Tensor horizontal_cosine(int n, int size, int k) {
    data::DatasetSpec s;
    s.kind = data::DatasetKind::sinusoid_mix;
    s.n = n;
    s.size = size;
    s.seed = 7;
    s.fixed_frequency = k;
    return data::synth_dataset(s).all();
}

// Direct O(N⁴) DFT power, DC moved to the center.
std::vector<double> naive_power(const std::vector<double>& g, int size) {
    std::vector<double> out(g.size());
    const double w = -2.0 * std::numbers::pi / size;
    for (int u = 0; u < size; ++u)
        for (int v = 0; v < size; ++v) {
            std::complex<double> acc = 0.0;
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) acc += g[y * size + x] * std::polar(1.0, w * (u * y + v * x));
            const int su = (u + size / 2) % size, sv = (v + size / 2) % size;
            out[su * size + sv] = std::norm(acc);
        }
    return out;
}

Spectrum2D radial_spectrum(int size) {
    Spectrum2D s;
    s.size = size;
    s.count = 1;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double r = std::hypot(y - size / 2, x - size / 2);
            const int b = std::min(size / 2, static_cast<int>(std::lround(r)));
            s.values.push_back(3.0 - 0.25 * b);
        }
    return s;
}

}  // namespace

TEST_CASE("power_2d matches a direct DFT") {
    Rng rng(1);
    for (int size : {4, 8, 16}) {
        std::vector<double> g(size * size);
        for (double& v : g) v = rng.uniform(-1.0, 1.0);
        auto fast = power_2d(g, size);
        auto slow = naive_power(g, size);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("Parseval per image before the log") {
    auto imgs = random_tensor({4, 3, 32, 32}, 2);
    for (int n = 0; n < 4; ++n) {
        auto g = grayscale(imgs.data().data() + n * 3 * 32 * 32, 32);
        auto p = power_2d(g, 32);
        double lhs = 0.0, rhs = 0.0;
        for (double v : p) lhs += v;
        for (double v : g) rhs += v * v;
        CHECK(std::fabs(lhs / (32 * 32) - rhs) <= 1e-3 * rhs);
    }
}

TEST_CASE("grayscale weights") {
    std::vector<float> rgb = {1.0f, 0.5f, -1.0f};
    auto g = grayscale(rgb.data(), 1);
    CHECK(g[0] == doctest::Approx(0.2989 + 0.5 * 0.5870 - 0.1140));
}

TEST_CASE("constant images put all power at DC") {
    auto spec = power_spectrum_2d(Tensor::full({3, 3, 16, 16}, 0.4f));
    CHECK(spec.count == 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            if (y == 8 && x == 8) {
                CHECK(spec.at(y, x) > 0.0);
            } else {
                CHECK(spec.at(y, x) == kLogFloor);
            }
        }
    auto prof = azimuthal_average(spec);
    CHECK(prof.mean[0] == spec.at(8, 8));
    for (std::size_t b = 1; b < prof.bins(); ++b) CHECK(prof.mean[b] == kLogFloor);
    auto slice = spectrum_slice(spec);
    CHECK(slice[0] == spec.at(8, 8));
    for (std::size_t i = 1; i < slice.size(); ++i) CHECK(slice[i] == kLogFloor);
    CHECK_THROWS_AS(power_spectrum_2d(Tensor::zeros({0, 3, 16, 16})), std::invalid_argument);
    CHECK_THROWS_AS(power_spectrum_2d(Tensor::zeros({1, 1, 16, 16})), std::invalid_argument);
}

TEST_CASE("horizontal cosine peaks at (0, ±k)") {
    for (int k : {1, 5, 11}) {
        auto spec = power_spectrum_2d(horizontal_cosine(2, 32, k));
        int best_y = -1, best_x = -1;
        double best = -1e9;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (spec.at(y, x) > best) best = spec.at(y, x), best_y = y, best_x = x;
        CHECK(best_y == 16);
        CHECK(std::abs(best_x - 16) == k);
        CHECK(spec.at(16, 16 + k) == doctest::Approx(spec.at(16, 16 - k)).epsilon(1e-9));
        auto slice = spectrum_slice(spec);
        CHECK(std::max_element(slice.begin(), slice.end()) - slice.begin() == k);
        auto prof = azimuthal_average(spec);
        CHECK(std::max_element(prof.mean.begin(), prof.mean.end()) - prof.mean.begin() == k);
    }
}

TEST_CASE("spectra are point-symmetric for real input") {
    auto spec = power_spectrum_2d(random_tensor({3, 3, 16, 16}, 4));
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(std::fabs(spec.at(y, x) - spec.at((16 - y) % 16, (16 - x) % 16)) < 1e-4);
}

TEST_CASE("spectra ignore image order") {
    auto imgs = random_tensor({4, 3, 16, 16}, 5);
    std::vector<float> rev;
    const std::size_t each = 3 * 16 * 16;
    for (int n = 3; n >= 0; --n) rev.insert(rev.end(), imgs.data().begin() + each * n, imgs.data().begin() + each * (n + 1));
    auto a = power_spectrum_2d(imgs);
    auto b = power_spectrum_2d(Tensor::from_data({4, 3, 16, 16}, rev));
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::fabs(a.values[i] - b.values[i]) < 1e-5);
}

TEST_CASE("azimuthal_average") {
    auto spec = radial_spectrum(16);
    auto prof = azimuthal_average(spec);
    REQUIRE(prof.bins() == 9);
    std::size_t total = 0;
    for (std::size_t b = 0; b < prof.bins(); ++b) {
        CHECK(prof.variance[b] == doctest::Approx(0.0));
        CHECK(prof.mean[b] == doctest::Approx(3.0 - 0.25 * b));
        total += prof.counts[b];
    }
    CHECK(total == 16u * 16u);
    // Corner cells lie beyond radius 8 and land in the last bin.
    CHECK(prof.counts[8] > prof.counts[7] / 2);

    auto noisy = azimuthal_average(power_spectrum_2d(random_tensor({2, 3, 32, 32}, 6)));
    std::size_t sum = 0;
    for (std::size_t b = 0; b < noisy.bins(); ++b) {
        CHECK(noisy.variance[b] >= 0.0);
        sum += noisy.counts[b];
    }
    CHECK(sum == 32u * 32u);
}

TEST_CASE("spectrum_slice of a symmetric spectrum mirrors") {
    auto spec = power_spectrum_2d(random_tensor({2, 3, 16, 16}, 8));
    auto slice = spectrum_slice(spec);
    REQUIRE(slice.size() == 9);
    for (int j = 1; j < 8; ++j) CHECK(std::fabs(spec.at(8, 8 + j) - spec.at(8, 8 - j)) < 1e-4);
    CHECK(slice[8] == spec.at(8, 0));
}

TEST_CASE("spectrum_distance") {
    SpectrumProfile a{{0, 1, 2}, {0, 0, 0}, {1, 1, 1}};
    SpectrumProfile b{{0, 2, 4}, {0, 0, 0}, {1, 1, 1}};
    auto d = spectrum_distance(a, b);
    CHECK(d.distance == doctest::Approx(5.0 / 3.0));
    CHECK(d.gap == std::vector<double>{0, 1, 2});
    CHECK(d.high_half_gap == doctest::Approx(1.5));
    CHECK(spectrum_distance(a, a).distance == 0.0);
    CHECK(spectrum_distance(b, a).distance == d.distance);

    SpectrumProfile c = a;
    for (double& v : c.mean) v += 0.7;
    CHECK(spectrum_distance(a, c).distance == doctest::Approx(0.49));

    SpectrumProfile short_p{{0, 1}, {0, 0}, {1, 1}};
    CHECK_THROWS_AS(spectrum_distance(a, short_p), std::invalid_argument);

    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        SpectrumProfile x, y;
        for (int i = 0; i < 5; ++i) {
            x.mean.push_back(rng.uniform(-5, 5));
            y.mean.push_back(rng.uniform(-5, 5));
        }
        CHECK(spectrum_distance(x, y).distance >= 0.0);
        CHECK(spectrum_distance(x, y).distance == spectrum_distance(y, x).distance);
    }
}

TEST_CASE("band_energy_stats") {
    auto constant = band_energy_stats(Tensor::full({2, 3, 8, 8}, -0.3f));
    CHECK(constant.ll == doctest::Approx(1.0));
    CHECK(constant.lh == 0.0);
    CHECK(constant.hl == 0.0);
    CHECK(constant.hh == 0.0);

    data::DatasetSpec s;
    s.kind = data::DatasetKind::checkerboard;
    s.n = 2;
    s.size = 32;
    s.tile = 2;
    s.amplitude_a = 0.6f;
    s.amplitude_b = -0.6f;
    auto cb = band_energy_stats(data::synth_dataset(s).all());
    CHECK(cb.ll == 0.0);
    CHECK(cb.hh == doctest::Approx(1.0));

    auto noise = band_energy_stats(random_tensor({5, 3, 16, 16}, 9));
    CHECK(noise.ll > 0.0);
    CHECK(noise.lh > 0.0);
    CHECK(noise.hl > 0.0);
    CHECK(noise.hh > 0.0);
    CHECK(std::fabs(noise.sum() - 1.0) < 1e-4);

    CHECK_THROWS_AS(band_energy_stats(Tensor::zeros({2, 3, 8, 8})), std::invalid_argument);
    CHECK_THROWS_AS(band_energy_stats(Tensor::zeros({1, 3, 7, 8})), std::invalid_argument);
}

TEST_CASE("spectrum files") {
    TempDir dir("spec");
    auto spec = power_spectrum_2d(horizontal_cosine(1, 32, 4));
    auto prof = azimuthal_average(spec);
    write_profile_csv(dir / "profile.csv", prof);
    write_spectrum_csv(dir / "spectrum.csv", spec);
    write_spectrum_png(dir / "spectrum.png", spec);
    write_slice_csv(dir / "slice.csv", spectrum_slice(spec));
    write_gap_csv(dir / "gap.csv", spectrum_distance(prof, prof));

    std::ifstream in(dir / "profile.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "bin,mean,variance");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 17);

    auto png = io::read_png(dir / "spectrum.png");
    CHECK(png.width == 32);
    // Floor cells map to 0 and the peak to 255.
    CHECK(png.pixels[(0 * 32 + 0) * 3] == 0);
    CHECK(png.pixels[(16 * 32 + 20) * 3] == 255);

    std::ifstream grid(dir / "spectrum.csv");
    int lines = 0;
    while (std::getline(grid, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 31);
        ++lines;
    }
    CHECK(lines == 32);
}
