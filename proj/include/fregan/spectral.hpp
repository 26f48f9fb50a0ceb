#pragma once
// Frequency diagnostics for image corpora: averaged log power spectra, radial
// profiles, 0° slices, profile distances and Haar band energies.

#include <filesystem>
#include <vector>

#include "fregan/tensor.hpp"

namespace fregan::spectral {

inline constexpr double kPowerFloor = 1e-10;
// log10 of the floor, the value of a cell with no power.
inline constexpr double kLogFloor = -10.0;

// size×size mean log10 power, DC at (size/2, size/2).
struct Spectrum2D {
    int size = 0;
    int count = 0;
    std::vector<double> values;
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * size + col]; }
};

// Bins 0..size/2 after azimuthal integration.
struct SpectrumProfile {
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<std::size_t> counts;
    std::size_t bins() const { return mean.size(); }
};

struct SpectrumDistance {
    double distance = 0.0;         // mean over bins of squared mean gap
    std::vector<double> gap;       // per-bin |mean_a - mean_b|
    double high_half_gap = 0.0;    // mean gap over bins [bins/2, bins)
};

struct BandShares {
    double ll = 0.0, lh = 0.0, hl = 0.0, hh = 0.0;
    double sum() const { return ll + lh + hl + hh; }
};

// 0.2989 R + 0.5870 G + 0.1140 B of one planar RGB image.
std::vector<double> grayscale(const float* planar_rgb, int size);
// |FFT|² of a size×size real image, fftshifted (DC at the center), no log.
std::vector<double> power_2d(const std::vector<double>& gray, int size);

// images: N×3×S×S with S square; throws on N = 0 or non-RGB input.
Spectrum2D power_spectrum_2d(const Tensor& images);
SpectrumProfile azimuthal_average(const Spectrum2D& spec);
// Center row from DC (index 0) to Nyquist (index size/2).
std::vector<double> spectrum_slice(const Spectrum2D& spec);
SpectrumDistance spectrum_distance(const SpectrumProfile& a, const SpectrumProfile& b);
// Mean per-image share of energy in each Haar band. Images with zero energy are
// skipped; a corpus with no energy at all is an error.
BandShares band_energy_stats(const Tensor& images);

void write_profile_csv(const std::filesystem::path& path, const SpectrumProfile& profile);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum2D& spec);
// Linear map of [kLogFloor, max] to [0, 255], 8-bit grayscale.
void write_spectrum_png(const std::filesystem::path& path, const Spectrum2D& spec);
void write_slice_csv(const std::filesystem::path& path, const std::vector<double>& slice);
void write_gap_csv(const std::filesystem::path& path, const SpectrumDistance& d);

}  // namespace fregan::spectral
