#pragma once

#include "roadlabel/imgcore.hpp"

#include <memory>
#include <optional>

namespace roadlabel {

enum class WindowKind { Hanning };

/// Fourier-Mellin parameters. Unset bin counts follow the image: angular bins
/// = image height, radial bins = image width.
struct FMParams {
    bool highpass_enabled = true;
    std::optional<int> logpolar_radial_bins;
    std::optional<int> logpolar_angular_bins;
    WindowKind window = WindowKind::Hanning;
    int subpixel_window = 5;

    /// Throws Config for bin counts < 8 or an even/non-positive subpixel window.
    void validate() const;
};

struct LogPolarGeometry {
    int radial_bins = 0;
    int angular_bins = 0;
    double max_radius = 0.0;  // in min(W,H) frequency bins
    double log_base = 0.0;    // radius of bin r is log_base^r

    static LogPolarGeometry for_image(int width, int height, const FMParams& p);
};

struct PhaseCorrelation {
    double dx = 0.0;
    double dy = 0.0;
    double response = 0.0;
};

/// Shift such that b(x) ~= a(x - shift), refined by an intensity-weighted
/// centroid over `subpixel_window` pixels around the integer peak. The
/// response is the correlation-surface energy inside that window over the
/// total surface energy.
PhaseCorrelation phase_correlate(const GrayImage& a, const GrayImage& b, bool apply_window = true,
                                 int subpixel_window = 5);

/// Hanning window -> FFT -> magnitude -> fftshift -> optional high-pass ->
/// log-polar resampling. Output is radial_bins wide and angular_bins tall,
/// covering angles [0, pi).
GrayImage fm_spectrum(const GrayImage& img, const FMParams& p);

/// Centered magnitude spectrum (before high-pass), exposed for diagnostics.
GrayImage magnitude_spectrum(const GrayImage& img);

struct RegistrationResult {
    SimilarityTransform transform;  // maps src coordinates to dst coordinates
    double response = 0.0;          // translation-stage response
    bool rotation_alternate_tested = false;
};

/// Per-image work shared by every registration an image takes part in.
class PreparedImage {
public:
    PreparedImage(GrayImage gray, const FMParams& p);
    ~PreparedImage();
    PreparedImage(PreparedImage&&) noexcept;
    PreparedImage& operator=(PreparedImage&&) noexcept;

    const GrayImage& gray() const noexcept { return gray_; }

private:
    friend RegistrationResult register_prepared(const PreparedImage&, const PreparedImage&,
                                                const FMParams&);
    struct Cache;
    GrayImage gray_;
    std::unique_ptr<Cache> cache_;
};

RegistrationResult register_prepared(const PreparedImage& src, const PreparedImage& dst,
                                     const FMParams& p);
RegistrationResult register_images(const GrayImage& src, const GrayImage& dst,
                                   const FMParams& p = {});
RegistrationResult register_frames(const Frame& src, const Frame& dst, const FMParams& p = {});

}  // namespace roadlabel
