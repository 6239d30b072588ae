#include "roadlabel/registration.hpp"

#include "roadlabel/error.hpp"

#include <opencv2/core.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace roadlabel {

void FMParams::validate() const {
    if (logpolar_radial_bins && *logpolar_radial_bins < 8)
        throw Error(ErrorKind::Config, "logpolar_radial_bins must be >= 8");
    if (logpolar_angular_bins && *logpolar_angular_bins < 8)
        throw Error(ErrorKind::Config, "logpolar_angular_bins must be >= 8");
    if (subpixel_window < 1 || subpixel_window % 2 == 0)
        throw Error(ErrorKind::Config, "subpixel_window must be a positive odd number");
}

LogPolarGeometry LogPolarGeometry::for_image(int width, int height, const FMParams& p) {
    LogPolarGeometry g;
    g.radial_bins = p.logpolar_radial_bins.value_or(width);
    g.angular_bins = p.logpolar_angular_bins.value_or(height);
    g.max_radius = std::min(width, height) / 2.0;
    g.log_base = std::exp(std::log(g.max_radius) / g.radial_bins);
    return g;
}

namespace {

cv::Mat hanning(int width, int height) {
    cv::Mat w(height, width, CV_32F);
    auto coeff = [](int i, int n) {
        return n > 1 ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1)) : 1.0;
    };
    for (int y = 0; y < height; ++y) {
        const double wy = coeff(y, height);
        auto* row = w.ptr<float>(y);
        for (int x = 0; x < width; ++x) row[x] = static_cast<float>(wy * coeff(x, width));
    }
    return w;
}

cv::Mat as_mat(const GrayImage& img) {
    return cv::Mat(img.height(), img.width(), CV_32F, const_cast<float*>(img.values().data()));
}

// Mean-removed, optionally windowed complex spectrum of an image.
cv::Mat forward_spectrum(const GrayImage& img, bool apply_window) {
    cv::Mat src;
    as_mat(img).copyTo(src);
    double sum_sq = src.dot(src);
    if (!(sum_sq > 0.0)) throw Error(ErrorKind::ZeroEnergy, "phase correlation input has zero energy");
    src -= cv::mean(src)[0];
    if (apply_window) cv::multiply(src, hanning(img.width(), img.height()), src);
    cv::Mat spectrum;
    cv::dft(src, spectrum, cv::DFT_COMPLEX_OUTPUT);
    return spectrum;
}

PhaseCorrelation correlate_spectra(const cv::Mat& fa, const cv::Mat& fb, int subpixel_window) {
    if (fa.size() != fb.size())
        throw Error(ErrorKind::DimensionMismatch, "phase correlation inputs differ in size");
    cv::Mat cross;
    cv::mulSpectrums(fb, fa, cross, 0, true);

    float max_mag = 0.0f;
    for (int y = 0; y < cross.rows; ++y) {
        const auto* row = cross.ptr<cv::Vec2f>(y);
        for (int x = 0; x < cross.cols; ++x) max_mag = std::max(max_mag, std::hypot(row[x][0], row[x][1]));
    }
    if (!(max_mag > 0.0f))
        throw Error(ErrorKind::ZeroEnergy, "cross-power spectrum has zero energy");
    const float floor_mag = max_mag * 1e-20f;
    for (int y = 0; y < cross.rows; ++y) {
        auto* row = cross.ptr<cv::Vec2f>(y);
        for (int x = 0; x < cross.cols; ++x) {
            const float m = std::hypot(row[x][0], row[x][1]);
            row[x] = m > floor_mag ? row[x] / m : cv::Vec2f(0.0f, 0.0f);
        }
    }

    cv::Mat surface;
    cv::idft(cross, surface, cv::DFT_SCALE | cv::DFT_REAL_OUTPUT);

    const double total = surface.dot(surface);
    if (!(total > 0.0))
        throw Error(ErrorKind::ZeroEnergy, "correlation surface has zero energy");

    cv::Point peak;
    cv::minMaxLoc(surface, nullptr, nullptr, nullptr, &peak);

    const int w = surface.cols;
    const int h = surface.rows;
    // Surfaces smaller than the window would wrap onto themselves.
    const int half_x = std::min(subpixel_window / 2, (w - 1) / 2);
    const int half_y = std::min(subpixel_window / 2, (h - 1) / 2);
    double weight = 0.0, ox = 0.0, oy = 0.0, window_energy = 0.0;
    for (int dy = -half_y; dy <= half_y; ++dy) {
        const int yy = ((peak.y + dy) % h + h) % h;
        for (int dx = -half_x; dx <= half_x; ++dx) {
            const int xx = ((peak.x + dx) % w + w) % w;
            const double v = surface.at<float>(yy, xx);
            window_energy += v * v;
            if (v > 0.0) {
                weight += v;
                ox += v * dx;
                oy += v * dy;
            }
        }
    }

    PhaseCorrelation result;
    result.dx = peak.x + (weight > 0.0 ? ox / weight : 0.0);
    result.dy = peak.y + (weight > 0.0 ? oy / weight : 0.0);
    if (result.dx > w / 2.0) result.dx -= w;
    if (result.dy > h / 2.0) result.dy -= h;
    result.response = std::clamp(window_energy / total, 0.0, 1.0);
    return result;
}

void require_same_size(const GrayImage& a, const GrayImage& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw Error(ErrorKind::DimensionMismatch, "images differ in size: " +
                                                      std::to_string(a.width()) + "x" +
                                                      std::to_string(a.height()) + " vs " +
                                                      std::to_string(b.width()) + "x" +
                                                      std::to_string(b.height()));
}

cv::Mat centered_magnitude(const GrayImage& img) {
    cv::Mat spectrum = forward_spectrum(img, true);
    cv::Mat planes[2];
    cv::split(spectrum, planes);
    cv::Mat mag;
    cv::magnitude(planes[0], planes[1], mag);

    // fftshift: DC moves to (W/2, H/2).
    cv::Mat shifted(mag.size(), CV_32F);
    const int w = mag.cols;
    const int h = mag.rows;
    for (int y = 0; y < h; ++y) {
        const auto* src_row = mag.ptr<float>((y + h - h / 2) % h);
        auto* dst_row = shifted.ptr<float>(y);
        for (int x = 0; x < w; ++x) dst_row[x] = src_row[(x + w - w / 2) % w];
    }
    return shifted;
}

void apply_highpass(cv::Mat& centered) {
    const int w = centered.cols;
    const int h = centered.rows;
    for (int y = 0; y < h; ++y) {
        const double fy = static_cast<double>(y - h / 2) / h;
        auto* row = centered.ptr<float>(y);
        for (int x = 0; x < w; ++x) {
            const double fx = static_cast<double>(x - w / 2) / w;
            const double c = std::cos(std::numbers::pi * fx) * std::cos(std::numbers::pi * fy);
            row[x] = static_cast<float>(row[x] * (1.0 - c) * (2.0 - c));
        }
    }
}

float sample_bilinear(const cv::Mat& m, double x, double y) {
    x = std::clamp(x, 0.0, m.cols - 1.0);
    y = std::clamp(y, 0.0, m.rows - 1.0);
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, m.cols - 1);
    const int y1 = std::min(y0 + 1, m.rows - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    return static_cast<float>((1 - fx) * (1 - fy) * m.at<float>(y0, x0) + fx * (1 - fy) * m.at<float>(y0, x1) +
                              (1 - fx) * fy * m.at<float>(y1, x0) + fx * fy * m.at<float>(y1, x1));
}

}  // namespace

PhaseCorrelation phase_correlate(const GrayImage& a, const GrayImage& b, bool apply_window,
                                 int subpixel_window) {
    require_same_size(a, b);
    if (subpixel_window < 1 || subpixel_window % 2 == 0)
        throw Error(ErrorKind::Config, "subpixel_window must be a positive odd number");
    return correlate_spectra(forward_spectrum(a, apply_window), forward_spectrum(b, apply_window),
                             subpixel_window);
}

GrayImage magnitude_spectrum(const GrayImage& img) {
    cv::Mat mag = centered_magnitude(img);
    return GrayImage(mag.cols, mag.rows, std::vector<float>(mag.begin<float>(), mag.end<float>()));
}

GrayImage fm_spectrum(const GrayImage& img, const FMParams& p) {
    p.validate();
    cv::Mat mag = centered_magnitude(img);
    if (p.highpass_enabled) apply_highpass(mag);

    const auto geom = LogPolarGeometry::for_image(img.width(), img.height(), p);
    const double min_dim = std::min(img.width(), img.height());
    const double sx = img.width() / min_dim;
    const double sy = img.height() / min_dim;
    const double cx = img.width() / 2;
    const double cy = img.height() / 2;

    GrayImage out(geom.radial_bins, geom.angular_bins);
    for (int a = 0; a < geom.angular_bins; ++a) {
        const double phi = std::numbers::pi * a / geom.angular_bins;
        const double ca = std::cos(phi) * sx;
        const double sa = std::sin(phi) * sy;
        for (int r = 0; r < geom.radial_bins; ++r) {
            const double rho = std::pow(geom.log_base, r);
            out.at(r, a) = sample_bilinear(mag, cx + rho * ca, cy + rho * sa);
        }
    }
    return out;
}

struct PreparedImage::Cache {
    cv::Mat logpolar_spectrum;
    cv::Mat pixel_spectrum;
    LogPolarGeometry geometry;
};

PreparedImage::PreparedImage(GrayImage gray, const FMParams& p)
    : gray_(std::move(gray)), cache_(std::make_unique<Cache>()) {
    p.validate();
    cache_->geometry = LogPolarGeometry::for_image(gray_.width(), gray_.height(), p);
    const GrayImage lp = fm_spectrum(gray_, p);
    cache_->logpolar_spectrum = forward_spectrum(lp, true);
    cache_->pixel_spectrum = forward_spectrum(gray_, true);
}

PreparedImage::~PreparedImage() = default;
PreparedImage::PreparedImage(PreparedImage&&) noexcept = default;
PreparedImage& PreparedImage::operator=(PreparedImage&&) noexcept = default;

RegistrationResult register_prepared(const PreparedImage& src, const PreparedImage& dst,
                                     const FMParams& p) {
    require_same_size(src.gray(), dst.gray());
    const auto& geom = src.cache_->geometry;

    // Stage 1: rotation and scale appear as shifts of the log-polar spectrum.
    const PhaseCorrelation lp = correlate_spectra(src.cache_->logpolar_spectrum,
                                                  dst.cache_->logpolar_spectrum, p.subpixel_window);
    const double rotation = lp.dy * std::numbers::pi / geom.angular_bins;
    const double scale = std::pow(geom.log_base, -lp.dx);

    // Stage 2: translation in the pixel domain. The magnitude spectrum is
    // pi-periodic, so both theta and theta + pi are scored.
    RegistrationResult best;
    best.response = -1.0;
    for (const double candidate : {rotation, rotation + std::numbers::pi}) {
        SimilarityTransform t{scale, wrap_angle(candidate), 0.0, 0.0};
        const GrayImage corrected = warp_image(src.gray(), t);
        PhaseCorrelation shift;
        try {
            shift = correlate_spectra(forward_spectrum(corrected, true),
                                      dst.cache_->pixel_spectrum, p.subpixel_window);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ZeroEnergy) throw;
            continue;
        }
        if (shift.response > best.response) {
            t.tx = shift.dx;
            t.ty = shift.dy;
            best.transform = t;
            best.response = shift.response;
        }
    }
    if (best.response < 0.0) {
        best.transform = SimilarityTransform::identity();
        best.response = 0.0;
    }
    best.rotation_alternate_tested = true;
    return best;
}

RegistrationResult register_images(const GrayImage& src, const GrayImage& dst, const FMParams& p) {
    require_same_size(src, dst);
    return register_prepared(PreparedImage(src, p), PreparedImage(dst, p), p);
}

RegistrationResult register_frames(const Frame& src, const Frame& dst, const FMParams& p) {
    return register_images(to_gray(src), to_gray(dst), p);
}

}  // namespace roadlabel
