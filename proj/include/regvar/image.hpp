#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace regvar {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Scalar intensity field on a pixel grid, row-major. `spacing` is the physical
/// length of one pixel; discrete integrals are (sum over pixels) * spacing^2.
class Image2D {
public:
    Image2D() = default;
    Image2D(int width, int height, double spacing = 1.0, double fill = 0.0);
    Image2D(int width, int height, std::vector<double> data, double spacing = 1.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double spacing() const noexcept { return spacing_; }
    void set_spacing(double spacing);

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool same_shape(const Image2D& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }
    double operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
    double& operator()(int x, int y) noexcept { return data_[index(x, y)]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    friend bool operator==(const Image2D&, const Image2D&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    double spacing_ = 1.0;
    std::vector<double> data_;
};

using Label = std::uint16_t;

/// Integer segmentation; every label is < num_classes (background is 0).
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int width, int height, int num_classes);
    LabelMap(int width, int height, int num_classes, std::vector<Label> labels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int num_classes() const noexcept { return num_classes_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }
    Label operator()(int x, int y) const noexcept { return labels_[index(x, y)]; }
    /// Checked write; throws DomainError when value >= num_classes.
    void set(int x, int y, Label value);

    std::span<const Label> labels() const noexcept { return labels_; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int num_classes_ = 0;
    std::vector<Label> labels_;
};

/// K-channel soft or binary segmentation, one Image2D per class.
struct OneHotStack {
    std::vector<Image2D> channels;

    int num_channels() const noexcept { return static_cast<int>(channels.size()); }
    int width() const noexcept { return channels.empty() ? 0 : channels.front().width(); }
    int height() const noexcept { return channels.empty() ? 0 : channels.front().height(); }
};

/// Two-channel field holding d/dx and d/dy.
struct GradientField {
    Image2D dx;
    Image2D dy;
};

/// Bilinear interpolation with boundary clamping. Throws DomainError for non-finite p.
double bilinear_sample(const Image2D& img, Point2 p);

/// Value plus partial derivatives w.r.t. the sample position. A coordinate that
/// had to be clamped contributes a zero derivative along its axis.
struct BilinearSample {
    double value = 0.0;
    double d_dx = 0.0;
    double d_dy = 0.0;
};
BilinearSample bilinear_sample_with_gradient(const Image2D& img, Point2 p);

/// Round-half-up nearest pixel, clamped to the domain.
Label nearest_sample(const LabelMap& labels, Point2 p);

/// Central differences inside, one-sided first-order differences on the border.
GradientField central_gradient(const Image2D& img);

/// 5-point Laplacian with replicated-edge padding.
Image2D laplacian(const Image2D& img);

/// Factor-2 block average; odd sizes are padded by edge replication. Spacing doubles.
Image2D downsample(const Image2D& img);
OneHotStack downsample(const OneHotStack& stack);

/// (v - min) / (max - min); constant images map to all zeros.
Image2D normalize_intensity(const Image2D& img);

OneHotStack to_one_hot(const LabelMap& labels);
/// Per-pixel argmax (lowest channel index wins ties).
LabelMap argmax(const OneHotStack& stack);

Image2D crop(const Image2D& img, int x0, int y0, int width, int height);
LabelMap crop(const LabelMap& labels, int x0, int y0, int width, int height);

} // namespace regvar
