#include "regvar/image.hpp"

#include "regvar/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace regvar {

namespace {

void check_dims(int width, int height) {
    if (width < 1 || height < 1) {
        throw DomainError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
    }
}

void check_spacing(double spacing) {
    if (!std::isfinite(spacing) || spacing <= 0.0) {
        throw DomainError("pixel spacing must be positive and finite");
    }
}

void check_finite(Point2 p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw DomainError("sample coordinate is not finite");
    }
}

// Locates the interpolation cell along one axis. Returns the clamped lower index
// and fraction; `clamped` is set when the coordinate left [0, n-1].
struct Cell {
    int lo;
    double frac;
    bool clamped;
};

Cell locate(double c, int n) {
    Cell cell{0, 0.0, false};
    if (n == 1) {
        cell.clamped = c != 0.0;
        return cell;
    }
    const double hi = static_cast<double>(n - 1);
    if (c < 0.0) {
        c = 0.0;
        cell.clamped = true;
    } else if (c > hi) {
        c = hi;
        cell.clamped = true;
    }
    int lo = static_cast<int>(std::floor(c));
    if (lo > n - 2) lo = n - 2;
    cell.lo = lo;
    cell.frac = c - lo;
    return cell;
}

} // namespace

Image2D::Image2D(int width, int height, double spacing, double fill)
    : width_(width), height_(height), spacing_(spacing) {
    check_dims(width, height);
    check_spacing(spacing);
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Image2D::Image2D(int width, int height, std::vector<double> data, double spacing)
    : width_(width), height_(height), spacing_(spacing), data_(std::move(data)) {
    check_dims(width, height);
    check_spacing(spacing);
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DomainError("image data size does not match dimensions");
    }
    if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
        throw DomainError("image intensities must be finite");
    }
}

void Image2D::set_spacing(double spacing) {
    check_spacing(spacing);
    spacing_ = spacing;
}

LabelMap::LabelMap(int width, int height, int num_classes)
    : width_(width), height_(height), num_classes_(num_classes) {
    check_dims(width, height);
    if (num_classes < 1) throw DomainError("label map needs at least one class");
    labels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), Label{0});
}

LabelMap::LabelMap(int width, int height, int num_classes, std::vector<Label> labels)
    : width_(width), height_(height), num_classes_(num_classes), labels_(std::move(labels)) {
    check_dims(width, height);
    if (num_classes < 1) throw DomainError("label map needs at least one class");
    if (labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DomainError("label data size does not match dimensions");
    }
    for (Label l : labels_) {
        if (l >= num_classes_) {
            throw DomainError("label " + std::to_string(l) + " >= num_classes " + std::to_string(num_classes_));
        }
    }
}

void LabelMap::set(int x, int y, Label value) {
    if (value >= num_classes_) {
        throw DomainError("label " + std::to_string(value) + " >= num_classes " + std::to_string(num_classes_));
    }
    labels_[index(x, y)] = value;
}

double bilinear_sample(const Image2D& img, Point2 p) {
    return bilinear_sample_with_gradient(img, p).value;
}

BilinearSample bilinear_sample_with_gradient(const Image2D& img, Point2 p) {
    check_finite(p);
    const Cell cx = locate(p.x, img.width());
    const Cell cy = locate(p.y, img.height());
    const int x1 = std::min(cx.lo + 1, img.width() - 1);
    const int y1 = std::min(cy.lo + 1, img.height() - 1);

    const double v00 = img(cx.lo, cy.lo);
    const double v10 = img(x1, cy.lo);
    const double v01 = img(cx.lo, y1);
    const double v11 = img(x1, y1);

    // Convex form: exact at frac 0 and frac 1 (the last row and column land on frac 1).
    const double top = (1.0 - cx.frac) * v00 + cx.frac * v10;
    const double bottom = (1.0 - cx.frac) * v01 + cx.frac * v11;

    BilinearSample s;
    s.value = (1.0 - cy.frac) * top + cy.frac * bottom;
    if (!cx.clamped) s.d_dx = (1.0 - cy.frac) * (v10 - v00) + cy.frac * (v11 - v01);
    if (!cy.clamped) s.d_dy = bottom - top;
    return s;
}

Label nearest_sample(const LabelMap& labels, Point2 p) {
    check_finite(p);
    const auto pick = [](double c, int n) {
        const double r = std::floor(c + 0.5);
        if (r <= 0.0) return 0;
        if (r >= static_cast<double>(n - 1)) return n - 1;
        return static_cast<int>(r);
    };
    return labels(pick(p.x, labels.width()), pick(p.y, labels.height()));
}

GradientField central_gradient(const Image2D& img) {
    const int w = img.width();
    const int h = img.height();
    if (w < 3 || h < 3) throw DomainError("central_gradient needs at least 3x3 pixels");
    const double inv_h = 1.0 / img.spacing();
    const double inv_2h = 0.5 * inv_h;

    GradientField g{Image2D(w, h, img.spacing()), Image2D(w, h, img.spacing())};
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx;
            if (x == 0) gx = (img(1, y) - img(0, y)) * inv_h;
            else if (x == w - 1) gx = (img(w - 1, y) - img(w - 2, y)) * inv_h;
            else gx = (img(x + 1, y) - img(x - 1, y)) * inv_2h;

            double gy;
            if (y == 0) gy = (img(x, 1) - img(x, 0)) * inv_h;
            else if (y == h - 1) gy = (img(x, h - 1) - img(x, h - 2)) * inv_h;
            else gy = (img(x, y + 1) - img(x, y - 1)) * inv_2h;

            g.dx(x, y) = gx;
            g.dy(x, y) = gy;
        }
    }
    return g;
}

Image2D laplacian(const Image2D& img) {
    const int w = img.width();
    const int h = img.height();
    if (w < 3 || h < 3) throw DomainError("laplacian needs at least 3x3 pixels");
    const double inv_h2 = 1.0 / (img.spacing() * img.spacing());

    Image2D out(w, h, img.spacing());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        const int ym = std::max(y - 1, 0);
        const int yp = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(x - 1, 0);
            const int xp = std::min(x + 1, w - 1);
            const double c = img(x, y);
            out(x, y) = ((img(xm, y) - c) + (img(xp, y) - c) + (img(x, ym) - c) + (img(x, yp) - c)) * inv_h2;
        }
    }
    return out;
}

Image2D downsample(const Image2D& img) {
    const int w = img.width();
    const int h = img.height();
    const int cw = (w + 1) / 2;
    const int ch = (h + 1) / 2;
    Image2D out(cw, ch, img.spacing() * 2.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < ch; ++y) {
        const int y0 = 2 * y;
        const int y1 = std::min(2 * y + 1, h - 1);
        for (int x = 0; x < cw; ++x) {
            const int x0 = 2 * x;
            const int x1 = std::min(2 * x + 1, w - 1);
            out(x, y) = 0.25 * ((img(x0, y0) + img(x1, y0)) + (img(x0, y1) + img(x1, y1)));
        }
    }
    return out;
}

OneHotStack downsample(const OneHotStack& stack) {
    OneHotStack out;
    out.channels.reserve(stack.channels.size());
    for (const auto& c : stack.channels) out.channels.push_back(downsample(c));
    return out;
}

Image2D normalize_intensity(const Image2D& img) {
    const auto data = img.data();
    const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
    Image2D out(img.width(), img.height(), img.spacing());
    if (data.empty() || *mx == *mn) return out;
    const double lo = *mn;
    const double range = *mx - *mn;
    auto dst = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) dst[i] = (data[i] - lo) / range;
    return out;
}

OneHotStack to_one_hot(const LabelMap& labels) {
    OneHotStack stack;
    stack.channels.assign(static_cast<std::size_t>(labels.num_classes()),
                          Image2D(labels.width(), labels.height()));
    const auto src = labels.labels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i] >= labels.num_classes()) throw DomainError("label exceeds num_classes");
        stack.channels[src[i]].data()[i] = 1.0;
    }
    return stack;
}

LabelMap argmax(const OneHotStack& stack) {
    if (stack.channels.empty()) throw DomainError("argmax of an empty stack");
    const int k = stack.num_channels();
    LabelMap out(stack.width(), stack.height(), k);
    const std::size_t n = stack.channels.front().size();
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        for (int c = 1; c < k; ++c) {
            if (stack.channels[c].data()[i] > stack.channels[best].data()[i]) best = c;
        }
        labels[i] = static_cast<Label>(best);
    }
    return LabelMap(stack.width(), stack.height(), k, std::move(labels));
}

Image2D crop(const Image2D& img, int x0, int y0, int width, int height) {
    if (x0 < 0 || y0 < 0 || width < 1 || height < 1 || x0 + width > img.width() || y0 + height > img.height()) {
        throw DomainError("crop window outside the image");
    }
    Image2D out(width, height, img.spacing());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out(x, y) = img(x0 + x, y0 + y);
    return out;
}

LabelMap crop(const LabelMap& labels, int x0, int y0, int width, int height) {
    if (x0 < 0 || y0 < 0 || width < 1 || height < 1 || x0 + width > labels.width() ||
        y0 + height > labels.height()) {
        throw DomainError("crop window outside the label map");
    }
    std::vector<Label> out(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out[static_cast<std::size_t>(y) * width + x] = labels(x0 + x, y0 + y);
    return LabelMap(width, height, labels.num_classes(), std::move(out));
}

} // namespace regvar
