#include "regvar/transform.hpp"

#include "regvar/errors.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace regvar {

DisplacementField::DisplacementField(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) throw DomainError("field dimensions must be positive");
    ux.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0);
    uy.assign(ux.size(), 0.0);
}

DisplacementField zero_field(int width, int height) { return DisplacementField(width, height); }

ControlGrid::ControlGrid(double spacing, int c, int r) : spacing_px(spacing), cols(c), rows(r) {
    if (!std::isfinite(spacing) || spacing <= 0.0) throw ConfigError("control spacing must be positive");
    if (c < 4 || r < 4) throw ConfigError("control grid needs at least 4x4 points");
    cx.assign(static_cast<std::size_t>(c) * static_cast<std::size_t>(r), 0.0);
    cy.assign(cx.size(), 0.0);
}

namespace {

int lattice_extent(int num_pixels, double spacing_px) {
    return static_cast<int>(std::ceil(static_cast<double>(num_pixels - 1) / spacing_px)) + 3;
}

} // namespace

ControlGrid ControlGrid::for_domain(int width, int height, double spacing_px) {
    if (width < 1 || height < 1) throw ConfigError("domain dimensions must be positive");
    if (!std::isfinite(spacing_px) || spacing_px <= 0.0) throw ConfigError("control spacing must be positive");
    return ControlGrid(spacing_px, std::max(lattice_extent(width, spacing_px), 4),
                       std::max(lattice_extent(height, spacing_px), 4));
}

bool ControlGrid::covers(int width, int height) const noexcept {
    return cols >= lattice_extent(width, spacing_px) && rows >= lattice_extent(height, spacing_px);
}

double cubic_bspline(double t) noexcept {
    const double a = std::abs(t);
    if (a < 1.0) return (3.0 * a * a * a - 6.0 * a * a + 4.0) / 6.0;
    if (a < 2.0) {
        const double b = 2.0 - a;
        return b * b * b / 6.0;
    }
    return 0.0;
}

std::array<double, 4> cubic_bspline_weights(double tau) noexcept {
    const double t2 = tau * tau;
    const double t3 = t2 * tau;
    const double omt = 1.0 - tau;
    return {omt * omt * omt / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * tau + 1.0) / 6.0,
            t3 / 6.0};
}

BsplineAxis make_bspline_axis(int num_pixels, double spacing_px, int num_coeffs) {
    if (num_coeffs < lattice_extent(num_pixels, spacing_px)) {
        throw ConfigError("control grid of " + std::to_string(num_coeffs) + " points does not cover " +
                          std::to_string(num_pixels) + " pixels at spacing " + std::to_string(spacing_px));
    }
    BsplineAxis axis;
    axis.start.resize(static_cast<std::size_t>(num_pixels));
    axis.weight.resize(static_cast<std::size_t>(num_pixels));
    for (int x = 0; x < num_pixels; ++x) {
        const double t = static_cast<double>(x) / spacing_px;
        int start = static_cast<int>(std::floor(t));
        start = std::min(start, num_coeffs - 4);
        axis.start[x] = start;
        axis.weight[x] = cubic_bspline_weights(t - start);
    }
    return axis;
}

DisplacementField densify(const ControlGrid& grid, int width, int height) {
    if (!grid.covers(width, height)) throw ConfigError("control grid too small for the image domain");
    const BsplineAxis ax = make_bspline_axis(width, grid.spacing_px, grid.cols);
    const BsplineAxis ay = make_bspline_axis(height, grid.spacing_px, grid.rows);
    DisplacementField field(width, height);
    const int cols = grid.cols;

#pragma omp parallel
    {
        std::vector<double> row_x(static_cast<std::size_t>(cols));
        std::vector<double> row_y(static_cast<std::size_t>(cols));
#pragma omp for schedule(static)
        for (int y = 0; y < height; ++y) {
            const int j0 = ay.start[y];
            const auto& wy = ay.weight[y];
            for (int i = 0; i < cols; ++i) {
                double sx = 0.0;
                double sy = 0.0;
                for (int b = 0; b < 4; ++b) {
                    const std::size_t k = grid.index(i, j0 + b);
                    sx += wy[b] * grid.cx[k];
                    sy += wy[b] * grid.cy[k];
                }
                row_x[i] = sx;
                row_y[i] = sy;
            }
            for (int x = 0; x < width; ++x) {
                const int i0 = ax.start[x];
                const auto& wx = ax.weight[x];
                double sx = 0.0;
                double sy = 0.0;
                for (int a = 0; a < 4; ++a) {
                    sx += wx[a] * row_x[i0 + a];
                    sy += wx[a] * row_y[i0 + a];
                }
                const std::size_t p = field.index(x, y);
                field.ux[p] = sx;
                field.uy[p] = sy;
            }
        }
    }
    return field;
}

ControlGrid backproject(const DisplacementField& values, const ControlGrid& shape) {
    const int width = values.width;
    const int height = values.height;
    if (!shape.covers(width, height)) throw ConfigError("control grid too small for the image domain");
    const BsplineAxis ax = make_bspline_axis(width, shape.spacing_px, shape.cols);
    const BsplineAxis ay = make_bspline_axis(height, shape.spacing_px, shape.rows);
    const int cols = shape.cols;
    const int rows = shape.rows;

    // Stage 1: reduce each pixel row onto the lattice columns (row-local, race-free).
    std::vector<double> rx(static_cast<std::size_t>(height) * cols, 0.0);
    std::vector<double> ry(rx.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        double* out_x = rx.data() + static_cast<std::size_t>(y) * cols;
        double* out_y = ry.data() + static_cast<std::size_t>(y) * cols;
        for (int x = 0; x < width; ++x) {
            const std::size_t p = values.index(x, y);
            const int i0 = ax.start[x];
            const auto& wx = ax.weight[x];
            for (int a = 0; a < 4; ++a) {
                out_x[i0 + a] += wx[a] * values.ux[p];
                out_y[i0 + a] += wx[a] * values.uy[p];
            }
        }
    }

    // Stage 2: each lattice row gathers the pixel rows it supports, in ascending order.
    ControlGrid out(shape.spacing_px, cols, rows);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < rows; ++j) {
        for (int y = 0; y < height; ++y) {
            const int b = j - ay.start[y];
            if (b < 0 || b > 3) continue;
            const double wy = ay.weight[y][b];
            const double* in_x = rx.data() + static_cast<std::size_t>(y) * cols;
            const double* in_y = ry.data() + static_cast<std::size_t>(y) * cols;
            for (int i = 0; i < cols; ++i) {
                out.cx[out.index(i, j)] += wy * in_x[i];
                out.cy[out.index(i, j)] += wy * in_y[i];
            }
        }
    }
    return out;
}

Point2 evaluate_spline(const ControlGrid& grid, Point2 p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("spline evaluation at non-finite position");
    const auto piece = [](double c, double s, int n) {
        const double t = c / s;
        const int start = std::clamp(static_cast<int>(std::floor(t)), 0, n - 4);
        return std::pair{start, cubic_bspline_weights(t - start)};
    };
    const auto [i0, wx] = piece(p.x, grid.spacing_px, grid.cols);
    const auto [j0, wy] = piece(p.y, grid.spacing_px, grid.rows);
    Point2 u;
    for (int b = 0; b < 4; ++b) {
        for (int a = 0; a < 4; ++a) {
            const double w = wx[a] * wy[b];
            const std::size_t k = grid.index(i0 + a, j0 + b);
            u.x += w * grid.cx[k];
            u.y += w * grid.cy[k];
        }
    }
    return u;
}

Image2D warp_image(const Image2D& moving, const DisplacementField& field) {
    Image2D out(field.width, field.height, moving.spacing());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < field.height; ++y) {
        for (int x = 0; x < field.width; ++x) {
            const std::size_t p = field.index(x, y);
            out(x, y) = bilinear_sample(moving, {x + field.ux[p], y + field.uy[p]});
        }
    }
    return out;
}

OneHotStack warp_onehot(const OneHotStack& stack, const DisplacementField& field) {
    if (stack.channels.empty()) throw DomainError("cannot warp an empty one-hot stack");
    for (const auto& c : stack.channels) {
        if (!c.same_shape(stack.channels.front())) throw DomainError("one-hot channels differ in shape");
    }
    OneHotStack out;
    out.channels.reserve(stack.channels.size());
    for (const auto& c : stack.channels) out.channels.push_back(warp_image(c, field));
    return out;
}

LabelMap warp_labels(const LabelMap& labels, const DisplacementField& field) {
    std::vector<Label> out(field.size());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < field.height; ++y) {
        for (int x = 0; x < field.width; ++x) {
            const std::size_t p = field.index(x, y);
            out[p] = nearest_sample(labels, {x + field.ux[p], y + field.uy[p]});
        }
    }
    return LabelMap(field.width, field.height, labels.num_classes(), std::move(out));
}

DeformationQuality deformation_quality(const DisplacementField& field) {
    const int w = field.width;
    const int h = field.height;
    if (w < 3 || h < 3) throw DomainError("deformation_quality needs at least 3x3 pixels");

    // d/dx of one component at (x, y): central inside, one-sided at the border.
    const auto ddx = [&](const std::vector<double>& c, int x, int y) {
        if (x == 0) return c[field.index(1, y)] - c[field.index(0, y)];
        if (x == w - 1) return c[field.index(w - 1, y)] - c[field.index(w - 2, y)];
        return 0.5 * (c[field.index(x + 1, y)] - c[field.index(x - 1, y)]);
    };
    const auto ddy = [&](const std::vector<double>& c, int x, int y) {
        if (y == 0) return c[field.index(x, 1)] - c[field.index(x, 0)];
        if (y == h - 1) return c[field.index(x, h - 1)] - c[field.index(x, h - 2)];
        return 0.5 * (c[field.index(x, y + 1)] - c[field.index(x, y - 1)]);
    };

    DeformationQuality q;
    q.width = w;
    q.height = h;
    q.jacobian_det.resize(field.size());
    long folded = 0;
#pragma omp parallel for schedule(static) reduction(+ : folded)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double a = 1.0 + ddx(field.ux, x, y);
            const double b = ddy(field.ux, x, y);
            const double c = ddx(field.uy, x, y);
            const double d = 1.0 + ddy(field.uy, x, y);
            const double det = a * d - b * c;
            q.jacobian_det[field.index(x, y)] = det;
            if (det <= 0.0) ++folded;
        }
    }
    q.folding_fraction = static_cast<double>(folded) / static_cast<double>(field.size());
    return q;
}

ControlGrid prolongate(const ControlGrid& coarse, const LevelGeometry& fine) {
    ControlGrid out = ControlGrid::for_domain(fine.width, fine.height, fine.control_spacing_px);
    // Fine pixel x covers coarse coordinate (x - 0.5) / 2 under 2x2 block averaging.
    for (int j = 0; j < out.rows; ++j) {
        for (int i = 0; i < out.cols; ++i) {
            const Point2 fine_pos{(i - 1) * out.spacing_px, (j - 1) * out.spacing_px};
            const Point2 u = evaluate_spline(coarse, {(fine_pos.x - 0.5) * 0.5, (fine_pos.y - 0.5) * 0.5});
            out.cx[out.index(i, j)] = 2.0 * u.x;
            out.cy[out.index(i, j)] = 2.0 * u.y;
        }
    }
    return out;
}

ControlGrid random_smooth_deformation(int width, int height, double magnitude_px, std::uint64_t seed,
                                      double spacing_px) {
    if (!std::isfinite(magnitude_px) || magnitude_px < 0.0) throw ConfigError("deformation magnitude must be >= 0");
    ControlGrid grid = ControlGrid::for_domain(width, height, spacing_px);
    if (magnitude_px == 0.0) return grid;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        grid.cx[k] = detail::symmetric_uniform(rng, magnitude_px);
        grid.cy[k] = detail::symmetric_uniform(rng, magnitude_px);
    }
    return grid;
}

} // namespace regvar
