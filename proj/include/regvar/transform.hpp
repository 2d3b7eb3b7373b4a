#pragma once

#include "regvar/image.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace regvar {

/// Dense displacement u in pixel units of its level; the deformation is y(x) = x + u(x).
/// Components are stored as two planes.
struct DisplacementField {
    int width = 0;
    int height = 0;
    std::vector<double> ux;
    std::vector<double> uy;

    DisplacementField() = default;
    DisplacementField(int w, int h);

    std::size_t size() const noexcept { return ux.size(); }
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }
    Point2 at(int x, int y) const noexcept { return {ux[index(x, y)], uy[index(x, y)]}; }
    void set(int x, int y, Point2 u) noexcept {
        ux[index(x, y)] = u.x;
        uy[index(x, y)] = u.y;
    }

    friend bool operator==(const DisplacementField&, const DisplacementField&) = default;
};

/// Lattice of cubic B-spline coefficients. Control point (i, j) sits at pixel
/// ((i - 1) * spacing_px, (j - 1) * spacing_px), so index 0 is the exterior ring.
struct ControlGrid {
    double spacing_px = 8.0;
    int cols = 0;
    int rows = 0;
    std::vector<double> cx;
    std::vector<double> cy;

    ControlGrid() = default;
    ControlGrid(double spacing_px, int cols, int rows);

    /// Smallest lattice covering a width x height domain: ceil((n - 1) / s) + 3 per axis.
    static ControlGrid for_domain(int width, int height, double spacing_px);

    std::size_t size() const noexcept { return cx.size(); }
    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(i);
    }
    bool same_shape(const ControlGrid& o) const noexcept {
        return cols == o.cols && rows == o.rows && spacing_px == o.spacing_px;
    }
    bool covers(int width, int height) const noexcept;

    friend bool operator==(const ControlGrid&, const ControlGrid&) = default;
};

/// Geometry of one pyramid level: image size and control spacing in that level's pixels.
struct LevelGeometry {
    int width = 0;
    int height = 0;
    double control_spacing_px = 8.0;
};

struct DeformationQuality {
    int width = 0;
    int height = 0;
    std::vector<double> jacobian_det;
    double folding_fraction = 0.0;
};

/// Centered uniform cubic B-spline B3(t), support (-2, 2).
double cubic_bspline(double t) noexcept;

/// Weights of the four active basis functions at local parameter tau in [0, 1].
/// Evaluating outside [0, 1] extends the end polynomial pieces.
std::array<double, 4> cubic_bspline_weights(double tau) noexcept;

/// Per-axis table: for each pixel, the first active coefficient index and its four weights.
struct BsplineAxis {
    std::vector<int> start;
    std::vector<std::array<double, 4>> weight;
};
BsplineAxis make_bspline_axis(int num_pixels, double spacing_px, int num_coeffs);

/// Tensor-product expansion of the grid at every pixel.
DisplacementField densify(const ControlGrid& grid, int width, int height);

/// Transpose of densify: maps a per-pixel vector (e.g. dL/du) to coefficient space.
ControlGrid backproject(const DisplacementField& pixel_values, const ControlGrid& shape);

/// Evaluates the spline at a continuous pixel position. Positions beyond the lattice
/// reuse the outermost polynomial piece, so affine fields extrapolate exactly.
Point2 evaluate_spline(const ControlGrid& grid, Point2 p);

Image2D warp_image(const Image2D& moving, const DisplacementField& field);
OneHotStack warp_onehot(const OneHotStack& stack, const DisplacementField& field);
LabelMap warp_labels(const LabelMap& labels, const DisplacementField& field);

DeformationQuality deformation_quality(const DisplacementField& field);

/// Transfers a coarse-level grid to the next finer level (half the pixel size):
/// fine coefficients are twice the coarse field sampled at fine control locations.
ControlGrid prolongate(const ControlGrid& coarse, const LevelGeometry& fine);

/// Uniform random coefficients in [-magnitude, +magnitude] per axis, seeded.
ControlGrid random_smooth_deformation(int width, int height, double magnitude_px, std::uint64_t seed,
                                      double spacing_px = 16.0);

/// Convenience: the identity field.
DisplacementField zero_field(int width, int height);

} // namespace regvar
