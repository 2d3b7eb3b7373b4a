#include "regvar/reference.hpp"

#include "regvar/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace regvar::reference {

DisplacementField densify(const ControlGrid& grid, int width, int height) {
    if (!grid.covers(width, height)) throw ConfigError("control grid too small for the image domain");
    DisplacementField out(width, height);
    const double s = grid.spacing_px;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double ux = 0.0;
            double uy = 0.0;
            for (int j = 0; j < grid.rows; ++j) {
                const double by = cubic_bspline(y / s - (j - 1));
                if (by == 0.0) continue;
                for (int i = 0; i < grid.cols; ++i) {
                    const double w = cubic_bspline(x / s - (i - 1)) * by;
                    ux += w * grid.cx[grid.index(i, j)];
                    uy += w * grid.cy[grid.index(i, j)];
                }
            }
            out.ux[out.index(x, y)] = ux;
            out.uy[out.index(x, y)] = uy;
        }
    }
    return out;
}

ControlGrid backproject(const DisplacementField& values, const ControlGrid& shape) {
    if (!shape.covers(values.width, values.height)) throw ConfigError("control grid too small for the image domain");
    ControlGrid out(shape.spacing_px, shape.cols, shape.rows);
    const double s = shape.spacing_px;
    for (int y = 0; y < values.height; ++y) {
        for (int x = 0; x < values.width; ++x) {
            const std::size_t p = values.index(x, y);
            for (int j = 0; j < shape.rows; ++j) {
                const double by = cubic_bspline(y / s - (j - 1));
                if (by == 0.0) continue;
                for (int i = 0; i < shape.cols; ++i) {
                    const double w = cubic_bspline(x / s - (i - 1)) * by;
                    out.cx[out.index(i, j)] += w * values.ux[p];
                    out.cy[out.index(i, j)] += w * values.uy[p];
                }
            }
        }
    }
    return out;
}

namespace {

// One-sided at the border, central inside; returns the two taps and their weights.
struct Tap {
    int lo, hi;
    double w;
};

Tap diff_taps(int x, int n, double h) {
    if (x == 0) return {0, 1, 1.0 / h};
    if (x == n - 1) return {n - 2, n - 1, 1.0 / h};
    return {x - 1, x + 1, 0.5 / h};
}

} // namespace

FieldTerm ngf_term(const Image2D& fixed, const Image2D& moving, const DisplacementField& field, double epsilon) {
    const int w = fixed.width();
    const int h = fixed.height();
    const double sp = fixed.spacing();
    const double area = sp * sp;
    const double eps2 = epsilon * epsilon;

    std::vector<double> warped(field.size());
    std::vector<double> sdx(field.size());
    std::vector<double> sdy(field.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = field.index(x, y);
            const BilinearSample s = bilinear_sample_with_gradient(moving, {x + field.ux[p], y + field.uy[p]});
            warped[p] = s.value;
            sdx[p] = s.d_dx;
            sdy[p] = s.d_dy;
        }
    }
    const auto at = [&](const std::vector<double>& v, int x, int y) { return v[field.index(x, y)]; };

    FieldTerm term{0.0, DisplacementField(w, h)};
    std::vector<double> d_warped(field.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Tap tx = diff_taps(x, w, sp);
            const Tap ty = diff_taps(y, h, sp);
            const double wx = (at(warped, tx.hi, y) - at(warped, tx.lo, y)) * tx.w;
            const double wy = (at(warped, x, ty.hi) - at(warped, x, ty.lo)) * ty.w;
            const double fx = (fixed(tx.hi, y) - fixed(tx.lo, y)) * tx.w;
            const double fy = (fixed(x, ty.hi) - fixed(x, ty.lo)) * ty.w;
            const double a = wx * fx + wy * fy + eps2;
            const double b = wx * wx + wy * wy + eps2;
            const double c = fx * fx + fy * fy + eps2;
            term.value += 0.5 * area * std::clamp(1.0 - a * a / (b * c), 0.0, 1.0);

            const double ab = a / b;
            const double rx = area / c * (ab * ab * wx - ab * fx);
            const double ry = area / c * (ab * ab * wy - ab * fy);
            d_warped[field.index(tx.hi, y)] += rx * tx.w;
            d_warped[field.index(tx.lo, y)] -= rx * tx.w;
            d_warped[field.index(x, ty.hi)] += ry * ty.w;
            d_warped[field.index(x, ty.lo)] -= ry * ty.w;
        }
    }
    for (std::size_t p = 0; p < field.size(); ++p) {
        term.gradient.ux[p] = d_warped[p] * sdx[p];
        term.gradient.uy[p] = d_warped[p] * sdy[p];
    }
    return term;
}

FieldTerm curvature(const DisplacementField& field, double spacing) {
    const int w = field.width;
    const int h = field.height;
    const double inv_h2 = 1.0 / (spacing * spacing);
    FieldTerm term{0.0, DisplacementField(w, h)};

    for (int comp = 0; comp < 2; ++comp) {
        const std::vector<double>& u = comp == 0 ? field.ux : field.uy;
        std::vector<double>& g = comp == 0 ? term.gradient.ux : term.gradient.uy;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t c = field.index(x, y);
                const std::size_t nb[4] = {field.index(std::max(x - 1, 0), y), field.index(std::min(x + 1, w - 1), y),
                                           field.index(x, std::max(y - 1, 0)), field.index(x, std::min(y + 1, h - 1))};
                double lap = 0.0;
                for (std::size_t n : nb) lap += spacing * (u[n] - u[c]) * inv_h2;
                term.value += 0.5 * spacing * spacing * lap * lap;
                // d(1/2 h^2 lap^2)/du = h^2 * lap * dlap/du, dlap/du_n = h / h^2
                const double s = spacing * spacing * lap * spacing * inv_h2;
                for (std::size_t n : nb) {
                    g[n] += s;
                    g[c] -= s;
                }
            }
        }
    }
    return term;
}

FieldTerm boundary_term(const OneHotStack& fixed, const OneHotStack& moving, const DisplacementField& field) {
    if (fixed.num_channels() != moving.num_channels()) throw DomainError("one-hot stacks differ in channel count");
    const double sp = fixed.channels.front().spacing();
    const double area = sp * sp;
    FieldTerm term{0.0, DisplacementField(field.width, field.height)};
    for (int y = 0; y < field.height; ++y) {
        for (int x = 0; x < field.width; ++x) {
            const std::size_t p = field.index(x, y);
            for (int k = 0; k < fixed.num_channels(); ++k) {
                const BilinearSample s =
                    bilinear_sample_with_gradient(moving.channels[k], {x + field.ux[p], y + field.uy[p]});
                const double diff = s.value - fixed.channels[k](x, y);
                term.value += 0.5 * area * diff * diff;
                term.gradient.ux[p] += area * diff * s.d_dx;
                term.gradient.uy[p] += area * diff * s.d_dy;
            }
        }
    }
    return term;
}

LossReport total_loss(const Image2D& fixed, const Image2D& moving, const OneHotStack* fixed_onehot,
                      const OneHotStack* moving_onehot, const ControlGrid& grid, const LossWeights& weights) {
    weights.validate();
    const DisplacementField u = reference::densify(grid, fixed.width(), fixed.height());
    LossReport rep;
    rep.weights = weights;

    const FieldTerm d = reference::ngf_term(fixed, moving, u, weights.epsilon);
    const FieldTerm r = reference::curvature(u, fixed.spacing());
    rep.d_value = d.value;
    rep.r_value = r.value;
    rep.grad_d = reference::backproject(d.gradient, grid);
    rep.grad_r = reference::backproject(r.gradient, grid);
    rep.grad_b = ControlGrid(grid.spacing_px, grid.cols, grid.rows);
    if (fixed_onehot && moving_onehot) {
        OneHotStack f = *fixed_onehot;
        for (auto& c : f.channels) c.set_spacing(fixed.spacing());
        const FieldTerm b = reference::boundary_term(f, *moving_onehot, u);
        rep.b_value = b.value;
        rep.grad_b = reference::backproject(b.gradient, grid);
    }
    rep.total = weights.delta * rep.d_value + weights.alpha * rep.r_value + weights.beta * rep.b_value;
    rep.gradient = ControlGrid(grid.spacing_px, grid.cols, grid.rows);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        rep.gradient.cx[k] =
            weights.delta * rep.grad_d.cx[k] + weights.alpha * rep.grad_r.cx[k] + weights.beta * rep.grad_b.cx[k];
        rep.gradient.cy[k] =
            weights.delta * rep.grad_d.cy[k] + weights.alpha * rep.grad_r.cy[k] + weights.beta * rep.grad_b.cy[k];
    }
    return rep;
}

double dice(const LabelMap& a, const LabelMap& b, int label) {
    std::set<std::size_t> sa;
    std::set<std::size_t> sb;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * a.width() + x;
            if (a(x, y) == label) sa.insert(p);
            if (b(x, y) == label) sb.insert(p);
        }
    }
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t common = 0;
    for (std::size_t p : sa) common += sb.count(p);
    return 2.0 * static_cast<double>(common) / static_cast<double>(sa.size() + sb.size());
}

double boundary_ssd(const OneHotStack& fixed, const OneHotStack& warped) {
    const double sp = fixed.channels.front().spacing();
    double s = 0.0;
    for (int k = 0; k < fixed.num_channels(); ++k) {
        for (int y = 0; y < fixed.height(); ++y) {
            for (int x = 0; x < fixed.width(); ++x) {
                const double d = warped.channels[k](x, y) - fixed.channels[k](x, y);
                s += d * d;
            }
        }
    }
    return 0.5 * sp * sp * s;
}

double folding_fraction(const DisplacementField& field) {
    const int w = field.width;
    const int h = field.height;
    // Position map y = x + u, differentiated numerically.
    const auto pos = [&](int x, int y, int comp) {
        const std::size_t p = field.index(x, y);
        return comp == 0 ? x + field.ux[p] : y + field.uy[p];
    };
    int folded = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Tap tx = diff_taps(x, w, 1.0);
            const Tap ty = diff_taps(y, h, 1.0);
            double J[2][2];
            for (int c = 0; c < 2; ++c) {
                J[c][0] = (pos(tx.hi, y, c) - pos(tx.lo, y, c)) * tx.w;
                J[c][1] = (pos(x, ty.hi, c) - pos(x, ty.lo, c)) * ty.w;
            }
            if (J[0][0] * J[1][1] - J[0][1] * J[1][0] <= 0.0) ++folded;
        }
    }
    return static_cast<double>(folded) / static_cast<double>(field.size());
}

} // namespace regvar::reference
