#include "regvar/loss.hpp"

#include "regvar/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace regvar {

void LossWeights::validate() const {
    const auto bad = [](double v) { return !std::isfinite(v) || v < 0.0; };
    if (bad(delta) || bad(alpha) || bad(beta)) {
        throw ConfigError("loss weights delta, alpha, beta must be finite and >= 0");
    }
    if (!std::isfinite(epsilon) || epsilon <= 0.0) throw ConfigError("NGF edge parameter epsilon must be > 0");
}

namespace {

double sum_rows(const std::vector<double>& partial) {
    double s = 0.0;
    for (double v : partial) s += v;
    return s;
}

// Entry (xp, x) of the 1D difference operator used by central_gradient.
double diff_coef(int xp, int x, int n, double inv_h, double inv_2h) {
    if (xp == 0) return x == 1 ? inv_h : (x == 0 ? -inv_h : 0.0);
    if (xp == n - 1) return x == n - 1 ? inv_h : (x == n - 2 ? -inv_h : 0.0);
    return x == xp + 1 ? inv_2h : (x == xp - 1 ? -inv_2h : 0.0);
}

// Applies the transpose of central_gradient to a two-channel residual (gather form).
Image2D gradient_adjoint(const Image2D& rx, const Image2D& ry) {
    const int w = rx.width();
    const int h = rx.height();
    const double inv_h = 1.0 / rx.spacing();
    const double inv_2h = 0.5 * inv_h;
    Image2D out(w, h, rx.spacing());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int xp = std::max(x - 1, 0); xp <= std::min(x + 1, w - 1); ++xp) {
                s += diff_coef(xp, x, w, inv_h, inv_2h) * rx(xp, y);
            }
            for (int yp = std::max(y - 1, 0); yp <= std::min(y + 1, h - 1); ++yp) {
                s += diff_coef(yp, y, h, inv_h, inv_2h) * ry(x, yp);
            }
            out(x, y) = s;
        }
    }
    return out;
}

struct WarpedSamples {
    Image2D value;
    std::vector<double> d_dx;
    std::vector<double> d_dy;
};

WarpedSamples warp_with_gradient(const Image2D& src, const DisplacementField& u, double spacing,
                                 bool with_gradient) {
    WarpedSamples out{Image2D(u.width, u.height, spacing), {}, {}};
    if (with_gradient) {
        out.d_dx.assign(u.size(), 0.0);
        out.d_dy.assign(u.size(), 0.0);
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < u.height; ++y) {
        for (int x = 0; x < u.width; ++x) {
            const std::size_t p = u.index(x, y);
            const BilinearSample s = bilinear_sample_with_gradient(src, {x + u.ux[p], y + u.uy[p]});
            out.value(x, y) = s.value;
            if (with_gradient) {
                out.d_dx[p] = s.d_dx;
                out.d_dy[p] = s.d_dy;
            }
        }
    }
    return out;
}

NgfResult ngf_kernel(const GradientField& gf, const Image2D& fixed_norm2, const Image2D& warped, double epsilon,
                     bool with_gradient) {
    const int w = warped.width();
    const int h = warped.height();
    const double sp = warped.spacing();
    const double area = sp * sp;
    const double eps2 = epsilon * epsilon;
    const GradientField gw = central_gradient(warped);

    NgfResult res;
    res.integrand = Image2D(w, h, sp);
    Image2D rx;
    Image2D ry;
    if (with_gradient) {
        rx = Image2D(w, h, sp);
        ry = Image2D(w, h, sp);
    }
    std::vector<double> partial(static_cast<std::size_t>(h), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            const double wx = gw.dx(x, y);
            const double wy = gw.dy(x, y);
            const double fx = gf.dx(x, y);
            const double fy = gf.dy(x, y);
            const double a = wx * fx + wy * fy + eps2;
            const double b = wx * wx + wy * wy + eps2;
            const double c = fixed_norm2(x, y);
            const double value = std::clamp(1.0 - a * a / (b * c), 0.0, 1.0);
            res.integrand(x, y) = value;
            row += value;
            if (with_gradient) {
                // d/d(grad w) of 1/2 * area * (1 - a^2 / (b c))
                const double ab = a / b;
                const double s = area / c;
                rx(x, y) = s * (ab * ab * wx - ab * fx);
                ry(x, y) = s * (ab * ab * wy - ab * fy);
            }
        }
        partial[y] = row;
    }
    res.value = 0.5 * area * sum_rows(partial);
    if (with_gradient) res.d_warped = gradient_adjoint(rx, ry);
    return res;
}

void check_same_shape(const Image2D& a, const Image2D& b, const char* what) {
    if (!a.same_shape(b)) throw DomainError(std::string(what) + ": image dimensions differ");
}

void check_stacks(const OneHotStack& a, const OneHotStack& b) {
    if (a.num_channels() != b.num_channels()) {
        throw DomainError("one-hot stacks have different channel counts (" + std::to_string(a.num_channels()) +
                          " vs " + std::to_string(b.num_channels()) + ")");
    }
    if (a.channels.empty()) throw DomainError("empty one-hot stack");
    for (int k = 0; k < a.num_channels(); ++k) {
        if (!a.channels[k].same_shape(b.channels[k]) || !a.channels[k].same_shape(a.channels.front())) {
            throw DomainError("one-hot channel dimensions differ");
        }
    }
}

GradientField fixed_gradient_for(const Image2D& fixed) { return central_gradient(fixed); }

Image2D norm2_plus_eps(const GradientField& g, double epsilon) {
    Image2D out(g.dx.width(), g.dx.height(), g.dx.spacing());
    const double eps2 = epsilon * epsilon;
    auto dst = out.data();
    const auto gx = g.dx.data();
    const auto gy = g.dy.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = gx[i] * gx[i] + gy[i] * gy[i] + eps2;
    return out;
}

// Chains dL/dw (per pixel) through the sample-position derivatives of the warp.
void accumulate_position_gradient(const Image2D& d_warped, const WarpedSamples& s, DisplacementField& g) {
    const auto dw = d_warped.data();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            const std::size_t p = g.index(x, y);
            g.ux[p] += dw[p] * s.d_dx[p];
            g.uy[p] += dw[p] * s.d_dy[p];
        }
    }
}

// B and dB/du in one pass per channel.
FieldTerm boundary_kernel(const OneHotStack& fixed, const OneHotStack& moving, const DisplacementField& u,
                          bool with_gradient) {
    const int w = u.width;
    const int h = u.height;
    const double sp = fixed.channels.front().spacing();
    const double area = sp * sp;

    FieldTerm term;
    if (with_gradient) term.gradient = DisplacementField(w, h);
    std::vector<double> partial(static_cast<std::size_t>(h), 0.0);
    for (int k = 0; k < fixed.num_channels(); ++k) {
        const Image2D& f = fixed.channels[k];
        const WarpedSamples s = warp_with_gradient(moving.channels[k], u, sp, with_gradient);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) {
            double row = 0.0;
            for (int x = 0; x < w; ++x) {
                const std::size_t p = u.index(x, y);
                const double diff = s.value(x, y) - f(x, y);
                row += diff * diff;
                if (with_gradient) {
                    term.gradient.ux[p] += area * diff * s.d_dx[p];
                    term.gradient.uy[p] += area * diff * s.d_dy[p];
                }
            }
            partial[y] += row;
        }
    }
    term.value = 0.5 * area * sum_rows(partial);
    return term;
}

} // namespace

NgfResult ngf_distance(const Image2D& fixed, const Image2D& warped, double epsilon, bool with_gradient) {
    check_same_shape(fixed, warped, "ngf_distance");
    if (!std::isfinite(epsilon) || epsilon <= 0.0) throw ConfigError("NGF edge parameter epsilon must be > 0");
    Image2D w = warped;
    w.set_spacing(fixed.spacing());
    const GradientField gf = fixed_gradient_for(fixed);
    return ngf_kernel(gf, norm2_plus_eps(gf, epsilon), w, epsilon, with_gradient);
}

FieldTerm curvature(const DisplacementField& field, double spacing, bool with_gradient) {
    if (field.width < 3 || field.height < 3) throw DomainError("curvature needs at least 3x3 pixels");
    const int w = field.width;
    const int h = field.height;
    const double area = spacing * spacing;

    Image2D vx(w, h, spacing);
    Image2D vy(w, h, spacing);
    for (std::size_t p = 0; p < field.size(); ++p) {
        vx.data()[p] = spacing * field.ux[p];
        vy.data()[p] = spacing * field.uy[p];
    }
    const Image2D lx = laplacian(vx);
    const Image2D ly = laplacian(vy);

    std::vector<double> partial(static_cast<std::size_t>(h), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) row += lx(x, y) * lx(x, y) + ly(x, y) * ly(x, y);
        partial[y] = row;
    }

    FieldTerm term;
    term.value = 0.5 * area * sum_rows(partial);
    if (with_gradient) {
        // The replicated-edge Laplacian is symmetric, so its adjoint is itself.
        const Image2D bx = laplacian(lx);
        const Image2D by = laplacian(ly);
        const double scale = area * spacing;
        term.gradient = DisplacementField(w, h);
        for (std::size_t p = 0; p < field.size(); ++p) {
            term.gradient.ux[p] = scale * bx.data()[p];
            term.gradient.uy[p] = scale * by.data()[p];
        }
    }
    return term;
}

SsdResult boundary_ssd(const OneHotStack& fixed, const OneHotStack& warped, bool with_gradient) {
    check_stacks(fixed, warped);
    const int w = fixed.width();
    const int h = fixed.height();
    const double sp = fixed.channels.front().spacing();
    const double area = sp * sp;

    SsdResult res;
    std::vector<double> partial(static_cast<std::size_t>(h), 0.0);
    for (int k = 0; k < fixed.num_channels(); ++k) {
        const Image2D& f = fixed.channels[k];
        const Image2D& m = warped.channels[k];
        Image2D grad;
        if (with_gradient) grad = Image2D(w, h, sp);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) {
            double row = 0.0;
            for (int x = 0; x < w; ++x) {
                const double diff = m(x, y) - f(x, y);
                row += diff * diff;
                if (with_gradient) grad(x, y) = area * diff;
            }
            partial[y] += row;
        }
        if (with_gradient) res.d_warped.channels.push_back(std::move(grad));
    }
    res.value = 0.5 * area * sum_rows(partial);
    return res;
}

FieldTerm ngf_term(const Image2D& fixed, const Image2D& moving, const DisplacementField& field, double epsilon) {
    check_same_shape(fixed, moving, "ngf_term");
    if (field.width != fixed.width() || field.height != fixed.height()) {
        throw DomainError("ngf_term: field and image dimensions differ");
    }
    const GradientField gf = fixed_gradient_for(fixed);
    const WarpedSamples s = warp_with_gradient(moving, field, fixed.spacing(), true);
    const NgfResult ngf = ngf_kernel(gf, norm2_plus_eps(gf, epsilon), s.value, epsilon, true);
    FieldTerm term{ngf.value, DisplacementField(field.width, field.height)};
    accumulate_position_gradient(ngf.d_warped, s, term.gradient);
    return term;
}

FieldTerm boundary_term(const OneHotStack& fixed, const OneHotStack& moving, const DisplacementField& field) {
    check_stacks(fixed, moving);
    if (field.width != fixed.width() || field.height != fixed.height()) {
        throw DomainError("boundary_term: field and stack dimensions differ");
    }
    return boundary_kernel(fixed, moving, field, true);
}

nlohmann::json to_json(const LossReport& report) {
    return {{"d", report.d_value},
            {"r", report.r_value},
            {"b", report.b_value},
            {"total", report.total},
            {"weights",
             {{"delta", report.weights.delta},
              {"alpha", report.weights.alpha},
              {"beta", report.weights.beta},
              {"epsilon", report.weights.epsilon}}}};
}

LossProblem::LossProblem(Image2D fixed, Image2D moving, std::optional<OneHotStack> fixed_onehot,
                         std::optional<OneHotStack> moving_onehot, LossWeights weights, const ControlGrid& shape)
    : fixed_(std::move(fixed)),
      moving_(std::move(moving)),
      fixed_onehot_(std::move(fixed_onehot)),
      moving_onehot_(std::move(moving_onehot)),
      weights_(weights),
      shape_(shape.spacing_px, shape.cols, shape.rows) {
    weights_.validate();
    check_same_shape(fixed_, moving_, "LossProblem");
    if (fixed_.width() < 4 || fixed_.height() < 4) throw DomainError("registration images must be at least 4x4");
    if (fixed_onehot_.has_value() != moving_onehot_.has_value()) {
        throw DomainError("one-hot stacks must be given for both images or neither");
    }
    if (fixed_onehot_) {
        check_stacks(*fixed_onehot_, *moving_onehot_);
        if (fixed_onehot_->width() != fixed_.width() || fixed_onehot_->height() != fixed_.height()) {
            throw DomainError("one-hot stack and image dimensions differ");
        }
        for (auto& c : fixed_onehot_->channels) c.set_spacing(fixed_.spacing());
        for (auto& c : moving_onehot_->channels) c.set_spacing(fixed_.spacing());
    }
    if (!shape_.covers(fixed_.width(), fixed_.height())) {
        throw ConfigError("control grid too small for the image domain");
    }
    fixed_gradient_ = fixed_gradient_for(fixed_);
    fixed_norm2_ = norm2_plus_eps(fixed_gradient_, weights_.epsilon);
}

LossReport LossProblem::value(const ControlGrid& grid) const { return run(grid, false); }

LossReport LossProblem::evaluate(const ControlGrid& grid) const { return run(grid, true); }

LossReport LossProblem::run(const ControlGrid& grid, bool with_gradient) const {
    if (!grid.same_shape(shape_)) throw DomainError("control grid does not match the level geometry");
    const int w = fixed_.width();
    const int h = fixed_.height();
    const double sp = fixed_.spacing();
    const DisplacementField u = densify(grid, w, h);

    LossReport rep;
    rep.weights = weights_;

    const WarpedSamples warped = warp_with_gradient(moving_, u, sp, with_gradient);
    const NgfResult ngf = ngf_kernel(fixed_gradient_, fixed_norm2_, warped.value, weights_.epsilon, with_gradient);
    rep.d_value = ngf.value;

    const FieldTerm reg = curvature(u, sp, with_gradient);
    rep.r_value = reg.value;

    FieldTerm bnd;
    if (fixed_onehot_) {
        bnd = boundary_kernel(*fixed_onehot_, *moving_onehot_, u, with_gradient);
        rep.b_value = bnd.value;
    }

    rep.total = weights_.delta * rep.d_value + weights_.alpha * rep.r_value + weights_.beta * rep.b_value;
    if (!with_gradient) return rep;

    DisplacementField gd(w, h);
    accumulate_position_gradient(ngf.d_warped, warped, gd);
    rep.grad_d = backproject(gd, shape_);
    rep.grad_r = backproject(reg.gradient, shape_);
    rep.grad_b = fixed_onehot_ ? backproject(bnd.gradient, shape_) : ControlGrid(shape_.spacing_px, shape_.cols, shape_.rows);

    rep.gradient = ControlGrid(shape_.spacing_px, shape_.cols, shape_.rows);
    for (std::size_t k = 0; k < rep.gradient.size(); ++k) {
        rep.gradient.cx[k] = weights_.delta * rep.grad_d.cx[k] + weights_.alpha * rep.grad_r.cx[k] +
                             weights_.beta * rep.grad_b.cx[k];
        rep.gradient.cy[k] = weights_.delta * rep.grad_d.cy[k] + weights_.alpha * rep.grad_r.cy[k] +
                             weights_.beta * rep.grad_b.cy[k];
    }
    return rep;
}

LossReport total_loss(const Image2D& fixed, const Image2D& moving, const OneHotStack* fixed_onehot,
                      const OneHotStack* moving_onehot, const ControlGrid& grid, const LossWeights& weights) {
    std::optional<OneHotStack> f;
    std::optional<OneHotStack> m;
    if (fixed_onehot) f = *fixed_onehot;
    if (moving_onehot) m = *moving_onehot;
    const LossProblem problem(fixed, moving, std::move(f), std::move(m), weights, grid);
    return problem.evaluate(grid);
}

} // namespace regvar
