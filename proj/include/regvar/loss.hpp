#pragma once

#include "regvar/image.hpp"
#include "regvar/transform.hpp"

#include "json.hpp"

#include <optional>

namespace regvar {

/// L = delta * D + alpha * R + beta * B, with NGF edge parameter epsilon.
struct LossWeights {
    double delta = 1.0;
    double alpha = 1.0e3;
    double beta = 5.0e4;
    double epsilon = 0.1;

    /// Throws ConfigError unless delta, alpha, beta >= 0 and epsilon > 0 (all finite).
    void validate() const;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct NgfResult {
    double value = 0.0;
    Image2D integrand;  ///< per-pixel 1 - <gw,gf>_e^2 / (|gw|_e^2 |gf|_e^2), in [0, 1]
    Image2D d_warped;   ///< dD / d(warped intensity); empty unless requested
};

/// NGF distance between the fixed image and an already-warped moving image.
NgfResult ngf_distance(const Image2D& fixed, const Image2D& warped, double epsilon, bool with_gradient = true);

/// Scalar term with its gradient w.r.t. the dense displacement (pixel units).
struct FieldTerm {
    double value = 0.0;
    DisplacementField gradient;
};

/// R = 1/2 * int sum_j |Lap y_j|^2 over the physical displacement (u * spacing).
FieldTerm curvature(const DisplacementField& field, double spacing, bool with_gradient = true);

struct SsdResult {
    double value = 0.0;
    OneHotStack d_warped;  ///< dB / d(warped channel value); empty unless requested
};

/// B = 1/2 * int |warped - fixed|^2 summed over channels.
SsdResult boundary_ssd(const OneHotStack& fixed, const OneHotStack& warped, bool with_gradient = true);

/// D as a function of the displacement: warps `moving`, evaluates NGF, chains to u.
FieldTerm ngf_term(const Image2D& fixed, const Image2D& moving, const DisplacementField& field, double epsilon);
/// B as a function of the displacement through bilinear one-hot warping.
FieldTerm boundary_term(const OneHotStack& fixed, const OneHotStack& moving, const DisplacementField& field);

struct LossReport {
    double d_value = 0.0;
    double r_value = 0.0;
    double b_value = 0.0;
    double total = 0.0;
    LossWeights weights;
    /// Gradients w.r.t. control coefficients. Empty grids when only values were requested.
    ControlGrid grad_d;
    ControlGrid grad_r;
    ControlGrid grad_b;
    ControlGrid gradient;
};

nlohmann::json to_json(const LossReport& report);

/// One registration level: fixed/moving images (and optional one-hot stacks) with all
/// per-level precomputation done once. Evaluation is OpenMP-parallel with row-ordered
/// reductions, so results do not depend on the thread count.
class LossProblem {
public:
    LossProblem(Image2D fixed, Image2D moving, std::optional<OneHotStack> fixed_onehot,
                std::optional<OneHotStack> moving_onehot, LossWeights weights, const ControlGrid& shape);

    /// Values only (no gradients); used by the line search.
    LossReport value(const ControlGrid& grid) const;
    /// Values plus per-term and combined coefficient gradients.
    LossReport evaluate(const ControlGrid& grid) const;

    const LossWeights& weights() const noexcept { return weights_; }
    const ControlGrid& shape() const noexcept { return shape_; }
    int width() const noexcept { return fixed_.width(); }
    int height() const noexcept { return fixed_.height(); }
    bool has_labels() const noexcept { return fixed_onehot_.has_value(); }

private:
    LossReport run(const ControlGrid& grid, bool with_gradient) const;

    Image2D fixed_;
    Image2D moving_;
    std::optional<OneHotStack> fixed_onehot_;
    std::optional<OneHotStack> moving_onehot_;
    LossWeights weights_;
    ControlGrid shape_;
    GradientField fixed_gradient_;
    Image2D fixed_norm2_;  ///< |grad F|^2 + eps^2
};

/// Eq.-level convenience: builds a LossProblem for the grid's level and evaluates it.
LossReport total_loss(const Image2D& fixed, const Image2D& moving, const OneHotStack* fixed_onehot,
                      const OneHotStack* moving_onehot, const ControlGrid& grid, const LossWeights& weights);

} // namespace regvar
