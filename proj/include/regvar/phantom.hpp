#pragma once

#include "regvar/image.hpp"
#include "regvar/optimizer.hpp"
#include "regvar/transform.hpp"

#include "json.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace regvar {

/// Short-axis cardiac slice mimic: left-ventricle cavity (disc, label 1), myocardium
/// (annulus, label 2) and a right-ventricle crescent (label 3) hugging the annulus,
/// inside an elliptical body outline that carries no label. Small papillary-muscle
/// blobs give the cavities interior texture without changing their labels.
struct PhantomSpec {
    int width = 112;
    int height = 112;
    double center_x = 62.0;  ///< left-ventricle centre
    double center_y = 56.0;
    double lv_radius = 12.0;
    double myo_radius = 20.0;  ///< outer radius of the myocardium
    double rv_offset = 22.0;   ///< distance from the LV centre to the RV disc centre, towards -x
    double rv_radius = 18.0;
    /// Papillary muscles: small myocardium-intensity discs inside the LV cavity (labelled LV),
    /// and one trabecula inside the RV (labelled RV). Radius 0 disables them.
    double papillary_radius = 2.5;
    double body_radius_x = 50.0;
    double body_radius_y = 44.0;
    double background_intensity = 0.0;
    double body_intensity = 0.3;
    double lv_intensity = 0.9;
    double myo_intensity = 0.45;
    double rv_intensity = 0.75;
    double noise_amplitude = 0.02;
    std::uint64_t seed = 1;

    /// Throws ConfigError for non-nested radii or a crescent that does not exist or leaves the image.
    void validate() const;
};

nlohmann::json to_json(const PhantomSpec& spec);
void from_json(const nlohmann::json& j, PhantomSpec& spec);

/// Deterministic given the seed; intensities normalized to [0, 1].
std::pair<Image2D, LabelMap> make_phantom(const PhantomSpec& spec);

/// moving = phantom; fixed = phantom warped by a seeded random B-spline field,
/// so registering moving onto fixed should recover `ground_truth`.
struct SyntheticPair {
    Image2D fixed;
    Image2D moving;
    LabelMap fixed_labels;
    LabelMap moving_labels;
    ControlGrid ground_truth_grid;
    DisplacementField ground_truth;
};

SyntheticPair make_pair(const PhantomSpec& spec, double magnitude_px, std::uint64_t seed,
                        double control_spacing_px = 16.0);

/// `count` pairs; pair i uses noise seed spec.seed + i and a deformation seed drawn from `seed`.
std::vector<SyntheticPair> make_pair_family(const PhantomSpec& spec, double magnitude_px, std::uint64_t seed,
                                            int count = 8, double control_spacing_px = 16.0);

/// Expands one pair into `factor` variants by independently applying slight random
/// deformations to its fixed and moving sides (images and labels together).
std::vector<ImagePair> augment_pair(const ImagePair& pair, int factor = 8, double magnitude_px = 2.0,
                                    std::uint64_t seed = 0, double control_spacing_px = 16.0);

ImagePair to_image_pair(const SyntheticPair& pair, std::string id);

} // namespace regvar
