#include "regvar/phantom.hpp"

#include "regvar/errors.hpp"
#include "regvar/metrics.hpp"
#include "rng.hpp"

#include <array>
#include <cmath>
#include <random>

namespace regvar {

void PhantomSpec::validate() const {
    if (width < 8 || height < 8) throw ConfigError("phantom must be at least 8x8");
    if (!(lv_radius > 0.0) || !(myo_radius > lv_radius)) {
        throw ConfigError("phantom radii must satisfy 0 < lv_radius < myo_radius");
    }
    if (!(rv_radius > 0.0) || !(rv_offset > 0.0)) throw ConfigError("rv_radius and rv_offset must be positive");
    if (rv_offset + rv_radius <= myo_radius) throw ConfigError("right-ventricle disc lies inside the myocardium");
    if (rv_offset - rv_radius >= myo_radius) {
        throw ConfigError("right-ventricle disc does not touch the myocardium");
    }
    const double left = center_x - rv_offset - rv_radius;
    if (left < 0.0 || center_x + myo_radius > width - 1 || center_y - std::max(myo_radius, rv_radius) < 0.0 ||
        center_y + std::max(myo_radius, rv_radius) > height - 1) {
        throw ConfigError("phantom structures leave the image");
    }
    if (!(noise_amplitude >= 0.0)) throw ConfigError("noise amplitude must be >= 0");
    if (!(papillary_radius >= 0.0) || papillary_radius >= 0.25 * lv_radius) {
        throw ConfigError("papillary_radius must be in [0, lv_radius / 4)");
    }
}

nlohmann::json to_json(const PhantomSpec& s) {
    return {{"width", s.width},
            {"height", s.height},
            {"center_x", s.center_x},
            {"center_y", s.center_y},
            {"lv_radius", s.lv_radius},
            {"myo_radius", s.myo_radius},
            {"rv_offset", s.rv_offset},
            {"rv_radius", s.rv_radius},
            {"papillary_radius", s.papillary_radius},
            {"body_radius_x", s.body_radius_x},
            {"body_radius_y", s.body_radius_y},
            {"background_intensity", s.background_intensity},
            {"body_intensity", s.body_intensity},
            {"lv_intensity", s.lv_intensity},
            {"myo_intensity", s.myo_intensity},
            {"rv_intensity", s.rv_intensity},
            {"noise_amplitude", s.noise_amplitude},
            {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, PhantomSpec& s) {
    const auto take = [&](const char* key, auto& dst) {
        if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    take("width", s.width);
    take("height", s.height);
    take("center_x", s.center_x);
    take("center_y", s.center_y);
    take("lv_radius", s.lv_radius);
    take("myo_radius", s.myo_radius);
    take("rv_offset", s.rv_offset);
    take("rv_radius", s.rv_radius);
    take("papillary_radius", s.papillary_radius);
    take("body_radius_x", s.body_radius_x);
    take("body_radius_y", s.body_radius_y);
    take("background_intensity", s.background_intensity);
    take("body_intensity", s.body_intensity);
    take("lv_intensity", s.lv_intensity);
    take("myo_intensity", s.myo_intensity);
    take("rv_intensity", s.rv_intensity);
    take("noise_amplitude", s.noise_amplitude);
    take("seed", s.seed);
}

std::pair<Image2D, LabelMap> make_phantom(const PhantomSpec& spec) {
    spec.validate();
    Image2D img(spec.width, spec.height);
    LabelMap labels(spec.width, spec.height, 4);
    std::mt19937_64 rng(spec.seed);
    const double rv_cx = spec.center_x - spec.rv_offset;
    const double body_cx = 0.5 * (spec.width - 1);
    const double body_cy = 0.5 * (spec.height - 1);

    // Two papillary muscles at the lower-left and lower-right of the cavity, one trabecula
    // in the middle of the crescent.
    const double pr = spec.papillary_radius;
    const double pd = spec.lv_radius - 2.0 * pr;
    const std::array<Point2, 2> papillary{{{spec.center_x - 0.6 * pd, spec.center_y + 0.8 * pd},
                                           {spec.center_x + 0.7 * pd, spec.center_y + 0.7 * pd}}};
    const Point2 trabecula{spec.center_x - 0.5 * (spec.rv_offset + spec.rv_radius + spec.myo_radius),
                           spec.center_y - 0.35 * spec.rv_radius};
    const auto inside = [pr](double x, double y, Point2 c) {
        return (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= pr * pr;
    };

    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const double dx = x - spec.center_x;
            const double dy = y - spec.center_y;
            const double r2 = dx * dx + dy * dy;
            const double rvx = x - rv_cx;
            const double rv2 = rvx * rvx + dy * dy;
            const double bx = (x - body_cx) / spec.body_radius_x;
            const double by = (y - body_cy) / spec.body_radius_y;

            Label label = kBackground;
            double value = bx * bx + by * by <= 1.0 ? spec.body_intensity : spec.background_intensity;
            if (r2 <= spec.lv_radius * spec.lv_radius) {
                label = kLeftVentricle;
                value = spec.lv_intensity;
                if (pr > 0.0 && (inside(x, y, papillary[0]) || inside(x, y, papillary[1]))) value = spec.myo_intensity;
            } else if (r2 <= spec.myo_radius * spec.myo_radius) {
                label = kMyocardium;
                value = spec.myo_intensity;
            } else if (rv2 <= spec.rv_radius * spec.rv_radius) {
                label = kRightVentricle;
                value = spec.rv_intensity;
                if (pr > 0.0 && inside(x, y, trabecula)) value = spec.myo_intensity;
            }
            labels.set(x, y, label);
            img(x, y) = value + (spec.noise_amplitude > 0.0 ? detail::symmetric_uniform(rng, spec.noise_amplitude) : 0.0);
        }
    }
    return {normalize_intensity(img), std::move(labels)};
}

SyntheticPair make_pair(const PhantomSpec& spec, double magnitude_px, std::uint64_t seed, double control_spacing_px) {
    auto [moving, moving_labels] = make_phantom(spec);
    SyntheticPair pair;
    pair.ground_truth_grid = random_smooth_deformation(spec.width, spec.height, magnitude_px, seed, control_spacing_px);
    pair.ground_truth = densify(pair.ground_truth_grid, spec.width, spec.height);
    pair.fixed = warp_image(moving, pair.ground_truth);
    pair.fixed_labels = warp_labels(moving_labels, pair.ground_truth);
    pair.moving = std::move(moving);
    pair.moving_labels = std::move(moving_labels);
    return pair;
}

std::vector<SyntheticPair> make_pair_family(const PhantomSpec& spec, double magnitude_px, std::uint64_t seed, int count,
                                            double control_spacing_px) {
    if (count < 1) throw ConfigError("pair count must be >= 1");
    std::mt19937_64 seeds(seed);
    std::vector<SyntheticPair> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        PhantomSpec s = spec;
        s.seed = spec.seed + static_cast<std::uint64_t>(i);
        out.push_back(make_pair(s, magnitude_px, seeds(), control_spacing_px));
    }
    return out;
}

std::vector<ImagePair> augment_pair(const ImagePair& pair, int factor, double magnitude_px, std::uint64_t seed,
                                    double control_spacing_px) {
    if (factor < 1) throw ConfigError("augmentation factor must be >= 1");
    std::mt19937_64 seeds(seed);
    const int w = pair.fixed.width();
    const int h = pair.fixed.height();
    std::vector<ImagePair> out;
    out.reserve(static_cast<std::size_t>(factor));
    for (int k = 0; k < factor; ++k) {
        const DisplacementField a = densify(random_smooth_deformation(w, h, magnitude_px, seeds(), control_spacing_px), w, h);
        const DisplacementField b = densify(random_smooth_deformation(w, h, magnitude_px, seeds(), control_spacing_px), w, h);
        ImagePair p;
        p.id = pair.id + "_aug" + std::to_string(k);
        p.fixed = warp_image(pair.fixed, a);
        p.moving = warp_image(pair.moving, b);
        if (pair.fixed_labels) p.fixed_labels = warp_labels(*pair.fixed_labels, a);
        if (pair.moving_labels) p.moving_labels = warp_labels(*pair.moving_labels, b);
        out.push_back(std::move(p));
    }
    return out;
}

ImagePair to_image_pair(const SyntheticPair& pair, std::string id) {
    ImagePair p;
    p.id = std::move(id);
    p.fixed = pair.fixed;
    p.moving = pair.moving;
    p.fixed_labels = pair.fixed_labels;
    p.moving_labels = pair.moving_labels;
    p.ground_truth = pair.ground_truth;
    return p;
}

} // namespace regvar
