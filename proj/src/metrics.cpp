#include "regvar/metrics.hpp"

#include "regvar/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace regvar {

double dice(const LabelMap& a, const LabelMap& b, int label) {
    if (a.width() != b.width() || a.height() != b.height()) throw DomainError("dice: label map dimensions differ");
    if (label < 0 || label >= std::max(a.num_classes(), b.num_classes())) {
        throw DomainError("dice: label " + std::to_string(label) + " out of range");
    }
    const auto la = a.labels();
    const auto lb = b.labels();
    long inter = 0;
    long na = 0;
    long nb = 0;
    for (std::size_t i = 0; i < la.size(); ++i) {
        const bool in_a = la[i] == label;
        const bool in_b = lb[i] == label;
        na += in_a;
        nb += in_b;
        inter += in_a && in_b;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

EvalReport evaluate_pair(const LabelMap& fixed_labels, const LabelMap& moving_labels, const DisplacementField& field) {
    if (field.width != fixed_labels.width() || field.height != fixed_labels.height()) {
        throw DomainError("evaluate_pair: field and fixed label dimensions differ");
    }
    if (fixed_labels.num_classes() != moving_labels.num_classes()) {
        throw DomainError("evaluate_pair: label maps have different class counts");
    }
    const LabelMap warped = warp_labels(moving_labels, field);
    EvalReport rep;
    double sum = 0.0;
    for (int k = 1; k < fixed_labels.num_classes(); ++k) {
        const double d = dice(fixed_labels, warped, k);
        rep.dice[k] = d;
        sum += d;
    }
    rep.mean_dice = rep.dice.empty() ? 1.0 : sum / static_cast<double>(rep.dice.size());
    rep.folding_pct = 100.0 * deformation_quality(field).folding_fraction;
    return rep;
}

double mean_endpoint_error(const DisplacementField& a, const DisplacementField& b, const LabelMap* mask) {
    if (a.width != b.width || a.height != b.height) throw DomainError("endpoint error: field dimensions differ");
    if (mask && (mask->width() != a.width || mask->height() != a.height)) {
        throw DomainError("endpoint error: mask dimensions differ");
    }
    double sum = 0.0;
    long n = 0;
    for (std::size_t p = 0; p < a.size(); ++p) {
        if (mask && mask->labels()[p] == 0) continue;
        sum += std::hypot(a.ux[p] - b.ux[p], a.uy[p] - b.uy[p]);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

Image2D difference_image(const Image2D& a, const Image2D& b) {
    if (!a.same_shape(b)) throw DomainError("difference_image: dimensions differ");
    Image2D out(a.width(), a.height(), a.spacing());
    const auto da = a.data();
    const auto db = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(0.5 * (da[i] - db[i] + 1.0), 0.0, 1.0);
    return out;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json per_label = nlohmann::json::object();
    for (const auto& [label, d] : report.dice) per_label[std::to_string(label)] = d;
    nlohmann::json j{{"dice", per_label}, {"mean_dice", report.mean_dice}, {"folding_pct", report.folding_pct}};
    if (!report.outputs.empty()) j["outputs"] = report.outputs;
    return j;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string eval_csv_header() { return "pair_id,dice_lvc,dice_rvc,dice_myo,dice_mean,folding_pct\n"; }

std::string eval_csv_row(const std::string& pair_id, const EvalReport& report) {
    const auto get = [&](int label) {
        const auto it = report.dice.find(label);
        return it == report.dice.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    };
    return pair_id + "," + format_number(get(kLeftVentricle)) + "," + format_number(get(kRightVentricle)) + "," +
           format_number(get(kMyocardium)) + "," + format_number(report.mean_dice) + "," +
           format_number(report.folding_pct) + "\n";
}

} // namespace regvar
