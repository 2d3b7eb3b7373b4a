#pragma once

#include "regvar/image.hpp"
#include "regvar/transform.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace regvar {

/// Label ids used by the cardiac phantom and the evaluation CSV.
enum CardiacLabel : int { kBackground = 0, kLeftVentricle = 1, kMyocardium = 2, kRightVentricle = 3 };

/// 2|A n B| / (|A| + |B|) for one label; 1.0 when both sets are empty.
double dice(const LabelMap& a, const LabelMap& b, int label);

struct EvalReport {
    std::map<int, double> dice;  ///< foreground labels only
    double mean_dice = 0.0;      ///< unweighted mean over foreground labels
    double folding_pct = 0.0;
    std::vector<std::string> outputs;  ///< paths of emitted difference images, if any
};

/// Propagates the moving labels with the field (nearest neighbour) and compares to the fixed labels.
EvalReport evaluate_pair(const LabelMap& fixed_labels, const LabelMap& moving_labels, const DisplacementField& field);

/// Mean |a - b| over pixels where mask != 0 (all pixels when mask is null).
double mean_endpoint_error(const DisplacementField& a, const DisplacementField& b, const LabelMap* mask = nullptr);

/// (a - b) mapped from [-1, 1] to [0, 1]; grey (0.5) means equal.
Image2D difference_image(const Image2D& a, const Image2D& b);

nlohmann::json to_json(const EvalReport& report);

/// Batch CSV: pair_id,dice_lvc,dice_rvc,dice_myo,dice_mean,folding_pct
std::string eval_csv_header();
std::string eval_csv_row(const std::string& pair_id, const EvalReport& report);

/// Shortest round-trippable decimal form used in every CSV the tools write.
std::string format_number(double v);

} // namespace regvar
