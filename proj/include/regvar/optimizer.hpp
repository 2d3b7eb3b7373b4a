#pragma once

#include "regvar/image.hpp"
#include "regvar/loss.hpp"
#include "regvar/transform.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace regvar {

struct LineSearchConfig {
    double initial_step = 0.0;  ///< <= 0: 1 / (max |gradient coefficient| + 1e-12), per level
    double armijo = 1.0e-4;
    double backtrack = 0.5;
    int max_backtracks = 30;
};

struct RegistrationConfig {
    LossWeights weights;
    int num_levels = 3;
    double finest_control_spacing_px = 8.0;
    int max_iters_per_level = 100;
    double gradient_tolerance = 1.0e-6;  ///< relative to the first gradient norm of a level
    LineSearchConfig line_search;
    std::uint64_t seed = 0;
    std::string solver = "gradient_descent";

    /// Throws ConfigError; image size is needed to check the coarsest level is >= 8x8.
    void validate(int width, int height) const;
};

nlohmann::json to_json(const RegistrationConfig& cfg);
/// Reads the keys written by to_json; missing keys keep their current values.
void from_json(const nlohmann::json& j, RegistrationConfig& cfg);

enum class Termination { MaxIterations, GradientTolerance, LineSearchFailure };
std::string to_string(Termination t);

struct LevelReport {
    int level = 0;  ///< 0 is the finest
    int width = 0;
    int height = 0;
    double control_spacing_px = 0.0;
    int iterations = 0;
    Termination reason = Termination::MaxIterations;
    std::vector<double> loss_history;  ///< total loss after every accepted step (entry 0: start)
    LossReport final_loss;             ///< values only
};

struct RegistrationResult {
    ControlGrid grid;
    DisplacementField field;
    std::vector<LevelReport> levels;  ///< in solve order, coarsest first
    DeformationQuality quality;
    LossReport final_loss;
    double duration_seconds = 0.0;
};

/// Deterministic part of the result (everything except timing).
nlohmann::json to_json(const RegistrationResult& result);

/// Multi-level registration of `moving` onto `fixed`. Labels are optional; without them
/// (or with beta == 0) the boundary term is dropped and the label maps are never read.
RegistrationResult register_pair(const Image2D& fixed, const Image2D& moving, const LabelMap* fixed_labels,
                                 const LabelMap* moving_labels, const RegistrationConfig& cfg);

/// A fixed/moving pair with optional labels and ground-truth field.
struct ImagePair {
    std::string id;
    Image2D fixed;
    Image2D moving;
    std::optional<LabelMap> fixed_labels;
    std::optional<LabelMap> moving_labels;
    std::optional<DisplacementField> ground_truth;
};

RegistrationResult register_pair(const ImagePair& pair, const RegistrationConfig& cfg);

enum class AblationParameter { Delta, Alpha, Beta };
AblationParameter parse_ablation_parameter(const std::string& name);
std::string to_string(AblationParameter p);

/// Multipliers matching the rows of the weight-variation table.
std::vector<double> default_ablation_factors();

struct AblationRow {
    double factor = 1.0;
    double dice_mean = 0.0;    ///< mean over pairs of the foreground-mean Dice
    double folding_pct = 0.0;  ///< mean over pairs, in percent
};

/// Scales one weight by each factor (others fixed), registers every pair and averages
/// the evaluation metrics. Rows follow the order of `factors`.
std::vector<AblationRow> ablate(const std::vector<ImagePair>& dataset, const RegistrationConfig& cfg,
                                AblationParameter parameter, const std::vector<double>& factors, int jobs = 1);

std::string ablation_csv(const std::vector<AblationRow>& rows);

} // namespace regvar
