#include "regvar/optimizer.hpp"

#include "regvar/errors.hpp"
#include "regvar/jobs.hpp"
#include "regvar/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace regvar {

void RegistrationConfig::validate(int width, int height) const {
    weights.validate();
    if (num_levels < 1) throw ConfigError("num_levels must be >= 1");
    if (!std::isfinite(finest_control_spacing_px) || finest_control_spacing_px <= 0.0) {
        throw ConfigError("control spacing must be > 0");
    }
    if (max_iters_per_level < 0) throw ConfigError("max_iters_per_level must be >= 0");
    if (!std::isfinite(gradient_tolerance) || gradient_tolerance < 0.0) {
        throw ConfigError("gradient_tolerance must be >= 0");
    }
    if (line_search.armijo <= 0.0 || line_search.armijo >= 1.0) throw ConfigError("Armijo constant must be in (0, 1)");
    if (line_search.backtrack <= 0.0 || line_search.backtrack >= 1.0) {
        throw ConfigError("backtrack factor must be in (0, 1)");
    }
    if (line_search.max_backtracks < 0) throw ConfigError("max_backtracks must be >= 0");
    if (solver != "gradient_descent") throw ConfigError("unsupported solver '" + solver + "'");
    int w = width;
    int h = height;
    for (int l = 1; l < num_levels; ++l) {
        w = (w + 1) / 2;
        h = (h + 1) / 2;
    }
    if (w < 8 || h < 8) {
        throw ConfigError("coarsest level would be " + std::to_string(w) + "x" + std::to_string(h) +
                          "; reduce num_levels (coarsest must be >= 8x8)");
    }
}

nlohmann::json to_json(const RegistrationConfig& cfg) {
    return {{"delta", cfg.weights.delta},
            {"alpha", cfg.weights.alpha},
            {"beta", cfg.weights.beta},
            {"epsilon", cfg.weights.epsilon},
            {"levels", cfg.num_levels},
            {"spacing", cfg.finest_control_spacing_px},
            {"max_iters", cfg.max_iters_per_level},
            {"gradient_tolerance", cfg.gradient_tolerance},
            {"initial_step", cfg.line_search.initial_step},
            {"armijo", cfg.line_search.armijo},
            {"backtrack", cfg.line_search.backtrack},
            {"max_backtracks", cfg.line_search.max_backtracks},
            {"seed", cfg.seed},
            {"solver", cfg.solver}};
}

void from_json(const nlohmann::json& j, RegistrationConfig& cfg) {
    const auto take = [&](const char* key, auto& dst) {
        if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    take("delta", cfg.weights.delta);
    take("alpha", cfg.weights.alpha);
    take("beta", cfg.weights.beta);
    take("epsilon", cfg.weights.epsilon);
    take("levels", cfg.num_levels);
    take("spacing", cfg.finest_control_spacing_px);
    take("max_iters", cfg.max_iters_per_level);
    take("gradient_tolerance", cfg.gradient_tolerance);
    take("initial_step", cfg.line_search.initial_step);
    take("armijo", cfg.line_search.armijo);
    take("backtrack", cfg.line_search.backtrack);
    take("max_backtracks", cfg.line_search.max_backtracks);
    take("seed", cfg.seed);
    take("solver", cfg.solver);
}

std::string to_string(Termination t) {
    switch (t) {
    case Termination::MaxIterations: return "max_iterations";
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::LineSearchFailure: return "line_search_failure";
    }
    return "unknown";
}

namespace {

double squared_norm(const ControlGrid& g) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += g.cx[k] * g.cx[k] + g.cy[k] * g.cy[k];
    return s;
}

double max_abs(const ControlGrid& g) {
    double m = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) m = std::max({m, std::abs(g.cx[k]), std::abs(g.cy[k])});
    return m;
}

ControlGrid step_along(const ControlGrid& x, const ControlGrid& direction, double t) {
    ControlGrid out = x;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out.cx[k] -= t * direction.cx[k];
        out.cy[k] -= t * direction.cy[k];
    }
    return out;
}

[[noreturn]] void numerical_failure(const RegistrationConfig& cfg, int level, int iteration, double value) {
    std::ostringstream msg;
    msg << "non-finite loss (" << value << ") at level " << level << ", iteration " << iteration
        << " with delta=" << cfg.weights.delta << " alpha=" << cfg.weights.alpha << " beta=" << cfg.weights.beta
        << " epsilon=" << cfg.weights.epsilon;
    throw NumericalError(msg.str());
}

// Steepest descent with Armijo backtracking on one level. Updates `grid` in place.
LevelReport solve_level(const LossProblem& problem, ControlGrid& grid, const RegistrationConfig& cfg, int level) {
    const LineSearchConfig& ls = cfg.line_search;
    LevelReport rep;
    rep.level = level;
    rep.width = problem.width();
    rep.height = problem.height();
    rep.control_spacing_px = grid.spacing_px;

    LossReport current = problem.evaluate(grid);
    if (!std::isfinite(current.total)) numerical_failure(cfg, level, 0, current.total);
    rep.loss_history.push_back(current.total);

    const double g0 = std::sqrt(squared_norm(current.gradient));
    double step = ls.initial_step > 0.0 ? ls.initial_step : 1.0 / (max_abs(current.gradient) + 1e-12);
    rep.reason = Termination::MaxIterations;

    for (int it = 0; it < cfg.max_iters_per_level; ++it) {
        const double g2 = squared_norm(current.gradient);
        if (std::sqrt(g2) <= cfg.gradient_tolerance * g0) {
            rep.reason = Termination::GradientTolerance;
            break;
        }
        double t = step;
        bool accepted = false;
        ControlGrid candidate;
        for (int bt = 0; bt <= ls.max_backtracks; ++bt) {
            candidate = step_along(grid, current.gradient, t);
            const double value = problem.value(candidate).total;
            if (!std::isfinite(value)) numerical_failure(cfg, level, it + 1, value);
            if (value <= current.total - ls.armijo * t * g2) {
                accepted = true;
                break;
            }
            t *= ls.backtrack;
        }
        if (!accepted) {
            rep.reason = Termination::LineSearchFailure;
            break;
        }
        grid = std::move(candidate);
        current = problem.evaluate(grid);
        if (!std::isfinite(current.total)) numerical_failure(cfg, level, it + 1, current.total);
        rep.loss_history.push_back(current.total);
        ++rep.iterations;
        step = t / ls.backtrack;
    }
    rep.final_loss = current;
    rep.final_loss.grad_d = rep.final_loss.grad_r = rep.final_loss.grad_b = rep.final_loss.gradient = ControlGrid{};
    return rep;
}

} // namespace

RegistrationResult register_pair(const Image2D& fixed, const Image2D& moving, const LabelMap* fixed_labels,
                                 const LabelMap* moving_labels, const RegistrationConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    if (!fixed.same_shape(moving)) throw DomainError("fixed and moving images differ in size");
    cfg.validate(fixed.width(), fixed.height());

    LossWeights weights = cfg.weights;
    const bool use_labels = weights.beta > 0.0 && (fixed_labels != nullptr || moving_labels != nullptr);
    if (use_labels) {
        if (fixed_labels == nullptr || moving_labels == nullptr) {
            throw DomainError("both label maps are required when one is given");
        }
        if (fixed_labels->num_classes() != moving_labels->num_classes()) {
            throw DomainError("label maps have different class counts");
        }
        if (fixed_labels->width() != fixed.width() || fixed_labels->height() != fixed.height() ||
            moving_labels->width() != fixed.width() || moving_labels->height() != fixed.height()) {
            throw DomainError("label map and image dimensions differ");
        }
    } else {
        weights.beta = 0.0;
    }

    // Pyramids, finest first.
    std::vector<Image2D> fixed_pyr{fixed};
    std::vector<Image2D> moving_pyr{moving};
    moving_pyr.front().set_spacing(fixed.spacing());
    std::vector<OneHotStack> fixed_oh;
    std::vector<OneHotStack> moving_oh;
    if (use_labels) {
        fixed_oh.push_back(to_one_hot(*fixed_labels));
        moving_oh.push_back(to_one_hot(*moving_labels));
        for (auto* s : {&fixed_oh.front(), &moving_oh.front()})
            for (auto& c : s->channels) c.set_spacing(fixed.spacing());
    }
    for (int l = 1; l < cfg.num_levels; ++l) {
        fixed_pyr.push_back(downsample(fixed_pyr.back()));
        moving_pyr.push_back(downsample(moving_pyr.back()));
        if (use_labels) {
            fixed_oh.push_back(downsample(fixed_oh.back()));
            moving_oh.push_back(downsample(moving_oh.back()));
        }
    }

    RegistrationResult result;
    ControlGrid grid;
    for (int l = cfg.num_levels - 1; l >= 0; --l) {
        const LevelGeometry geom{fixed_pyr[l].width(), fixed_pyr[l].height(), cfg.finest_control_spacing_px};
        if (l == cfg.num_levels - 1) {
            grid = ControlGrid::for_domain(geom.width, geom.height, geom.control_spacing_px);
        } else {
            grid = prolongate(grid, geom);
        }
        std::optional<OneHotStack> foh;
        std::optional<OneHotStack> moh;
        if (use_labels) {
            foh = fixed_oh[l];
            moh = moving_oh[l];
        }
        const LossProblem problem(fixed_pyr[l], moving_pyr[l], std::move(foh), std::move(moh), weights, grid);
        result.levels.push_back(solve_level(problem, grid, cfg, l));
    }

    result.grid = grid;
    result.field = densify(grid, fixed.width(), fixed.height());
    result.quality = deformation_quality(result.field);
    result.final_loss = result.levels.back().final_loss;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    result.duration_seconds = std::max(elapsed.count(), std::numeric_limits<double>::min());
    return result;
}

RegistrationResult register_pair(const ImagePair& pair, const RegistrationConfig& cfg) {
    const bool labels = pair.fixed_labels && pair.moving_labels && cfg.weights.beta > 0.0;
    return register_pair(pair.fixed, pair.moving, labels ? &*pair.fixed_labels : nullptr,
                         labels ? &*pair.moving_labels : nullptr, cfg);
}

nlohmann::json to_json(const RegistrationResult& result) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : result.levels) {
        levels.push_back({{"level", l.level},
                          {"width", l.width},
                          {"height", l.height},
                          {"control_spacing_px", l.control_spacing_px},
                          {"iterations", l.iterations},
                          {"termination", to_string(l.reason)},
                          {"loss_history", l.loss_history},
                          {"final_loss", to_json(l.final_loss)}});
    }
    return {{"levels", levels},
            {"final_loss", to_json(result.final_loss)},
            {"folding_fraction", result.quality.folding_fraction},
            {"folding_pct", 100.0 * result.quality.folding_fraction},
            {"grid", {{"cols", result.grid.cols}, {"rows", result.grid.rows}, {"spacing_px", result.grid.spacing_px}}}};
}

AblationParameter parse_ablation_parameter(const std::string& name) {
    if (name == "delta") return AblationParameter::Delta;
    if (name == "alpha") return AblationParameter::Alpha;
    if (name == "beta") return AblationParameter::Beta;
    throw ConfigError("unknown ablation parameter '" + name + "' (expected delta, alpha or beta)");
}

std::string to_string(AblationParameter p) {
    switch (p) {
    case AblationParameter::Delta: return "delta";
    case AblationParameter::Alpha: return "alpha";
    case AblationParameter::Beta: return "beta";
    }
    return "unknown";
}

std::vector<double> default_ablation_factors() { return {100.0, 10.0, 1.0, 0.1, 0.01, 0.0}; }

std::vector<AblationRow> ablate(const std::vector<ImagePair>& dataset, const RegistrationConfig& cfg,
                                AblationParameter parameter, const std::vector<double>& factors, int jobs) {
    if (dataset.empty()) throw ConfigError("ablation dataset is empty");
    if (std::find(factors.begin(), factors.end(), 1.0) == factors.end()) {
        throw ConfigError("ablation factors must include 1");
    }
    for (const auto& p : dataset) {
        if (!p.fixed_labels || !p.moving_labels) throw DomainError("ablation pair '" + p.id + "' has no labels");
    }

    std::vector<AblationRow> rows;
    for (double factor : factors) {
        if (!std::isfinite(factor) || factor < 0.0) throw ConfigError("ablation factors must be finite and >= 0");
        RegistrationConfig run = cfg;
        switch (parameter) {
        case AblationParameter::Delta: run.weights.delta *= factor; break;
        case AblationParameter::Alpha: run.weights.alpha *= factor; break;
        case AblationParameter::Beta: run.weights.beta *= factor; break;
        }
        std::vector<EvalReport> evals(dataset.size());
        run_jobs(dataset.size(), jobs, [&](std::size_t i) {
            const RegistrationResult res = register_pair(dataset[i], run);
            evals[i] = evaluate_pair(*dataset[i].fixed_labels, *dataset[i].moving_labels, res.field);
        });
        AblationRow row;
        row.factor = factor;
        for (const auto& e : evals) {
            row.dice_mean += e.mean_dice;
            row.folding_pct += e.folding_pct;
        }
        row.dice_mean /= static_cast<double>(evals.size());
        row.folding_pct /= static_cast<double>(evals.size());
        rows.push_back(row);
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "factor,dice_mean,folding_pct\n";
    for (const auto& r : rows) {
        out += format_number(r.factor) + "," + format_number(r.dice_mean) + "," + format_number(r.folding_pct) + "\n";
    }
    return out;
}

} // namespace regvar
