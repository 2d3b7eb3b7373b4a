#include "regvar/cli.hpp"

#include "regvar/errors.hpp"
#include "regvar/io.hpp"
#include "regvar/jobs.hpp"
#include "regvar/manifest.hpp"
#include "regvar/metrics.hpp"
#include "regvar/optimizer.hpp"
#include "regvar/phantom.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace regvar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t env_seed() {
    const char* s = std::getenv("REGVAR_SEED");
    if (!s || !*s) return 0;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != std::string(s).size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("REGVAR_SEED is not an unsigned integer: '") + s + "'");
    }
}

json read_json_file(const fs::path& p) {
    try {
        return json::parse(io::read_text(p));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse '" + p.string() + "': " + e.what());
    }
}

// Registration flags shared by `register` and `ablate`. Only flags given on the
// command line override the config file.
struct RegFlags {
    std::string config;
    double delta = 0, alpha = 0, beta = 0, epsilon = 0, spacing = 0;
    int levels = 0, max_iters = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<CLI::Option*, std::function<void(RegistrationConfig&)>>> set;

    void attach(CLI::App* app) {
        const RegistrationConfig d;
        app->add_option("--config", config, "JSON file with registration settings")->check(CLI::ExistingFile);
        add(app->add_option("--delta", delta, "NGF distance weight"), d.weights.delta,
            [this](RegistrationConfig& c) { c.weights.delta = delta; });
        add(app->add_option("--alpha", alpha, "curvature weight"), d.weights.alpha,
            [this](RegistrationConfig& c) { c.weights.alpha = alpha; });
        add(app->add_option("--beta", beta, "boundary (label SSD) weight"), d.weights.beta,
            [this](RegistrationConfig& c) { c.weights.beta = beta; });
        add(app->add_option("--epsilon", epsilon, "NGF edge parameter"), d.weights.epsilon,
            [this](RegistrationConfig& c) { c.weights.epsilon = epsilon; });
        add(app->add_option("--levels", levels, "pyramid levels"), d.num_levels,
            [this](RegistrationConfig& c) { c.num_levels = levels; });
        add(app->add_option("--spacing", spacing, "finest control-point spacing (px)"),
            d.finest_control_spacing_px, [this](RegistrationConfig& c) { c.finest_control_spacing_px = spacing; });
        add(app->add_option("--max-iters", max_iters, "iterations per level"), d.max_iters_per_level,
            [this](RegistrationConfig& c) { c.max_iters_per_level = max_iters; });
        set.emplace_back(app->add_option("--seed", seed, "seed recorded in the report (default $REGVAR_SEED)"),
                         [this](RegistrationConfig& c) { c.seed = seed; });
    }

    template <class T>
    void add(CLI::Option* opt, T def, std::function<void(RegistrationConfig&)> fn) {
        std::ostringstream s;
        s << def;
        opt->default_str(s.str());
        set.emplace_back(opt, std::move(fn));
    }

    RegistrationConfig build() const {
        RegistrationConfig cfg;
        cfg.seed = env_seed();
        if (!config.empty()) {
            try {
                from_json(read_json_file(config), cfg);
            } catch (const json::exception& e) {
                throw ConfigError("bad value in '" + config + "': " + e.what());
            }
        }
        for (const auto& [opt, fn] : set) {
            if (opt->count() > 0) fn(cfg);
        }
        cfg.weights.validate();
        return cfg;
    }
};

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

std::string timing_json(double seconds) { return json{{"duration_seconds", seconds}}.dump(2) + "\n"; }

// Registers one pair and writes grid, field, warped image, report and timing into dir.
EvalReport register_and_write(const ImagePair& pair, const RegistrationConfig& cfg, const fs::path& dir,
                              bool& has_eval) {
    const RegistrationResult res = register_pair(pair, cfg);
    io::write_grid(dir / "grid.raw", res.grid);
    io::write_field(dir / "field.raw", res.field);
    io::write_raw_image(dir / "warped.raw", warp_image(pair.moving, res.field));

    json report{{"id", pair.id}, {"config", to_json(cfg)}, {"result", to_json(res)}};
    EvalReport ev;
    has_eval = pair.fixed_labels && pair.moving_labels;
    if (has_eval) {
        ev = evaluate_pair(*pair.fixed_labels, *pair.moving_labels, res.field);
        report["evaluation"] = to_json(ev);
        report["evaluation_before"] =
            to_json(evaluate_pair(*pair.fixed_labels, *pair.moving_labels, zero_field(res.field.width, res.field.height)));
    }
    if (pair.ground_truth) {
        json epe{{"all", mean_endpoint_error(res.field, *pair.ground_truth)}};
        if (pair.fixed_labels) epe["foreground"] = mean_endpoint_error(res.field, *pair.ground_truth, &*pair.fixed_labels);
        report["endpoint_error_px"] = epe;
    }
    io::write_text(dir / "report.json", report.dump(2) + "\n");
    io::write_text(dir / "timing.json", timing_json(res.duration_seconds));
    return ev;
}

std::vector<ImagePair> load_all(const PairManifest& m, int jobs) {
    std::vector<ImagePair> pairs(m.size());
    run_jobs(m.size(), jobs, [&](std::size_t i) { pairs[i] = load_pair(m[i]); });
    return pairs;
}

int run_synth(const std::string& spec_path, int pairs, double magnitude, double control_spacing,
              CLI::Option* seed_opt, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
    PhantomSpec spec;
    if (!spec_path.empty()) {
        try {
            from_json(read_json_file(spec_path), spec);
        } catch (const json::exception& e) {
            throw ConfigError("bad phantom spec '" + spec_path + "': " + e.what());
        }
    }
    spec.validate();
    if (pairs < 1) throw ConfigError("--pairs must be >= 1");
    if (!(magnitude >= 0.0)) throw ConfigError("--magnitude must be >= 0");
    const std::uint64_t s = seed_opt->count() ? seed : env_seed();

    const auto family = make_pair_family(spec, magnitude, s, pairs, control_spacing);
    PairManifest manifest;
    for (std::size_t i = 0; i < family.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "pair%03zu", i);
        manifest.push_back(save_pair(out_dir, to_image_pair(family[i], id)));
    }
    write_manifest(out_dir / "manifest.json", manifest);
    const json echo{{"phantom", to_json(spec)},
                    {"pairs", pairs},
                    {"magnitude_px", magnitude},
                    {"control_spacing_px", control_spacing},
                    {"seed", s}};
    io::write_text(out_dir / "synth.json", echo.dump(2) + "\n");
    out << "wrote " << manifest.size() << " pairs to " << (out_dir / "manifest.json").string() << "\n";
    return 0;
}

int run_augment(const fs::path& manifest_path, int factor, double magnitude, double control_spacing,
                CLI::Option* seed_opt, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
    const PairManifest in = read_manifest(manifest_path);
    const std::uint64_t s = seed_opt->count() ? seed : env_seed();
    PairManifest manifest;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const ImagePair base = load_pair(in[i]);
        // Per-entry seed so the result does not depend on manifest order.
        const std::uint64_t entry_seed = s ^ fnv1a(base.id);
        for (const auto& p : augment_pair(base, factor, magnitude, entry_seed, control_spacing)) {
            manifest.push_back(save_pair(out_dir, p));
        }
    }
    write_manifest(out_dir / "manifest.json", manifest);
    out << "wrote " << manifest.size() << " pairs to " << (out_dir / "manifest.json").string() << "\n";
    return 0;
}

} // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"regvar: variational B-spline registration of 2D image pairs"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // synth
    auto* synth = app.add_subcommand("synth", "generate labelled phantom pairs with ground-truth fields");
    std::string synth_spec;
    int synth_pairs = 10;
    double synth_mag = 4.0;
    double synth_cs = 16.0;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    synth->add_option("--spec", synth_spec, "phantom spec JSON")->check(CLI::ExistingFile);
    synth->add_option("--pairs", synth_pairs, "number of pairs")->capture_default_str();
    synth->add_option("--magnitude", synth_mag, "max coefficient of the ground-truth deformation (px)")
        ->capture_default_str();
    synth->add_option("--control-spacing", synth_cs, "ground-truth control spacing (px)")->capture_default_str();
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "deformation seed (default $REGVAR_SEED)");
    synth->add_option("--out", synth_out, "output directory")->required();

    // augment
    auto* aug = app.add_subcommand("augment", "expand every manifest pair by random slight deformations");
    std::string aug_manifest;
    int aug_factor = 8;
    double aug_mag = 2.0;
    double aug_cs = 16.0;
    std::uint64_t aug_seed = 0;
    std::string aug_out;
    aug->add_option("--manifest", aug_manifest, "input manifest")->required()->check(CLI::ExistingFile);
    aug->add_option("--factor", aug_factor, "variants per pair")->capture_default_str();
    aug->add_option("--magnitude", aug_mag, "max coefficient (px)")->capture_default_str();
    aug->add_option("--control-spacing", aug_cs, "control spacing (px)")->capture_default_str();
    auto* aug_seed_opt = aug->add_option("--seed", aug_seed, "seed (default $REGVAR_SEED)");
    aug->add_option("--out", aug_out, "output directory")->required();

    // register
    auto* reg = app.add_subcommand("register", "register one pair or every pair of a manifest");
    RegFlags reg_flags;
    reg_flags.attach(reg);
    std::string reg_fixed, reg_moving, reg_fl, reg_ml, reg_manifest, reg_out, reg_id = "pair";
    int reg_jobs = 1;
    auto* reg_fixed_opt = reg->add_option("--fixed", reg_fixed, "fixed image (.pgm or .raw)");
    auto* reg_moving_opt = reg->add_option("--moving", reg_moving, "moving image");
    auto* reg_fl_opt = reg->add_option("--fixed-labels", reg_fl, "fixed label map (.pgm)");
    auto* reg_ml_opt = reg->add_option("--moving-labels", reg_ml, "moving label map (.pgm)");
    auto* reg_manifest_opt = reg->add_option("--manifest", reg_manifest, "pair manifest")->check(CLI::ExistingFile);
    reg->add_option("--id", reg_id, "pair id for single-pair mode")->capture_default_str();
    reg->add_option("--jobs", reg_jobs, "pairs registered concurrently")->capture_default_str();
    reg->add_option("--out", reg_out, "output directory")->required();
    reg_fixed_opt->needs(reg_moving_opt)->excludes(reg_manifest_opt);
    reg_moving_opt->needs(reg_fixed_opt);
    reg_fl_opt->needs(reg_ml_opt)->needs(reg_fixed_opt);
    reg_ml_opt->needs(reg_fl_opt);

    // eval
    auto* ev = app.add_subcommand("eval", "Dice and folding of a field, or of a batch of results");
    std::string ev_field, ev_fl, ev_ml, ev_manifest, ev_results, ev_out, ev_diff_fixed, ev_diff_moving, ev_diff_out;
    int ev_jobs = 1;
    auto* ev_field_opt = ev->add_option("--field", ev_field, "displacement field (.raw)");
    auto* ev_fl_opt = ev->add_option("--fixed-labels", ev_fl, "fixed label map");
    auto* ev_ml_opt = ev->add_option("--moving-labels", ev_ml, "moving label map");
    auto* ev_manifest_opt = ev->add_option("--manifest", ev_manifest, "pair manifest")->check(CLI::ExistingFile);
    auto* ev_results_opt = ev->add_option("--results", ev_results, "directory written by `register --manifest`");
    ev->add_option("--jobs", ev_jobs, "pairs evaluated concurrently")->capture_default_str();
    ev->add_option("--out", ev_out, "output file (JSON, or CSV in batch mode); stdout if omitted");
    auto* ev_df_opt = ev->add_option("--diff-fixed", ev_diff_fixed, "fixed image for a difference image");
    auto* ev_dm_opt = ev->add_option("--diff-moving", ev_diff_moving, "moving image for a difference image");
    auto* ev_do_opt = ev->add_option("--diff-out", ev_diff_out, "difference image path (.pgm)");
    ev_field_opt->needs(ev_fl_opt)->needs(ev_ml_opt)->excludes(ev_manifest_opt);
    ev_manifest_opt->needs(ev_results_opt);
    ev_do_opt->needs(ev_df_opt)->needs(ev_dm_opt)->needs(ev_field_opt);

    // ablate
    auto* abl = app.add_subcommand("ablate", "vary one loss weight over a factor list");
    RegFlags abl_flags;
    abl_flags.attach(abl);
    std::string abl_manifest, abl_param, abl_out;
    std::vector<double> abl_factors = default_ablation_factors();
    int abl_jobs = 1;
    abl->add_option("--manifest", abl_manifest, "labelled pair manifest")->required()->check(CLI::ExistingFile);
    abl->add_option("--param", abl_param, "delta, alpha or beta")->required();
    abl->add_option("--factors", abl_factors, "multipliers of the reference weight")
        ->delimiter(',')
        ->capture_default_str();
    abl->add_option("--jobs", abl_jobs, "pairs registered concurrently")->capture_default_str();
    abl->add_option("--out", abl_out, "CSV path; stdout if omitted");

    // diff
    auto* dif = app.add_subcommand("diff", "difference image (grey = equal)");
    std::string dif_a, dif_b, dif_field, dif_out;
    dif->add_option("--a", dif_a, "first image")->required();
    dif->add_option("--b", dif_b, "second image")->required();
    dif->add_option("--field", dif_field, "warp --b with this field first");
    dif->add_option("--out", dif_out, "output .pgm")->required();

    std::vector<std::string> argv_store{"regvar"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            return run_synth(synth_spec, synth_pairs, synth_mag, synth_cs, synth_seed_opt, synth_seed, synth_out, out);
        }
        if (*aug) return run_augment(aug_manifest, aug_factor, aug_mag, aug_cs, aug_seed_opt, aug_seed, aug_out, out);

        if (*reg) {
            const RegistrationConfig cfg = reg_flags.build();
            const fs::path out_dir(reg_out);
            if (reg_manifest_opt->count()) {
                const PairManifest m = read_manifest(reg_manifest);
                const auto pairs = load_all(m, reg_jobs);
                std::vector<EvalReport> evals(pairs.size());
                std::vector<char> labelled(pairs.size(), 0);
                run_jobs(pairs.size(), reg_jobs, [&](std::size_t i) {
                    bool has = false;
                    evals[i] = register_and_write(pairs[i], cfg, out_dir / pairs[i].id, has);
                    labelled[i] = has;
                });
                std::string csv = eval_csv_header();
                bool any = false;
                for (std::size_t i = 0; i < pairs.size(); ++i) {
                    if (!labelled[i]) continue;
                    any = true;
                    csv += eval_csv_row(pairs[i].id, evals[i]);
                }
                if (any) io::write_text(out_dir / "evaluation.csv", csv);
                out << "registered " << pairs.size() << " pairs into " << out_dir.string() << "\n";
                return 0;
            }
            if (!reg_fixed_opt->count()) throw ConfigError("register needs --fixed/--moving or --manifest");
            ImagePair pair;
            pair.id = reg_id;
            pair.fixed = io::read_image(reg_fixed);
            pair.moving = io::read_image(reg_moving);
            if (reg_fl_opt->count()) {
                LabelMap fl = io::read_pgm_labels(reg_fl);
                LabelMap ml = io::read_pgm_labels(reg_ml);
                const int k = std::max(fl.num_classes(), ml.num_classes());
                pair.fixed_labels = LabelMap(fl.width(), fl.height(), k, {fl.labels().begin(), fl.labels().end()});
                pair.moving_labels = LabelMap(ml.width(), ml.height(), k, {ml.labels().begin(), ml.labels().end()});
            }
            bool has = false;
            const EvalReport e = register_and_write(pair, cfg, out_dir, has);
            if (has) io::write_text(out_dir / "evaluation.csv", eval_csv_header() + eval_csv_row(pair.id, e));
            out << "registered " << pair.id << " into " << out_dir.string() << "\n";
            return 0;
        }

        if (*ev) {
            if (ev_manifest_opt->count()) {
                const PairManifest m = read_manifest(ev_manifest);
                std::vector<std::string> rows(m.size());
                std::vector<char> labelled(m.size(), 0);
                run_jobs(m.size(), ev_jobs, [&](std::size_t i) {
                    const ImagePair p = load_pair(m[i]);
                    if (!p.fixed_labels) return;
                    const DisplacementField f = io::read_field(fs::path(ev_results) / p.id / "field.raw");
                    rows[i] = eval_csv_row(p.id, evaluate_pair(*p.fixed_labels, *p.moving_labels, f));
                    labelled[i] = 1;
                });
                std::string csv = eval_csv_header();
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (labelled[i]) csv += rows[i];
                }
                if (ev_out.empty()) out << csv;
                else io::write_text(ev_out, csv);
                return 0;
            }
            if (!ev_field_opt->count()) throw ConfigError("eval needs --field with labels, or --manifest with --results");
            const DisplacementField f = io::read_field(ev_field);
            LabelMap fl = io::read_pgm_labels(ev_fl);
            LabelMap ml = io::read_pgm_labels(ev_ml);
            const int k = std::max(fl.num_classes(), ml.num_classes());
            fl = LabelMap(fl.width(), fl.height(), k, {fl.labels().begin(), fl.labels().end()});
            ml = LabelMap(ml.width(), ml.height(), k, {ml.labels().begin(), ml.labels().end()});
            EvalReport rep = evaluate_pair(fl, ml, f);
            if (ev_do_opt->count()) {
                const Image2D warped = warp_image(io::read_image(ev_diff_moving), f);
                io::write_pgm_image(ev_diff_out, difference_image(io::read_image(ev_diff_fixed), warped));
                rep.outputs.push_back(ev_diff_out);
            }
            const std::string text = to_json(rep).dump(2) + "\n";
            if (ev_out.empty()) out << text;
            else io::write_text(ev_out, text);
            return 0;
        }

        if (*abl) {
            const RegistrationConfig cfg = abl_flags.build();
            const AblationParameter param = parse_ablation_parameter(abl_param);
            const PairManifest m = read_manifest(abl_manifest);
            const auto rows = ablate(load_all(m, abl_jobs), cfg, param, abl_factors, abl_jobs);
            const std::string csv = ablation_csv(rows);
            if (abl_out.empty()) out << csv;
            else io::write_text(abl_out, csv);
            return 0;
        }

        if (*dif) {
            const Image2D a = io::read_image(dif_a);
            Image2D b = io::read_image(dif_b);
            if (!dif_field.empty()) b = warp_image(b, io::read_field(dif_field));
            io::write_pgm_image(dif_out, difference_image(a, b));
            return 0;
        }
    } catch (const NumericalError& e) {
        err << "regvar: numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "regvar: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "regvar: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 1;
}

int cli_main(const std::vector<std::string>& args) { return cli_main(args, std::cout, std::cerr); }

} // namespace regvar
