#include "regvar/manifest.hpp"

#include "regvar/errors.hpp"
#include "regvar/io.hpp"

#include "json.hpp"

#include <set>

namespace regvar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string relative_to(const fs::path& base, const fs::path& p) {
    if (p.empty()) return {};
    std::error_code ec;
    const fs::path rel = fs::relative(p, base, ec);
    return (ec || rel.empty()) ? p.generic_string() : rel.generic_string();
}

// Raw images and fields are addressed by any name sharing the stem; the payload is the .raw file.
void require_file(const fs::path& path, const std::string& id) {
    const fs::path p = path.extension() == ".pgm" ? path : io::raw_path(path);
    if (!fs::exists(p)) throw DomainError("manifest entry '" + id + "': missing file '" + p.string() + "'");
}

std::string get_string(const json& j, const char* key, bool required, const std::string& id) {
    if (!j.contains(key) || j.at(key).is_null()) {
        if (required) throw DomainError("manifest entry '" + id + "' lacks \"" + key + "\"");
        return {};
    }
    if (!j.at(key).is_string()) throw DomainError("manifest entry '" + id + "': \"" + key + "\" must be a string");
    return j.at(key).get<std::string>();
}

LabelMap with_classes(const LabelMap& m, int k) {
    return LabelMap(m.width(), m.height(), k, std::vector<Label>(m.labels().begin(), m.labels().end()));
}

} // namespace

PairManifest read_manifest(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(io::read_text(path));
    } catch (const json::exception& e) {
        throw DomainError("cannot parse manifest '" + path.string() + "': " + e.what());
    }
    if (!doc.is_array()) throw DomainError("manifest must be a JSON array");

    const fs::path base = fs::absolute(path).parent_path();
    PairManifest out;
    std::set<std::string> ids;
    for (std::size_t n = 0; n < doc.size(); ++n) {
        const json& j = doc[n];
        if (!j.is_object()) throw DomainError("manifest entries must be objects");
        ManifestEntry e;
        e.id = j.contains("id") ? get_string(j, "id", true, "") : "pair" + std::to_string(n);
        if (!ids.insert(e.id).second) throw DomainError("duplicate manifest id '" + e.id + "'");
        e.fixed = resolve(base, get_string(j, "fixed", true, e.id));
        e.moving = resolve(base, get_string(j, "moving", true, e.id));
        const std::string fl = get_string(j, "fixed_labels", false, e.id);
        const std::string ml = get_string(j, "moving_labels", false, e.id);
        if (fl.empty() != ml.empty()) throw DomainError("manifest entry '" + e.id + "' has only one label map");
        if (!fl.empty()) {
            e.fixed_labels = resolve(base, fl);
            e.moving_labels = resolve(base, ml);
        }
        const std::string gt = get_string(j, "ground_truth", false, e.id);
        if (!gt.empty()) e.ground_truth = resolve(base, gt);

        for (const fs::path& p : {e.fixed, e.moving, e.fixed_labels, e.moving_labels}) {
            if (!p.empty()) require_file(p, e.id);
        }
        if (e.ground_truth) require_file(*e.ground_truth, e.id);
        out.push_back(std::move(e));
    }
    return out;
}

void write_manifest(const fs::path& path, const PairManifest& manifest) {
    const fs::path base = fs::absolute(path).parent_path();
    json doc = json::array();
    for (const auto& e : manifest) {
        json j{{"id", e.id}, {"fixed", relative_to(base, e.fixed)}, {"moving", relative_to(base, e.moving)}};
        if (e.has_labels()) {
            j["fixed_labels"] = relative_to(base, e.fixed_labels);
            j["moving_labels"] = relative_to(base, e.moving_labels);
        }
        if (e.ground_truth) j["ground_truth"] = relative_to(base, *e.ground_truth);
        doc.push_back(std::move(j));
    }
    io::write_text(path, doc.dump(2) + "\n");
}

ImagePair load_pair(const ManifestEntry& entry) {
    ImagePair pair;
    pair.id = entry.id;
    pair.fixed = io::read_image(entry.fixed);
    pair.moving = io::read_image(entry.moving);
    const auto mismatch = [&](const std::string& what) {
        return DomainError("manifest entry '" + entry.id + "': " + what + " dimensions differ from the fixed image");
    };
    if (!pair.fixed.same_shape(pair.moving)) throw mismatch("moving image");
    if (entry.has_labels()) {
        LabelMap fl = io::read_pgm_labels(entry.fixed_labels);
        LabelMap ml = io::read_pgm_labels(entry.moving_labels);
        if (fl.width() != pair.fixed.width() || fl.height() != pair.fixed.height()) throw mismatch("fixed labels");
        if (ml.width() != pair.fixed.width() || ml.height() != pair.fixed.height()) throw mismatch("moving labels");
        const int k = std::max(fl.num_classes(), ml.num_classes());
        pair.fixed_labels = with_classes(fl, k);
        pair.moving_labels = with_classes(ml, k);
    }
    if (entry.ground_truth) {
        DisplacementField gt = io::read_field(*entry.ground_truth);
        if (gt.width != pair.fixed.width() || gt.height != pair.fixed.height()) throw mismatch("ground-truth field");
        pair.ground_truth = std::move(gt);
    }
    return pair;
}

ManifestEntry save_pair(const fs::path& dir, const ImagePair& pair) {
    ManifestEntry e;
    e.id = pair.id;
    e.fixed = dir / (pair.id + "_fixed.raw");
    e.moving = dir / (pair.id + "_moving.raw");
    io::write_raw_image(e.fixed, pair.fixed);
    io::write_raw_image(e.moving, pair.moving);
    if (pair.fixed_labels && pair.moving_labels) {
        e.fixed_labels = dir / (pair.id + "_fixed_labels.pgm");
        e.moving_labels = dir / (pair.id + "_moving_labels.pgm");
        io::write_pgm_labels(e.fixed_labels, *pair.fixed_labels);
        io::write_pgm_labels(e.moving_labels, *pair.moving_labels);
    }
    if (pair.ground_truth) {
        e.ground_truth = dir / (pair.id + "_gt_field.raw");
        io::write_field(*e.ground_truth, *pair.ground_truth);
    }
    return e;
}

} // namespace regvar
