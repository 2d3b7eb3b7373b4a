#pragma once

#include "regvar/optimizer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace regvar {

/// One row of a pair manifest. Paths are absolute once loaded; on disk they are
/// stored relative to the manifest's directory. Label paths may be empty (unsupervised).
struct ManifestEntry {
    std::string id;
    std::filesystem::path fixed;
    std::filesystem::path moving;
    std::filesystem::path fixed_labels;
    std::filesystem::path moving_labels;
    std::optional<std::filesystem::path> ground_truth;

    bool has_labels() const noexcept { return !fixed_labels.empty() && !moving_labels.empty(); }
};

using PairManifest = std::vector<ManifestEntry>;

/// Parses a JSON array manifest. Throws DomainError for missing files or duplicate ids.
PairManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const PairManifest& manifest);

/// Loads every file of an entry and checks that dimensions agree. Both label maps
/// share the larger inferred class count.
ImagePair load_pair(const ManifestEntry& entry);

/// Writes a pair next to `dir` as <id>_fixed.raw, <id>_moving.raw, <id>_fixed_labels.pgm,
/// <id>_moving_labels.pgm and (if present) <id>_gt_field.raw; returns the entry.
ManifestEntry save_pair(const std::filesystem::path& dir, const ImagePair& pair);

} // namespace regvar
