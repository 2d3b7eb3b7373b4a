#pragma once

#include "regvar/image.hpp"
#include "regvar/transform.hpp"

#include <filesystem>

namespace regvar::io {

namespace fs = std::filesystem;

/// Binary PGM (P5), 8- or 16-bit. Intensities are scaled to [0, 1] by maxval.
Image2D read_pgm_image(const fs::path& path);
/// Clamps to [0, 1] and quantizes to 8 or 16 bits.
void write_pgm_image(const fs::path& path, const Image2D& img, int bits = 8);

/// Label map stored as integer codes in a P5 PGM. `num_classes` <= 0 infers max + 1.
LabelMap read_pgm_labels(const fs::path& path, int num_classes = 0);
void write_pgm_labels(const fs::path& path, const LabelMap& labels);

/// Raw little-endian float32 payload plus a JSON sidecar next to it (same stem, .json).
/// Image sidecar: {"kind":"image","width":W,"height":H,"spacing":s}
void write_raw_image(const fs::path& path, const Image2D& img);
Image2D read_raw_image(const fs::path& path);

/// Field sidecar: {"kind":"field","width":W,"height":H}; payload is the ux plane then uy.
void write_field(const fs::path& path, const DisplacementField& field);
DisplacementField read_field(const fs::path& path);

/// Grid sidecar: {"kind":"grid","cols":C,"rows":R,"spacing_px":s}; payload is cx then cy.
void write_grid(const fs::path& path, const ControlGrid& grid);
ControlGrid read_grid(const fs::path& path);

/// Dispatches on extension: .pgm -> PGM, anything else -> raw + sidecar.
Image2D read_image(const fs::path& path);
void write_image(const fs::path& path, const Image2D& img);

fs::path raw_path(const fs::path& path);
fs::path sidecar_path(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

} // namespace regvar::io
