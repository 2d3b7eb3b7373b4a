#include "regvar/io.hpp"

#include "regvar/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace regvar::io {

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot open '" + path.string() + "' for writing");
    return out;
}

// Next header token of a PGM file, skipping whitespace and comments.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

struct PgmData {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<int> values;
};

PgmData read_pgm(const fs::path& path) {
    std::ifstream in = open_in(path);
    if (pgm_token(in) != "P5") throw DomainError("'" + path.string() + "' is not a binary PGM (P5)");
    PgmData d;
    try {
        d.width = std::stoi(pgm_token(in));
        d.height = std::stoi(pgm_token(in));
        d.maxval = std::stoi(pgm_token(in));
    } catch (const std::exception&) {
        throw DomainError("malformed PGM header in '" + path.string() + "'");
    }
    if (d.width < 1 || d.height < 1 || d.maxval < 1 || d.maxval > 65535) {
        throw DomainError("invalid PGM header in '" + path.string() + "'");
    }
    const std::size_t n = static_cast<std::size_t>(d.width) * static_cast<std::size_t>(d.height);
    const std::size_t bytes = d.maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw DomainError("truncated PGM '" + path.string() + "'");
    d.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.values[i] = bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
    }
    return d;
}

void write_pgm(const fs::path& path, int width, int height, int maxval, const std::vector<int>& values) {
    std::ofstream out = open_out(path);
    out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
    std::vector<unsigned char> raw;
    raw.reserve(values.size() * 2);
    for (int v : values) {
        if (maxval < 256) {
            raw.push_back(static_cast<unsigned char>(v));
        } else {
            raw.push_back(static_cast<unsigned char>(v >> 8));
            raw.push_back(static_cast<unsigned char>(v & 0xff));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void write_floats(const fs::path& path, const std::vector<const std::vector<double>*>& planes) {
    std::ofstream out = open_out(raw_path(path));
    for (const auto* plane : planes) {
        for (double v : *plane) {
            const float f = static_cast<float>(v);
            const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(f));
            out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
        }
    }
}

std::vector<double> read_floats(const fs::path& path, std::size_t count) {
    std::ifstream in = open_in(raw_path(path));
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) {
            throw DomainError("raw payload '" + raw_path(path).string() + "' is shorter than its header says");
        }
        const float f = std::bit_cast<float>(to_little(bits));
        if (!std::isfinite(f)) throw DomainError("non-finite value in '" + raw_path(path).string() + "'");
        out[i] = f;
    }
    if (in.peek() != EOF) throw DomainError("raw payload '" + raw_path(path).string() + "' has trailing data");
    return out;
}

nlohmann::json read_sidecar(const fs::path& path, const std::string& kind) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(sidecar_path(path)));
    } catch (const nlohmann::json::exception& e) {
        throw DomainError("bad JSON sidecar '" + sidecar_path(path).string() + "': " + e.what());
    }
    if (j.value("kind", kind) != kind) {
        throw DomainError("sidecar '" + sidecar_path(path).string() + "' describes a " + j.value("kind", "") +
                          ", expected " + kind);
    }
    return j;
}

void write_sidecar(const fs::path& path, const nlohmann::json& j) { write_text(sidecar_path(path), j.dump(2) + "\n"); }

} // namespace

fs::path raw_path(const fs::path& path) {
    fs::path p = path;
    return p.replace_extension(".raw");
}

fs::path sidecar_path(const fs::path& path) {
    fs::path p = path;
    return p.replace_extension(".json");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Image2D read_pgm_image(const fs::path& path) {
    const PgmData d = read_pgm(path);
    std::vector<double> data(d.values.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<double>(d.values[i]) / d.maxval;
    return Image2D(d.width, d.height, std::move(data));
}

void write_pgm_image(const fs::path& path, const Image2D& img, int bits) {
    if (bits != 8 && bits != 16) throw ConfigError("PGM bit depth must be 8 or 16");
    const int maxval = bits == 8 ? 255 : 65535;
    std::vector<int> values(img.size());
    const auto src = img.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<int>(std::lround(std::clamp(src[i], 0.0, 1.0) * maxval));
    }
    write_pgm(path, img.width(), img.height(), maxval, values);
}

LabelMap read_pgm_labels(const fs::path& path, int num_classes) {
    const PgmData d = read_pgm(path);
    const int max_label = d.values.empty() ? 0 : *std::max_element(d.values.begin(), d.values.end());
    if (num_classes <= 0) num_classes = max_label + 1;
    std::vector<Label> labels(d.values.begin(), d.values.end());
    return LabelMap(d.width, d.height, num_classes, std::move(labels));
}

void write_pgm_labels(const fs::path& path, const LabelMap& labels) {
    const int maxval = labels.num_classes() <= 256 ? 255 : 65535;
    std::vector<int> values(labels.labels().begin(), labels.labels().end());
    write_pgm(path, labels.width(), labels.height(), maxval, values);
}

void write_raw_image(const fs::path& path, const Image2D& img) {
    const std::vector<double> data(img.data().begin(), img.data().end());
    write_floats(path, {&data});
    write_sidecar(path, {{"kind", "image"}, {"width", img.width()}, {"height", img.height()}, {"spacing", img.spacing()}});
}

Image2D read_raw_image(const fs::path& path) {
    const nlohmann::json j = read_sidecar(path, "image");
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    if (w < 1 || h < 1) throw DomainError("bad image dimensions in sidecar");
    return Image2D(w, h, read_floats(path, static_cast<std::size_t>(w) * h), j.value("spacing", 1.0));
}

void write_field(const fs::path& path, const DisplacementField& field) {
    write_floats(path, {&field.ux, &field.uy});
    write_sidecar(path, {{"kind", "field"}, {"width", field.width}, {"height", field.height}});
}

DisplacementField read_field(const fs::path& path) {
    const nlohmann::json j = read_sidecar(path, "field");
    DisplacementField f(j.at("width").get<int>(), j.at("height").get<int>());
    const std::vector<double> v = read_floats(path, 2 * f.size());
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(f.size()), f.ux.begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(f.size()), v.end(), f.uy.begin());
    return f;
}

void write_grid(const fs::path& path, const ControlGrid& grid) {
    write_floats(path, {&grid.cx, &grid.cy});
    write_sidecar(path, {{"kind", "grid"}, {"cols", grid.cols}, {"rows", grid.rows}, {"spacing_px", grid.spacing_px}});
}

ControlGrid read_grid(const fs::path& path) {
    const nlohmann::json j = read_sidecar(path, "grid");
    ControlGrid g(j.at("spacing_px").get<double>(), j.at("cols").get<int>(), j.at("rows").get<int>());
    const std::vector<double> v = read_floats(path, 2 * g.size());
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(g.size()), g.cx.begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(g.size()), v.end(), g.cy.begin());
    return g;
}

Image2D read_image(const fs::path& path) {
    if (path.extension() == ".pgm") return read_pgm_image(path);
    return read_raw_image(path);
}

void write_image(const fs::path& path, const Image2D& img) {
    if (path.extension() == ".pgm") {
        write_pgm_image(path, img);
    } else {
        write_raw_image(path, img);
    }
}

} // namespace regvar::io
