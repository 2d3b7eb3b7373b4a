#pragma once

#include "regvar/phantom.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace regvar::testing {

// 32x32 version of the default phantom, small enough for finite differences.
inline PhantomSpec small_phantom() {
    PhantomSpec s;
    s.width = 32;
    s.height = 32;
    s.center_x = 18.0;
    s.center_y = 16.0;
    s.lv_radius = 4.0;
    s.myo_radius = 6.5;
    s.rv_offset = 7.5;
    s.rv_radius = 6.0;
    s.papillary_radius = 0.0;
    s.body_radius_x = 14.5;
    s.body_radius_y = 12.5;
    return s;
}

inline Image2D random_image(int w, int h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image2D img(w, h);
    for (auto& v : img.data()) v = u(rng);
    return img;
}

inline LabelMap random_labels(int w, int h, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> u(0, k - 1);
    LabelMap m(w, h, k);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, static_cast<Label>(u(rng)));
    return m;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh scratch directory under the system temp dir, removed on destruction.
struct ScratchDir {
    std::filesystem::path path;
    explicit ScratchDir(const std::string& tag) {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
};

} // namespace regvar::testing
