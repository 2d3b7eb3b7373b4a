#include "doctest.h"

#include "regvar/errors.hpp"
#include "regvar/image.hpp"

#include <cmath>

using namespace regvar;

TEST_CASE("Image2D rejects bad construction") {
    CHECK_THROWS_AS(Image2D(0, 3), DomainError);
    CHECK_THROWS_AS(Image2D(3, 3, -1.0), DomainError);
    CHECK_THROWS_AS(Image2D(2, 2, std::vector<double>{0, 1, NAN, 3}), DomainError);
    CHECK_THROWS_AS(Image2D(2, 2, std::vector<double>{0, 1, 2}), DomainError);
}

TEST_CASE("bilinear_sample") {
    Image2D img(4, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 4; ++x) img(x, y) = 10 * y + x;
    CHECK(bilinear_sample(img, {2, 3}) == img(2, 3));

    const Image2D sq(2, 2, std::vector<double>{0, 1, 2, 3});
    CHECK(bilinear_sample(sq, {0.5, 0.5}) == doctest::Approx(1.5).epsilon(1e-15));

    const Image2D c(3, 3, 1.0, 0.7);
    CHECK(bilinear_sample(c, {1.3, -4.0}) == doctest::Approx(0.7));
    CHECK(bilinear_sample(c, {10.0, 0.2}) == doctest::Approx(0.7));

    CHECK_THROWS_AS(bilinear_sample(c, {NAN, 0}), DomainError);
}

TEST_CASE("bilinear derivatives: analytic inside, zero along clamped axes") {
    Image2D img(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) img(x, y) = 2.0 * x - 3.0 * y;
    const auto s = bilinear_sample_with_gradient(img, {1.25, 2.5});
    CHECK(s.d_dx == doctest::Approx(2.0));
    CHECK(s.d_dy == doctest::Approx(-3.0));
    const auto out = bilinear_sample_with_gradient(img, {-1.0, 7.0});
    CHECK(out.d_dx == 0.0);
    CHECK(out.d_dy == 0.0);
    CHECK(out.value == img(0, 4));
}

TEST_CASE("nearest_sample rounds half up and clamps") {
    LabelMap m(4, 4, 16);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) m.set(x, y, static_cast<Label>(4 * y + x));
    CHECK(nearest_sample(m, {1.4, 2.6}) == m(1, 3));
    CHECK(nearest_sample(m, {1.5, 1.5}) == m(2, 2));
    CHECK(nearest_sample(m, {-3, -3}) == m(0, 0));
    CHECK(nearest_sample(m, {9, 9}) == m(3, 3));
}

TEST_CASE("central_gradient") {
    const Image2D c(5, 5, 1.0, 3.0);
    const auto gc = central_gradient(c);
    for (double v : gc.dx.data()) CHECK(v == 0.0);
    for (double v : gc.dy.data()) CHECK(v == 0.0);

    Image2D lin(6, 5);
    Image2D sq(6, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) {
            lin(x, y) = x;
            sq(x, y) = x * x;
        }
    const auto gl = central_gradient(lin);
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 5; ++x) {
            CHECK(gl.dx(x, y) == 1.0);
            CHECK(gl.dy(x, y) == 0.0);
        }
    CHECK(central_gradient(sq).dx(3, 2) == 6.0);

    Image2D half = lin;
    half.set_spacing(0.5);
    CHECK(central_gradient(half).dx(2, 2) == 2.0);
    CHECK_THROWS_AS(central_gradient(Image2D(2, 5)), DomainError);
}

TEST_CASE("laplacian") {
    Image2D aff(6, 6);
    Image2D sq(6, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
            aff(x, y) = 1.5 + 2.0 * x - 0.5 * y;
            sq(x, y) = x * x;
        }
    const Image2D la = laplacian(aff);
    const Image2D ls = laplacian(sq);
    for (int y = 1; y < 5; ++y)
        for (int x = 1; x < 5; ++x) {
            CHECK(la(x, y) == doctest::Approx(0.0));
            CHECK(ls(x, y) == 2.0);
        }
    const Image2D flat = laplacian(Image2D(4, 4, 1.0, 9.0));
    for (double v : flat.data()) CHECK(v == 0.0);
}

TEST_CASE("downsample") {
    const Image2D c(4, 4, 1.0, 0.25);
    const Image2D d = downsample(c);
    CHECK(d.width() == 2);
    CHECK(d.height() == 2);
    for (double v : d.data()) CHECK(v == 0.25);

    CHECK(downsample(Image2D(2, 2, std::vector<double>{0, 1, 2, 3}))(0, 0) == 1.5);

    const Image2D big(112, 112);
    const Image2D twice = downsample(downsample(big));
    CHECK(twice.width() == 28);
    CHECK(twice.height() == 28);
    CHECK(twice.spacing() == 4.0);

    const Image2D odd = downsample(Image2D(5, 3));
    CHECK(odd.width() == 3);
    CHECK(odd.height() == 2);
}

TEST_CASE("normalize_intensity") {
    const Image2D n = normalize_intensity(Image2D(3, 1, std::vector<double>{0, 50, 100}));
    CHECK(n(0, 0) == 0.0);
    CHECK(n(1, 0) == 0.5);
    CHECK(n(2, 0) == 1.0);
    CHECK(normalize_intensity(n) == n);
    const Image2D flat = normalize_intensity(Image2D(3, 3, 1.0, 4.0));
    for (double v : flat.data()) CHECK(v == 0.0);
}

TEST_CASE("one-hot encoding") {
    const OneHotStack bg = to_one_hot(LabelMap(3, 3, 4));
    REQUIRE(bg.num_channels() == 4);
    for (double v : bg.channels[0].data()) CHECK(v == 1.0);
    for (int k = 1; k < 4; ++k)
        for (double v : bg.channels[k].data()) CHECK(v == 0.0);

    LabelMap m(3, 3, 3);
    m.set(1, 2, 2);
    const OneHotStack s = to_one_hot(m);
    CHECK(s.channels[0](1, 2) == 0.0);
    CHECK(s.channels[1](1, 2) == 0.0);
    CHECK(s.channels[2](1, 2) == 1.0);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) CHECK(s.channels[0](x, y) + s.channels[1](x, y) + s.channels[2](x, y) == 1.0);
    CHECK(argmax(s) == m);
    CHECK_THROWS_AS(m.set(0, 0, 3), DomainError);
}

TEST_CASE("crop") {
    Image2D img(5, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) img(x, y) = 10 * y + x;
    const Image2D c = crop(img, 1, 2, 3, 2);
    CHECK(c.width() == 3);
    CHECK(c(0, 0) == 21);
    CHECK(c(2, 1) == 33);
    CHECK_THROWS_AS(crop(img, 3, 0, 3, 2), DomainError);
}
