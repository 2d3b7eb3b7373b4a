#include "doctest.h"

#include "regvar/errors.hpp"
#include "regvar/metrics.hpp"
#include "regvar/phantom.hpp"
#include "regvar/reference.hpp"

#include "support.hpp"

#include <cmath>
#include <random>

using namespace regvar;

namespace {

LabelMap square(int x0, int y0, int side) {
    LabelMap m(6, 6, 2);
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) m.set(x, y, 1);
    return m;
}

} // namespace

TEST_CASE("dice") {
    const LabelMap a = square(0, 0, 2);
    CHECK(dice(a, a, 1) == 1.0);
    CHECK(dice(a, square(3, 3, 2), 1) == 0.0);
    CHECK(dice(a, square(1, 0, 2), 1) == 0.5);
    CHECK(dice(LabelMap(6, 6, 3), LabelMap(6, 6, 3), 2) == 1.0);
    CHECK(dice(a, LabelMap(6, 6, 2), 1) == 0.0);
    CHECK_THROWS_AS(dice(a, LabelMap(5, 6, 2), 1), DomainError);
    CHECK_THROWS_AS(dice(a, a, 7), DomainError);

    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
        const LabelMap x = testing::random_labels(12, 9, 4, rng);
        const LabelMap y = testing::random_labels(12, 9, 4, rng);
        for (int k = 0; k < 4; ++k) {
            CHECK(dice(x, y, k) == dice(y, x, k));
            CHECK(dice(x, y, k) == reference::dice(x, y, k));
        }
    }
}

TEST_CASE("evaluate_pair") {
    const auto [img, labels] = make_phantom(PhantomSpec{});
    const EvalReport same = evaluate_pair(labels, labels, zero_field(112, 112));
    CHECK(same.mean_dice == 1.0);
    CHECK(same.folding_pct == 0.0);
    CHECK(same.dice.size() == 3);
    CHECK_FALSE(same.dice.contains(0));

    // Identity reproduces the "before" Dice exactly.
    const SyntheticPair p = make_pair(PhantomSpec{}, 4.0, 3);
    const EvalReport before = evaluate_pair(p.fixed_labels, p.moving_labels, zero_field(112, 112));
    double sum = 0.0;
    for (int k = 1; k <= 3; ++k) sum += dice(p.fixed_labels, p.moving_labels, k);
    CHECK(before.mean_dice == doctest::Approx(sum / 3.0).epsilon(1e-15));

    // The ground-truth field maps moving labels onto fixed labels by construction.
    const EvalReport gt = evaluate_pair(p.fixed_labels, p.moving_labels, p.ground_truth);
    CHECK(gt.mean_dice >= 0.99);
}

TEST_CASE("mean_endpoint_error") {
    DisplacementField a(4, 4);
    DisplacementField b(4, 4);
    std::fill(b.ux.begin(), b.ux.end(), 3.0);
    std::fill(b.uy.begin(), b.uy.end(), 4.0);
    CHECK(mean_endpoint_error(a, b) == 5.0);
    LabelMap mask(4, 4, 2);
    mask.set(1, 1, 1);
    a.ux[a.index(1, 1)] = 3.0;
    CHECK(mean_endpoint_error(a, b, &mask) == 4.0);
}

TEST_CASE("difference_image") {
    const Image2D a(3, 3, 1.0, 0.4);
    const Image2D grey = difference_image(a, a);
    for (double v : grey.data()) CHECK(v == 0.5);
    const Image2D one(1, 1, 1.0, 1.0);
    const Image2D zero(1, 1, 1.0, 0.0);
    CHECK(difference_image(one, zero)(0, 0) == 1.0);
    CHECK(difference_image(zero, one)(0, 0) == 0.0);
    CHECK_THROWS_AS(difference_image(a, one), DomainError);
}

TEST_CASE("CSV formatting") {
    CHECK(eval_csv_header() == "pair_id,dice_lvc,dice_rvc,dice_myo,dice_mean,folding_pct\n");
    EvalReport r;
    r.dice = {{1, 0.5}, {2, 0.25}, {3, 1.0}};
    r.mean_dice = 0.5833333333333334;
    r.folding_pct = 0.0;
    CHECK(eval_csv_row("p", r) == "p,0.5,1,0.25,0.5833333333333334,0\n");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(NAN) == "nan");
    const auto j = to_json(r);
    CHECK(j.at("dice").at("2") == 0.25);
}

TEST_CASE("folding and boundary SSD match brute force") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int c = 0; c < 10; ++c) {
        DisplacementField f(10, 10);
        for (std::size_t p = 0; p < f.size(); ++p) {
            f.ux[p] = 0.2 * c * u(rng);
            f.uy[p] = 0.2 * c * u(rng);
        }
        CHECK(deformation_quality(f).folding_fraction == reference::folding_fraction(f));
        const OneHotStack a = to_one_hot(testing::random_labels(10, 10, 3, rng));
        const OneHotStack b = to_one_hot(testing::random_labels(10, 10, 3, rng));
        CHECK(boundary_ssd(a, b, false).value == reference::boundary_ssd(a, b));
    }
}
