#include "doctest.h"

#include "regvar/errors.hpp"
#include "regvar/loss.hpp"
#include "regvar/phantom.hpp"
#include "regvar/reference.hpp"

#include "support.hpp"

#include <omp.h>

#include <cmath>
#include <random>

using namespace regvar;

namespace {

struct Fixture {
    SyntheticPair pair = make_pair(testing::small_phantom(), 1.5, 3, 8.0);
    OneHotStack foh = to_one_hot(pair.fixed_labels);
    OneHotStack moh = to_one_hot(pair.moving_labels);
    ControlGrid at = random_smooth_deformation(32, 32, 1.0, 4, 8.0);
};

double rel(double a, double b) {
    const double d = std::max(std::abs(a), std::abs(b));
    return d == 0.0 ? 0.0 : std::abs(a - b) / d;
}

double max_rel(const ControlGrid& a, const ControlGrid& b) {
    double scale = 0.0;
    double diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        scale = std::max({scale, std::abs(b.cx[k]), std::abs(b.cy[k])});
        diff = std::max({diff, std::abs(a.cx[k] - b.cx[k]), std::abs(a.cy[k] - b.cy[k])});
    }
    return scale == 0.0 ? diff : diff / scale;
}

} // namespace

TEST_CASE("LossWeights defaults and validation") {
    const LossWeights w;
    CHECK(w.delta == 1.0);
    CHECK(w.alpha == 1000.0);
    CHECK(w.beta == 50000.0);
    CHECK(w.epsilon == 0.1);
    CHECK_THROWS_AS((LossWeights{1, -1, 0, 0.1}.validate()), ConfigError);
    CHECK_THROWS_AS((LossWeights{1, 1, 0, 0.0}.validate()), ConfigError);
    CHECK_THROWS_AS((LossWeights{NAN, 1, 0, 0.1}.validate()), ConfigError);
    CHECK_NOTHROW((LossWeights{0, 0, 0, 0.1}.validate()));
}

TEST_CASE("NGF distance values") {
    const auto [img, labels] = make_phantom(PhantomSpec{});
    const NgfResult same = ngf_distance(img, img, 0.1);
    CHECK(same.value == 0.0);
    for (double v : same.integrand.data()) CHECK(v == 0.0);

    const NgfResult flat = ngf_distance(Image2D(6, 6, 1.0, 0.2), Image2D(6, 6, 1.0, 0.9), 0.1);
    CHECK(flat.value == 0.0);

    Image2D fx(5, 5);
    Image2D my(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            fx(x, y) = x;
            my(x, y) = y;
        }
    const double expect = 1.0 - 1e-4 / 1.0201;
    const NgfResult orth = ngf_distance(fx, my, 0.1);
    for (double v : orth.integrand.data()) CHECK(v == doctest::Approx(expect).epsilon(1e-14));
    CHECK(orth.value == doctest::Approx(0.5 * 25 * expect).epsilon(1e-14));

    CHECK_THROWS_AS(ngf_distance(fx, Image2D(4, 5), 0.1), DomainError);
    CHECK_THROWS_AS(ngf_distance(fx, my, 0.0), ConfigError);
}

TEST_CASE("NGF integrand stays in [0, 1]") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const NgfResult r = ngf_distance(testing::random_image(16, 16, rng), testing::random_image(16, 16, rng), 0.05);
        for (double v : r.integrand.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("curvature values") {
    CHECK(curvature(zero_field(8, 8), 1.0).value == 0.0);
    DisplacementField t(8, 8);
    std::fill(t.ux.begin(), t.ux.end(), 3.0);
    CHECK(curvature(t, 1.0).value == 0.0);

    // u1 = x^2: Laplacian 2 inside, 1 at x = 0 and -(2W - 3) at x = W - 1.
    const int w = 9;
    const int h = 6;
    DisplacementField sq(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) sq.ux[sq.index(x, y)] = x * x;
    const double interior = 0.5 * 4.0;
    const double expect = h * ((w - 2) * interior + 0.5 * 1.0 + 0.5 * (2.0 * w - 3) * (2.0 * w - 3));
    CHECK(curvature(sq, 1.0).value == doctest::Approx(expect));

    // Physical units: u in pixels, v = h u, so R is invariant to h in 2D.
    CHECK(curvature(sq, 0.25).value == doctest::Approx(expect));

    // Affine fields only pay at the replicated border.
    DisplacementField aff(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            aff.ux[aff.index(x, y)] = 0.3 * x - 0.2 * y + 1.0;
            aff.uy[aff.index(x, y)] = 0.1 * x;
        }
    // Border Laplacians: u1 gives +-0.3 on the x-border columns, -+0.2 on the y-border rows and
    // their sums at the corners (0.1, -0.5, 0.5, -0.1); u2 gives +-0.1 on the x-border columns.
    const double sum_sq = 0.09 * 2 * (h - 2) + 0.04 * 2 * (w - 2) + (0.01 + 0.25 + 0.25 + 0.01) + 0.01 * 2 * h;
    CHECK(curvature(aff, 1.0).value == doctest::Approx(0.5 * sum_sq));
}

TEST_CASE("boundary SSD values") {
    LabelMap a(6, 6, 2);
    LabelMap b(6, 6, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) {
            a.set(x, y, 1);
            b.set(x + 3, y + 4, 1);
        }
    const OneHotStack sa = to_one_hot(a);
    const OneHotStack sb = to_one_hot(b);
    CHECK(boundary_ssd(sa, sa).value == 0.0);
    CHECK(boundary_ssd(sa, sb).value == 2.0 * 6);  // 2A with A = 6
    CHECK(boundary_ssd(sa, to_one_hot(LabelMap(6, 6, 2))).value == 6.0);
    CHECK_THROWS_AS(boundary_ssd(sa, to_one_hot(LabelMap(6, 6, 3))), DomainError);
}

TEST_CASE("dense-field gradients match finite differences") {
    Fixture fx;
    const DisplacementField u = densify(fx.at, 32, 32);
    const FieldTerm d = ngf_term(fx.pair.fixed, fx.pair.moving, u, 0.1);
    const FieldTerm r = curvature(u, 1.0);
    const FieldTerm b = boundary_term(fx.foh, fx.moh, u);

    const double h = 1e-6;
    for (std::size_t p : {std::size_t{5}, std::size_t{200}, std::size_t{517}, std::size_t{700}, std::size_t{1000}}) {
        DisplacementField up = u;
        DisplacementField um = u;
        up.uy[p] += h;
        um.uy[p] -= h;
        const double fd_d =
            (ngf_term(fx.pair.fixed, fx.pair.moving, up, 0.1).value - ngf_term(fx.pair.fixed, fx.pair.moving, um, 0.1).value) / (2 * h);
        const double fd_r = (curvature(up, 1.0).value - curvature(um, 1.0).value) / (2 * h);
        const double fd_b = (boundary_term(fx.foh, fx.moh, up).value - boundary_term(fx.foh, fx.moh, um).value) / (2 * h);
        CHECK(std::abs(fd_d - d.gradient.uy[p]) <= 1e-6 + 1e-4 * std::abs(fd_d));
        CHECK(std::abs(fd_r - r.gradient.uy[p]) <= 1e-6 + 1e-4 * std::abs(fd_r));
        CHECK(std::abs(fd_b - b.gradient.uy[p]) <= 1e-6 + 1e-4 * std::abs(fd_b));
    }
}

TEST_CASE("coefficient gradients match finite differences") {
    Fixture fx;
    const LossProblem prob(fx.pair.fixed, fx.pair.moving, fx.foh, fx.moh, LossWeights{}, fx.at);
    const LossReport rep = prob.evaluate(fx.at);
    const double h = 1e-6;
    double gmax = 0.0;
    for (double g : rep.gradient.cx) gmax = std::max(gmax, std::abs(g));
    // Tiny entries are all cancellation noise in the difference quotient.
    for (std::size_t k = 0; k < fx.at.size(); k += 3) {
        ControlGrid p = fx.at;
        ControlGrid m = fx.at;
        p.cx[k] += h;
        m.cx[k] -= h;
        const double fd = (prob.value(p).total - prob.value(m).total) / (2 * h);
        CHECK(std::abs(fd - rep.gradient.cx[k]) <= 1e-4 * std::max(std::abs(fd), 1e-2 * gmax));
    }
}

TEST_CASE("total is the weighted sum and value() agrees with evaluate()") {
    Fixture fx;
    const LossWeights w{0.5, 20.0, 300.0, 0.2};
    const LossProblem prob(fx.pair.fixed, fx.pair.moving, fx.foh, fx.moh, w, fx.at);
    const LossReport e = prob.evaluate(fx.at);
    const LossReport v = prob.value(fx.at);
    CHECK(e.total == doctest::Approx(0.5 * e.d_value + 20.0 * e.r_value + 300.0 * e.b_value).epsilon(1e-14));
    CHECK(v.total == e.total);
    CHECK(v.gradient.size() == 0);
    const auto j = to_json(e);
    CHECK(j.at("weights").at("beta") == 300.0);
    CHECK(j.contains("total"));
}

TEST_CASE("M = F with equal labels is an exact minimum") {
    const auto [img, labels] = make_phantom(PhantomSpec{});
    const OneHotStack oh = to_one_hot(labels);
    const ControlGrid zero = ControlGrid::for_domain(112, 112, 8.0);
    const LossReport rep = total_loss(img, img, &oh, &oh, zero, LossWeights{});
    CHECK(rep.total == 0.0);
    // Stored and resampled image gradients round differently, so not bit-exact.
    double n2 = 0.0;
    for (std::size_t k = 0; k < zero.size(); ++k) n2 += rep.gradient.cx[k] * rep.gradient.cx[k] + rep.gradient.cy[k] * rep.gradient.cy[k];
    CHECK(std::sqrt(n2) <= 1e-10);
}

TEST_CASE("parallel loss matches the serial reference") {
    Fixture fx;
    for (const LossWeights& w : {LossWeights{}, LossWeights{1.0, 3.0, 0.0, 0.05}}) {
        const LossReport a = total_loss(fx.pair.fixed, fx.pair.moving, &fx.foh, &fx.moh, fx.at, w);
        const LossReport b = reference::total_loss(fx.pair.fixed, fx.pair.moving, &fx.foh, &fx.moh, fx.at, w);
        CHECK(rel(a.d_value, b.d_value) <= 1e-10);
        CHECK(rel(a.r_value, b.r_value) <= 1e-10);
        CHECK(rel(a.b_value, b.b_value) <= 1e-10);
        CHECK(max_rel(a.grad_d, b.grad_d) <= 1e-10);
        CHECK(max_rel(a.grad_r, b.grad_r) <= 1e-10);
        CHECK(max_rel(a.grad_b, b.grad_b) <= 1e-10);
        CHECK(max_rel(a.gradient, b.gradient) <= 1e-10);
    }
}

TEST_CASE("loss evaluation does not depend on the thread count") {
    Fixture fx;
    const LossProblem prob(fx.pair.fixed, fx.pair.moving, fx.foh, fx.moh, LossWeights{}, fx.at);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const LossReport one = prob.evaluate(fx.at);
    omp_set_num_threads(3);
    const LossReport three = prob.evaluate(fx.at);
    omp_set_num_threads(saved);
    CHECK(one.total == three.total);
    CHECK(one.gradient == three.gradient);
}

TEST_CASE("LossProblem input checks") {
    Fixture fx;
    CHECK_THROWS_AS(LossProblem(fx.pair.fixed, Image2D(31, 32), std::nullopt, std::nullopt, LossWeights{}, fx.at),
                    DomainError);
    CHECK_THROWS_AS(LossProblem(fx.pair.fixed, fx.pair.moving, fx.foh, std::nullopt, LossWeights{}, fx.at),
                    DomainError);
    const LossProblem prob(fx.pair.fixed, fx.pair.moving, std::nullopt, std::nullopt, LossWeights{}, fx.at);
    CHECK(prob.value(fx.at).b_value == 0.0);
    CHECK_THROWS_AS(prob.value(ControlGrid::for_domain(32, 32, 4.0)), DomainError);
}
