#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mplab/attacks.hpp"
#include "mplab/errors.hpp"
#include "mplab/models.hpp"

using namespace mplab;

namespace {

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vec v(n);
    for (double& x : v) x = g(rng);
    return v;
}

double linf(const Vec& a, ConstSpan b) {
    double n = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) n = std::max(n, std::abs(a[j] - b[j]));
    return n;
}

}  // namespace

TEST_CASE("fgsm with zero radius is the identity") {
    LinearModel m(Vec{2.0, -1.0});
    Vec x{0.5, 0.3};
    CHECK(fgsm(m, x, 1, 0.0) == x);
}

TEST_CASE("fgsm moves along -y sign(theta)") {
    LinearModel m(Vec{2.0, -1.0});
    Vec adv = fgsm(m, Vec{0.5, 0.3}, 1, 0.1);
    CHECK(adv[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(adv[1] == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("fgsm can push a correctly labelled point across the teacher boundary") {
    LinearModel teacher(Vec{1.0, 0.0});
    Vec adv = fgsm(teacher, Vec{0.05, 0.7}, 1, 0.1);
    CHECK(adv[0] == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(adv[1] == 0.7);
    CHECK(predict(teacher, adv) == -1);
}

TEST_CASE("uncapped BIM with early stop halts at the first flip") {
    LinearModel m(Vec{1.0, 0.0});
    AttackConfig cfg = bim_config(kUncapped, 0.01, 1000);
    cfg.early_stop_on_flip = true;
    AttackResult r = iterated_attack(m, Vec{0.055, 0.4}, 1, cfg);
    CHECK(r.iterations == 6);
    CHECK(r.flipped);
    CHECK(r.x[0] == doctest::Approx(-0.005).epsilon(1e-9));
    CHECK(r.x[1] == 0.4);
}

TEST_CASE("BIM without early stop runs every iteration") {
    LinearModel m(Vec{1.0, 0.0});
    AttackResult r = iterated_attack(m, Vec{0.055, 0.4}, 1, bim_config(0.1, 0.01, 20));
    CHECK(r.iterations == 20);
    CHECK(r.x[0] == doctest::Approx(-0.045).epsilon(1e-9));
}

TEST_CASE("fgsm equals one full-size BIM step bit-for-bit") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> e(0.001, 1.0);
    std::vector<std::size_t> dims{3, 8, 3};
    for (int t = 0; t < 300; ++t) {
        double eps = e(rng);
        Vec x = random_vec(rng, 3);
        if (t % 2 == 0) {
            LinearModel m(random_vec(rng, 3), 0.2);
            int y = (rng() & 1) ? 1 : -1;
            CHECK(fgsm(m, x, y, eps) == iterated_attack(m, x, y, bim_config(eps, eps, 1)).x);
        } else {
            TinyMLP m = TinyMLP::random(dims, rng());
            int y = static_cast<int>(rng() % 3);
            CHECK(fgsm(m, x, y, eps) == iterated_attack(m, x, y, bim_config(eps, eps, 1)).x);
        }
    }
}

TEST_CASE("attack outputs stay inside the declared ball") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> e(0.001, 0.5);
    std::vector<std::size_t> dims{4, 16, 3};
    for (int t = 0; t < 300; ++t) {
        double eps = e(rng);
        AttackConfig cfg = bim_config(eps, eps * (0.1 + 1.9 * (t % 10) / 10.0), 1 + t % 15);
        cfg.random_init = t % 3 == 0;
        cfg.seed = static_cast<std::uint64_t>(t);
        Vec x = random_vec(rng, 4);
        Vec adv;
        if (t % 2 == 0) {
            adv = iterated_attack(LinearModel(random_vec(rng, 4)), x, 1, cfg).x;
        } else {
            adv = iterated_attack(TinyMLP::random(dims, rng()), x, 2, cfg, Direction::descend).x;
        }
        CHECK(linf(adv, x) <= eps + 1e-12);
    }
}

TEST_CASE("optional box domain clips every coordinate") {
    LinearModel m(Vec{1.0, -1.0});
    AttackConfig cfg = bim_config(0.3, 0.1, 5);
    cfg.domain = Box{0.0, 1.0};
    AttackResult r = iterated_attack(m, Vec{0.05, 0.95}, 1, cfg);
    CHECK(r.x[0] == 0.0);
    CHECK(r.x[1] == 1.0);
}

TEST_CASE("random start is reproducible from the seed") {
    std::vector<std::size_t> dims{2, 8, 3};
    TinyMLP m = TinyMLP::random(dims, 4);
    AttackConfig cfg = bim_config(0.1, 0.025, 10);
    cfg.random_init = true;
    cfg.seed = 77;
    Vec x{0.3, -0.2};
    CHECK(iterated_attack(m, x, 0, cfg).x == iterated_attack(m, x, 0, cfg).x);
    std::mt19937_64 g1(5), g2(5);
    CHECK(iterated_attack(m, x, 0, cfg, Direction::ascend, &g1).x ==
          iterated_attack(m, x, 0, cfg, Direction::ascend, &g2).x);
}

TEST_CASE("attack configuration invariants") {
    LinearModel m(Vec{1.0});
    Vec x{0.5};
    CHECK_THROWS_AS(iterated_attack(m, x, 1, bim_config(0.1, 0.3, 1)), ContractViolation);
    CHECK_THROWS_AS(iterated_attack(m, x, 1, bim_config(0.1, 0.05, 0)), ContractViolation);
    CHECK_THROWS_AS(iterated_attack(m, x, 1, bim_config(-0.1, 0.05, 1)), ContractViolation);
    CHECK_THROWS_AS(fgsm(m, x, 1, -0.1), ContractViolation);
    CHECK_NOTHROW(iterated_attack(m, x, 1, bim_config(0.1, 0.2, 1)));
}

TEST_CASE("perturb_signed with zero radius is the identity") {
    LinearModel m(Vec{1.0, 0.0});
    Vec x{0.02, 0.0};
    CHECK(perturb_signed(m, x, 1, 0.0, bim_config(0.05, 0.05, 1)) == x);
}

TEST_CASE("negative radius moves away from the boundary") {
    LinearModel m(Vec{1.0, 0.0});
    Vec out = perturb_signed(m, Vec{0.02, 0.0}, 1, -0.05, bim_config(0.05, 0.05, 1));
    CHECK(out[0] == doctest::Approx(0.07).epsilon(1e-14));
    CHECK(out[1] == 0.0);
}

TEST_CASE("positive radius below the base radius scales the single step") {
    LinearModel m(Vec{1.0, 0.0});
    Vec out = perturb_signed(m, Vec{0.02, 0.0}, 1, 0.01, bim_config(0.05, 0.05, 1));
    CHECK(out[0] == doctest::Approx(0.01).epsilon(1e-14));
    CHECK_THROWS_AS(perturb_signed(m, Vec{0.02, 0.0}, 1, 0.06, bim_config(0.05, 0.05, 1)), ContractViolation);
}

TEST_CASE("anti-adversarial steps never increase the linear loss") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> a(1e-4, 0.5);
    for (int t = 0; t < 500; ++t) {
        LinearModel m(random_vec(rng, 5), random_vec(rng, 1)[0]);
        Vec x = random_vec(rng, 5);
        int y = (rng() & 1) ? 1 : -1;
        double r = a(rng);
        Vec out = perturb_signed(m, x, y, -r, bim_config(0.5, 0.5, 1));
        CHECK(loss_and_input_grad(m, out, y).loss <= loss_and_input_grad(m, x, y).loss);
        CHECK(linf(out, x) <= r + 1e-12);
    }
}

TEST_CASE("segment_point endpoints and interpolation") {
    Vec x{4.0 / 255, 0.0};
    Vec xa{-4.0 / 255, 0.0};
    double eps = 8.0 / 255;
    CHECK(segment_point(x, xa, 0.0, eps) == x);
    CHECK(segment_point(x, xa, eps, eps) == xa);
    Vec mid = segment_point(x, xa, 4.0 / 255, eps);
    CHECK(std::abs(mid[0]) < 1e-15);
    CHECK(mid[1] == 0.0);
    Vec back = segment_point(x, xa, -eps, eps);
    CHECK(back[0] == doctest::Approx(12.0 / 255).epsilon(1e-14));
}

TEST_CASE("segment_point rejects parameters outside [-eps, eps]") {
    Vec x{0.0}, xa{1.0};
    CHECK_THROWS_AS(segment_point(x, xa, 1.5, 1.0), ContractViolation);
    CHECK_THROWS_AS(segment_point(x, xa, -1.0001, 1.0), ContractViolation);
    CHECK(segment_point_unchecked(x, xa, 1.5, 1.0)[0] == doctest::Approx(1.5));
}
