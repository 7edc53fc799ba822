#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "mplab/attacks.hpp"
#include "mplab/errors.hpp"
#include "mplab/pruning.hpp"
#include "mplab/rational.hpp"

using namespace mplab;

namespace {

using Ids = std::vector<std::int64_t>;

Rational R(std::int64_t n, std::int64_t d = 1) { return Rational(n, d); }

CDHistory history_from_wrong_counts(const std::vector<int>& wrong, std::size_t T) {
    CDHistory h;
    h.correct.assign(T, std::vector<std::uint8_t>(wrong.size(), 1));
    for (std::size_t i = 0; i < wrong.size(); ++i)
        for (int e = 0; e < wrong[i]; ++e) h.correct[(e + i) % T][i] = 0;
    return h;
}

}  // namespace

TEST_CASE("prune easy removes the highest margins") {
    std::vector<double> m{0.1, 0.5, 0.3, 0.9};
    PruningPlan p = rank_and_prune(m, PruneStrategy::prune_easy, 0.5);
    CHECK(p.removed == Ids{1, 3});
    CHECK(p.retained == Ids{0, 2});
}

TEST_CASE("prune difficult removes the lowest margins") {
    std::vector<double> m{0.1, 0.5, 0.3, 0.9};
    PruningPlan p = rank_and_prune(m, PruneStrategy::prune_difficult, 0.25);
    CHECK(p.removed == Ids{0});
    CHECK(p.retained == Ids{1, 2, 3});
}

TEST_CASE("difficulty scores flip the orientation") {
    std::vector<double> cd{0.0, 1.0, 0.5, 0.1};
    CHECK(rank_and_prune(cd, PruneStrategy::prune_difficult, 0.25, 0, ScoreOrientation::difficulty).removed ==
          Ids{1});
    CHECK(rank_and_prune(cd, PruneStrategy::prune_easy, 0.25, 0, ScoreOrientation::difficulty).removed == Ids{0});
}

TEST_CASE("ties follow the (score, id) order from either end") {
    std::vector<double> same(6, 0.4);
    CHECK(rank_and_prune(same, PruneStrategy::prune_difficult, 0.5).removed == Ids{0, 1, 2});
    CHECK(rank_and_prune(same, PruneStrategy::prune_easy, 0.5).removed == Ids{3, 4, 5});
}

TEST_CASE("explicit sample ids are carried into the plan") {
    std::vector<double> m{0.1, 0.5, 0.3, 0.9};
    Ids ids{40, 10, 30, 20};
    PruningPlan p = rank_and_prune(m, PruneStrategy::prune_easy, 0.5, 0, ScoreOrientation::margin, ids);
    CHECK(p.removed == Ids{10, 20});
    CHECK(p.retained == Ids{30, 40});
}

TEST_CASE("removed count rounds halves away from zero") {
    CHECK(removed_count(0.5, 3) == 2);
    CHECK(removed_count(0.25, 2) == 1);
    CHECK(removed_count(0.125, 4) == 1);
    CHECK(removed_count(0.3, 10) == 3);
    CHECK(removed_count(0.0, 10) == 0);
    CHECK(rank_and_prune(std::vector<double>{1, 2, 3}, PruneStrategy::prune_easy, 0.5).removed.size() == 2);
}

TEST_CASE("a plan that would retain nothing is an error") {
    std::vector<double> m{0.1, 0.2};
    CHECK_THROWS_AS(rank_and_prune(m, PruneStrategy::prune_easy, 1.0), ContractViolation);
    CHECK_THROWS_AS(rank_and_prune(std::vector<double>{0.1}, PruneStrategy::prune_easy, 0.5), ContractViolation);
    CHECK_THROWS_AS(rank_and_prune(m, PruneStrategy::prune_easy, -0.1), ContractViolation);
    CHECK_THROWS_AS(prune_by_threshold(m, PruneStrategy::prune_difficult, 1.0), ContractViolation);
}

TEST_CASE("no pruning keeps everything and random pruning is seeded") {
    std::vector<double> m(50);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<double>(i);
    PruningPlan none = rank_and_prune(m, PruneStrategy::none, 0.0);
    CHECK(none.retained.size() == 50);
    CHECK(none.removed.empty());
    PruningPlan a = rank_and_prune(m, PruneStrategy::random, 0.4, 7);
    PruningPlan b = rank_and_prune(m, PruneStrategy::random, 0.4, 7);
    PruningPlan c = rank_and_prune(m, PruneStrategy::random, 0.4, 8);
    CHECK(a.removed.size() == 20);
    CHECK(a.removed == b.removed);
    CHECK(a.removed != c.removed);
}

TEST_CASE("plans partition the index set and are deterministic") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    for (int t = 0; t < 200; ++t) {
        std::size_t n = 2 + rng() % 200;
        std::vector<double> m(n);
        for (double& v : m) v = std::round(g(rng) * 20) / 20;  // plenty of ties
        double ratio = std::uniform_real_distribution<double>(0.0, 0.9)(rng);
        auto strategy = std::array{PruneStrategy::prune_easy, PruneStrategy::prune_difficult,
                                   PruneStrategy::random}[t % 3];
        if (removed_count(ratio, n) >= n) continue;
        PruningPlan p = rank_and_prune(m, strategy, ratio, t);
        CHECK(p.removed.size() == removed_count(ratio, n));
        CHECK(p.retained.size() + p.removed.size() == n);
        Ids all = p.retained;
        all.insert(all.end(), p.removed.begin(), p.removed.end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == static_cast<std::int64_t>(i));
        CHECK(std::is_sorted(p.retained.begin(), p.retained.end()));
        PruningPlan q = rank_and_prune(m, strategy, ratio, t);
        CHECK(p.retained == q.retained);
        CHECK(p.removed == q.removed);
    }
}

TEST_CASE("PE and PD remove disjoint sets when the ratios sum to at most one") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g;
    for (int t = 0; t < 200; ++t) {
        std::size_t n = 2 + rng() % 100;
        std::vector<double> m(n);
        for (double& v : m) v = std::round(g(rng) * 10) / 10;
        double r1 = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
        double r2 = std::uniform_real_distribution<double>(0.0, 1.0 - r1)(rng);
        if (removed_count(r1, n) >= n || removed_count(r2, n) >= n) continue;
        if (removed_count(r1, n) + removed_count(r2, n) > n) continue;  // rounding can exceed n
        PruningPlan pe = rank_and_prune(m, PruneStrategy::prune_easy, r1);
        PruningPlan pd = rank_and_prune(m, PruneStrategy::prune_difficult, r2);
        Ids both;
        std::set_intersection(pe.removed.begin(), pe.removed.end(), pd.removed.begin(), pd.removed.end(),
                              std::back_inserter(both));
        CHECK(both.empty());
    }
}

TEST_CASE("cd score counts misclassified epochs") {
    CDHistory h = history_from_wrong_counts({0, 10, 3}, 10);
    CHECK(cd_score(h, 0) == 0.0);
    CHECK(cd_score(h, 1) == 1.0);
    CHECK(cd_score(h, 2) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(cd_score(h, 3), ContractViolation);
    CHECK_THROWS_AS(cd_score(CDHistory{}, 0), ContractViolation);
}

TEST_CASE("cd scores lie on the 1/T lattice") {
    std::mt19937_64 rng(3);
    const std::size_t T = 7;
    std::vector<int> wrong(300);
    for (int& w : wrong) w = static_cast<int>(rng() % (T + 1));
    auto s = cd_scores(history_from_wrong_counts(wrong, T));
    for (std::size_t i = 0; i < s.size(); ++i) {
        double k = s[i] * T;
        CHECK(std::abs(k - std::round(k)) < 1e-12);
        CHECK(std::round(k) == wrong[i]);
    }
}

TEST_CASE("pruning the samples with CD = 1 removes exactly that share") {
    std::mt19937_64 rng(12);
    std::vector<int> wrong(500);
    for (std::size_t i = 0; i < wrong.size(); ++i) wrong[i] = i % 25 < 3 ? 10 : static_cast<int>(rng() % 10);
    auto cd = cd_scores(history_from_wrong_counts(wrong, 10));
    PruningPlan p = prune_by_threshold(cd, PruneStrategy::prune_difficult, 1.0, ScoreOrientation::difficulty);
    CHECK(p.removed.size() == 60);
    CHECK(static_cast<double>(p.removed.size()) / wrong.size() == doctest::Approx(0.12));
    for (auto id : p.removed) CHECK(wrong[id] == 10);
}

TEST_CASE("low-margin filter") {
    std::vector<double> m{0.005, 0.02, -0.01};
    PruningPlan p = filter_below_margin(m, 0.01);
    CHECK(p.retained == Ids{1});
    CHECK(p.removed == Ids{0, 2});
    CHECK(p.filter_threshold == 0.01);

    std::vector<double> z{0.3, -0.2, 0.0, 1.0, -1e-9};
    CHECK(filter_below_margin(z, 0.0).removed == Ids{1, 4});
}

TEST_CASE("intersecting a filter with a PE plan") {
    std::vector<double> m{0.005, 0.02, -0.01, 0.5, 0.3, 0.04};
    PruningPlan f = filter_below_margin(m, 0.01);
    PruningPlan pe = rank_and_prune_count(m, PruneStrategy::prune_easy, 1);
    PruningPlan both = intersect(f, pe);
    CHECK(both.retained == Ids{1, 4, 5});
    CHECK(both.removed == Ids{0, 2, 3});
}

TEST_CASE("exact schedule examples at eps = 8/255") {
    const Rational eps = R(8, 255);
    CHECK(schedule_epsilon(R(2, 255), eps, R(0)) == R(2, 255));
    CHECK(schedule_epsilon(R(-10, 255), eps, R(0)) == R(-8, 255));
    CHECK(schedule_epsilon(R(20, 255), eps, R(0)) == R(8, 255));
    CHECK(schedule_epsilon(R(4, 255), eps, R(1, 255)) == R(3, 255));
    CHECK(schedule_epsilon(R(0), eps, R(0)) == R(0));

    CHECK(schedule_epsilon(2.0 / 255, 8.0 / 255, 0.0) == 2.0 / 255);
    CHECK(schedule_epsilon(4.0 / 255, 8.0 / 255, 1.0 / 255) == doctest::Approx(3.0 / 255).epsilon(1e-15));
    CHECK_THROWS_AS(schedule_epsilon(R(0), eps, eps), ContractViolation);
    CHECK_THROWS_AS(schedule_epsilon(R(0), R(0), R(0)), ContractViolation);
    CHECK_THROWS_AS(schedule_epsilon(R(0), eps, R(-1, 255)), ContractViolation);
}

TEST_CASE("schedule clamp, identity and monotonicity on random rational margins") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> num(-40, 40);
    for (int t = 0; t < 10000; ++t) {
        Rational eps = R(1 + rng() % 16, 255);
        Rational g = R(static_cast<std::int64_t>(rng() % 8), 255);
        if (!(g < eps)) g = R(0);
        Rational m = R(num(rng), 255 * (1 + rng() % 3));
        Rational e = schedule_epsilon(m, eps, g);
        CHECK(e <= eps);
        CHECK(-eps <= e);
        Rational absm = m < R(0) ? -m : m;
        // at |m| = eps the clamp value coincides with m, so identity holds on the closed interval
        CHECK((schedule_epsilon(m, eps, R(0)) == m) == (absm <= eps));
        if (absm < eps) CHECK(schedule_epsilon(m, eps, R(0)) == m);
        Rational m2 = m + R(1 + rng() % 5, 510);
        CHECK(schedule_epsilon(m2, eps, g) >= e);
        Rational g2 = g + R(1, 1020);
        if (g2 < eps) CHECK(schedule_epsilon(m, eps, g2) <= e);
    }
}

TEST_CASE("with a positive gap the scheduled perturbation cannot cross the teacher boundary") {
    LinearModel teacher(Vec{1.0, 0.0, 0.0});
    const double eps = 8.0 / 255, g = 1.0 / 255;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(g, eps + g);
    std::normal_distribution<double> n;
    for (int t = 0; t < 2000; ++t) {
        double m = u(rng);
        if (m <= g) continue;
        int y = (rng() & 1) ? 1 : -1;
        Vec x{y * m, n(rng), n(rng)};
        double ei = schedule_epsilon(m, eps, g);
        Vec adv = perturb_signed(teacher, x, y, ei, bim_config(eps, eps, 1));
        CHECK(y * adv[0] >= g - 1e-12);
        CHECK(predict(teacher, adv) == y);
    }
}

TEST_CASE("epsilon schedule CSV") {
    std::vector<double> m{2.0 / 255, -10.0 / 255, 20.0 / 255};
    Ids ids{3, 1, 2};
    EpsilonSchedule s = epsilon_schedule(m, 8.0 / 255, 0.0, ids);
    REQUIRE(s.eps_i.size() == 3);
    CHECK(s.eps_i[0] == 2.0 / 255);
    CHECK(s.eps_i[1] == -8.0 / 255);
    CHECK(s.eps_i[2] == 8.0 / 255);
    std::string text = format_schedule(s, m);
    CHECK(text ==
          "sample_id,margin,epsilon_i\n"
          "1,-0.0392156863,-0.031372549\n"
          "2,0.0784313725,0.031372549\n"
          "3,0.00784313725,0.00784313725\n");
    EpsilonSchedule back = parse_schedule(text);
    CHECK(back.sample_ids == Ids{1, 2, 3});
    CHECK(back.eps_i[2] == doctest::Approx(2.0 / 255).epsilon(1e-9));
}

TEST_CASE("online pruning decisions") {
    LinearModel m(Vec{1.0, 0.0});
    const double eps = 8.0 / 255;
    Vec deep{0.5, 0.0};
    Vec adv = fgsm(m, deep, 1, eps);
    for (double mp : {1.0 / 255, 4.0 / 255, eps, 26.0 / 255}) CHECK(online_prune_decision(m, deep, 1, adv, mp, eps));

    // beyond eps the segment is extended past x', so 26/255 probes x1 - 26/255
    Vec near{20.0 / 255, 0.0};
    CHECK(online_prune_decision(m, near, 1, fgsm(m, near, 1, eps), eps, eps));
    CHECK_FALSE(online_prune_decision(m, near, 1, fgsm(m, near, 1, eps), 26.0 / 255, eps));
    Vec far{30.0 / 255, 0.0};
    CHECK(online_prune_decision(m, far, 1, fgsm(m, far, 1, eps), 26.0 / 255, eps));

    Vec wrong{-0.1, 0.0};
    Vec wadv = fgsm(m, wrong, 1, eps);
    for (double mp : {1.0 / 255, eps, 26.0 / 255}) CHECK_FALSE(online_prune_decision(m, wrong, 1, wadv, mp, eps));
    CHECK_THROWS_AS(online_prune_decision(m, deep, 1, adv, 0.0, eps), ContractViolation);
}

TEST_CASE("strategy names") {
    CHECK(parse_prune_strategy("pe") == PruneStrategy::prune_easy);
    CHECK(parse_prune_strategy("pd") == PruneStrategy::prune_difficult);
    CHECK(parse_prune_strategy("none") == PruneStrategy::none);
    CHECK(parse_prune_strategy("random") == PruneStrategy::random);
    CHECK(parse_prune_strategy("filter") == PruneStrategy::filter_below);
    for (auto s : {PruneStrategy::none, PruneStrategy::prune_easy, PruneStrategy::prune_difficult,
                   PruneStrategy::random, PruneStrategy::filter_below})
        CHECK(parse_prune_strategy(to_string(s)) == s);
    CHECK_THROWS_AS(parse_prune_strategy("hardest"), ConfigError);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("plan files carry a JSON header and sorted retained ids") {
    std::vector<double> m{0.1, 0.5, 0.3, 0.9, 0.2};
    PruningPlan p = rank_and_prune(m, PruneStrategy::prune_easy, 0.4, 17);
    p.manifest_hash = 0xabcdefULL;
    std::string text = format_plan(p);
    CHECK(text ==
          "{\"strategy\":\"pe\",\"ratio\":0.4,\"seed\":17,\"manifest_hash\":\"0000000000abcdef\","
          "\"retained\":3,\"removed\":2}\n0\n2\n4\n");
    PruningPlan back = parse_plan(text);
    CHECK(back.strategy == PruneStrategy::prune_easy);
    CHECK(back.ratio == 0.4);
    CHECK(back.seed == 17);
    CHECK(back.manifest_hash == 0xabcdefULL);
    CHECK(back.retained == p.retained);
    CHECK(format_plan(back).substr(0, 60) == text.substr(0, 60));

    CHECK_THROWS_AS(parse_plan(""), IoError);
    CHECK_THROWS_AS(parse_plan("{\"strategy\":\"pe\"}\n1\n"), IoError);

    auto dir = std::filesystem::temp_directory_path() / "mplab_plan_test";
    write_plan(dir / "plan.txt", p);
    CHECK(read_plan(dir / "plan.txt").retained == p.retained);
    std::filesystem::remove_all(dir);
}
