#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "themescope/error.hpp"
#include "themescope/reduce.hpp"

using namespace themescope;
using namespace themescope::reduce;

namespace {

Matrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Matrix m(n, d);
    for (auto& v : m.values()) v = g(rng);
    return m;
}

double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("knn on a line and parameter checks") {
    const Matrix line(3, 1, std::vector<double>{0, 1, 3});
    const auto r = knn(line, 1, Metric::euclidean);
    CHECK(r.neighbors(0)[0] == 1);
    CHECK(r.dists(0)[0] == 1.0);
    CHECK(r.neighbors(1)[0] == 0);
    CHECK(r.dists(1)[0] == 1.0);
    CHECK(r.neighbors(2)[0] == 1);
    CHECK(r.dists(2)[0] == 2.0);
    CHECK_THROWS_AS(knn(line, 3, Metric::euclidean), ParamError);
}

TEST_CASE("knn matches an exhaustive scan") {
    const auto pts = random_points(50, 4, 3);
    const auto r = knn(pts, 5, Metric::euclidean);
    for (std::size_t i = 0; i < 50; ++i) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < 50; ++j) {
            if (j != i) all.emplace_back(dist(pts.row(i), pts.row(j)), j);
        }
        std::sort(all.begin(), all.end());
        for (std::size_t k = 0; k < 5; ++k) {
            CHECK(r.neighbors(i)[k] == all[k].second);
            CHECK(r.dists(i)[k] == doctest::Approx(all[k].first).epsilon(1e-12));
        }
    }
}

TEST_CASE("knn breaks distance ties by index") {
    const Matrix pts(4, 1, std::vector<double>{0, 1, -1, 2});
    const auto r = knn(pts, 2, Metric::euclidean);
    CHECK(r.neighbors(0)[0] == 1);
    CHECK(r.neighbors(0)[1] == 2);
}

TEST_CASE("smooth_knn calibration") {
    const std::vector<double> d{1, 2, 3, 5};
    const auto m = smooth_knn(d, 4);
    CHECK(m.rho == 1.0);
    // Independent bisection oracle.
    CHECK(m.sigma == doctest::Approx(1.7780965750173667).epsilon(1e-5));
    CHECK(membership_sum(d, m) == doctest::Approx(2.0).epsilon(1e-4));

    const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    CHECK(smooth_knn(flat, 4).sigma == kSigmaMin);
    const std::vector<double> zeros{0, 0, 0};
    CHECK(smooth_knn(zeros, 3).rho == 0.0);
}

TEST_CASE("fuzzy graph symmetrisation") {
    CHECK(symmetrize(0.5, 0.5) == 0.75);
    CHECK(symmetrize(1, 0) == 1.0);
    CHECK(symmetrize(0.2, 0.4) == doctest::Approx(0.52));
    CHECK(symmetrize(0.2, 0.4) == symmetrize(0.4, 0.2));

    const auto pts = random_points(40, 3, 9);
    const auto r = knn(pts, 6, Metric::euclidean);
    std::vector<Membership> cal;
    for (std::size_t i = 0; i < 40; ++i) cal.push_back(smooth_knn(r.dists(i), 6));
    const auto g = fuzzy_graph(r, cal);
    std::vector<bool> has_one(40, false);
    for (const auto& e : g.edges) {
        CHECK(e.i < e.j);
        CHECK(e.weight > 0.0);
        CHECK(e.weight <= 1.0);
        if (e.weight == 1.0) has_one[e.i] = has_one[e.j] = true;
    }
    for (std::size_t i = 0; i < 40; ++i) CHECK(has_one[i]);
    for (std::size_t k = 1; k < g.edges.size(); ++k) {
        CHECK(std::pair(g.edges[k - 1].i, g.edges[k - 1].j) < std::pair(g.edges[k].i, g.edges[k].j));
    }
}

TEST_CASE("kernel fit matches a least-squares oracle") {
    const auto k1 = fit_kernel(0.1);
    CHECK(k1.a == doctest::Approx(1.57694361).epsilon(1e-3));
    CHECK(k1.b == doctest::Approx(0.89506072).epsilon(1e-3));
    const auto k0 = fit_kernel(0.0);
    CHECK(k0.a == doctest::Approx(1.93280909).epsilon(1e-3));
    CHECK(k0.b == doctest::Approx(0.79049466).epsilon(1e-3));
    CHECK(low_dim_membership(0.0, k0) == 1.0);
    double prev = 2;
    for (double d = 0; d <= 5; d += 0.05) {
        const double phi = low_dim_membership(d, k1);
        CHECK(phi <= prev);
        prev = phi;
    }
}

TEST_CASE("analytic gradients agree with central differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2, 2), ab(0.5, 2);
    for (int trial = 0; trial < 50; ++trial) {
        const Kernel k{ab(rng), ab(rng) / 2 + 0.3};
        std::vector<double> yi(3), yj(3), g(3);
        for (auto& v : yi) v = u(rng);
        for (auto& v : yj) v = u(rng);
        if (dist(yi, yj) < 0.2) continue;
        for (int kind = 0; kind < 2; ++kind) {
            auto f = [&](const std::vector<double>& y) {
                return kind == 0 ? attractive_objective(y, yj, k) : repulsive_objective(y, yj, k);
            };
            if (kind == 0) attractive_gradient(yi, yj, k, g);
            else repulsive_gradient(yi, yj, k, g);
            for (std::size_t d = 0; d < 3; ++d) {
                auto p = yi, m = yi;
                p[d] += 1e-5;
                m[d] -= 1e-5;
                const double fd = (f(p) - f(m)) / 2e-5;
                CHECK(std::abs(fd - g[d]) <= 1e-4 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("optimize_layout: zero epochs, determinism, attraction") {
    const auto pts = random_points(60, 5, 5);
    ReduceParams p;
    p.n_neighbors = 8;
    p.n_components = 2;
    const auto r = knn(pts, 8, Metric::euclidean);
    std::vector<Membership> cal;
    for (std::size_t i = 0; i < 60; ++i) cal.push_back(smooth_knn(r.dists(i), 8));
    const auto g = fuzzy_graph(r, cal);

    const auto init = initial_layout(g, 2, 42);
    for (double v : init.values()) {
        CHECK(std::isfinite(v));
        CHECK(std::abs(v) <= 10.0 + 1e-3);
    }
    p.n_epochs = 0;
    CHECK(optimize_layout(g, p, init) == init);
    p.n_epochs = 50;
    const auto a = optimize_layout(g, p, init);
    const auto b = optimize_layout(g, p, init);
    CHECK(a == b);
    p.n_epochs = -1;
    CHECK_THROWS_AS(optimize_layout(g, p, init), ParamError);

    FuzzyGraph pair{2, {{0, 1, 1.0}}};
    ReduceParams two;
    two.n_components = 2;
    two.negative_samples = 0;
    two.n_epochs = 30;
    Matrix start(2, 2, std::vector<double>{-5, 0, 5, 0});
    std::vector<double> distances;
    optimize_layout(pair, two, start, [&](int, const Matrix& c) { distances.push_back(dist(c.row(0), c.row(1))); });
    REQUIRE(distances.size() == 30);
    // An edge sampled once per epoch is first due at epoch 1.
    CHECK(distances.front() == doctest::Approx(10.0));
    CHECK(distances[1] < 10.0);
    for (std::size_t e = 1; e < distances.size(); ++e) {
        if (distances[e - 1] > 0.5) CHECK(distances[e] < distances[e - 1]);
    }
}

TEST_CASE("parallel epochs stay finite") {
    const auto pts = random_points(120, 6, 8);
    ReduceParams p;
    p.n_neighbors = 10;
    p.n_epochs = 40;
    p.parallel = true;
    for (double v : reduce::reduce(pts, p).values()) CHECK(std::isfinite(v));
}
