#include "themescope/reduce.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include "themescope/error.hpp"

namespace themescope::reduce {

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Matrix uniform_layout(std::size_t n, int n_components, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix out(n, static_cast<std::size_t>(n_components));
    for (double& v : out.values()) v = -10.0 + 20.0 * unit_uniform(rng);
    return out;
}

}  // namespace

KnnResult knn(const Matrix& points, std::size_t k, Metric metric) {
    const std::size_t n = points.rows();
    if (k < 1 || k >= n) {
        throw ParamError("knn needs 1 <= k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    }
    std::vector<double> norms(n, 0.0);
    if (metric == Metric::cosine) {
        for (std::size_t i = 0; i < n; ++i) {
            for (double v : points.row(i)) norms[i] += v * v;
            norms[i] = std::sqrt(norms[i]);
        }
    }

    KnnResult result;
    result.n = n;
    result.k = k;
    result.indices.resize(n * k);
    result.distances.resize(n * k);

    parallel_for(n, [&](std::size_t i) {
        std::vector<std::pair<double, std::size_t>> cand;
        cand.reserve(n - 1);
        const auto xi = points.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto xj = points.row(j);
            double d;
            if (metric == Metric::euclidean) {
                d = std::sqrt(squared_distance(xi, xj));
            } else if (norms[i] == 0.0 || norms[j] == 0.0) {
                d = 1.0;
            } else {
                double dot = 0;
                for (std::size_t c = 0; c < xi.size(); ++c) dot += xi[c] * xj[c];
                d = std::clamp(1.0 - dot / (norms[i] * norms[j]), 0.0, 2.0);
            }
            cand.emplace_back(d, j);
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        for (std::size_t r = 0; r < k; ++r) {
            result.distances[i * k + r] = cand[r].first;
            result.indices[i * k + r] = cand[r].second;
        }
    });
    return result;
}

double membership_sum(std::span<const double> distances, const Membership& m) {
    double s = 0;
    for (double d : distances) s += std::exp(-std::max(0.0, d - m.rho) / m.sigma);
    return s;
}

Membership smooth_knn(std::span<const double> distances, std::size_t k) {
    Membership m;
    for (double d : distances) {
        if (d > 0.0) {
            m.rho = d;
            break;
        }
    }
    const double target = std::log2(static_cast<double>(k));

    // As sigma -> 0 the sum tends to the number of distances at or below rho.
    const auto floor_count = static_cast<double>(
        std::count_if(distances.begin(), distances.end(), [&](double d) { return d <= m.rho; }));
    if (floor_count >= target - kSigmaTolerance) {
        m.sigma = kSigmaMin;
        return m;
    }

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    for (int iter = 0; iter < 256; ++iter) {
        m.sigma = mid;
        const double s = membership_sum(distances, m);
        if (std::abs(s - target) <= kSigmaTolerance) break;
        if (s > target) {
            hi = mid;
            mid = 0.5 * (lo + hi);
        } else {
            lo = mid;
            mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
        }
        if (mid > kSigmaMax || mid < kSigmaMin) break;
    }
    m.sigma = std::clamp(mid, kSigmaMin, kSigmaMax);
    return m;
}

FuzzyGraph fuzzy_graph(const KnnResult& knn, std::span<const Membership> calibration) {
    if (calibration.size() != knn.n) throw ParamError("one calibration per point required");
    // (min, max) -> (weight min->max, weight max->min)
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> directed;
    for (std::size_t i = 0; i < knn.n; ++i) {
        const auto& cal = calibration[i];
        const auto nbrs = knn.neighbors(i);
        const auto dists = knn.dists(i);
        for (std::size_t r = 0; r < knn.k; ++r) {
            const std::size_t j = nbrs[r];
            if (j == i) continue;
            const double w = std::exp(-std::max(0.0, dists[r] - cal.rho) / cal.sigma);
            auto& slot = directed[{std::min(i, j), std::max(i, j)}];
            (i < j ? slot.first : slot.second) = w;
        }
    }
    FuzzyGraph graph;
    graph.n = knn.n;
    for (const auto& [key, w] : directed) {
        const double sym = symmetrize(w.first, w.second);
        if (sym > 0.0) graph.edges.push_back({key.first, key.second, std::min(sym, 1.0)});
    }
    return graph;
}

double low_dim_membership(double distance, const Kernel& kernel) {
    return 1.0 / (1.0 + kernel.a * std::pow(distance, 2.0 * kernel.b));
}

Kernel fit_kernel(double min_dist) {
    if (min_dist < 0) throw ParamError("min_dist must be >= 0");
    constexpr int kSamples = 300;
    std::vector<double> xs(kSamples), ys(kSamples);
    for (int i = 0; i < kSamples; ++i) {
        xs[i] = 3.0 * i / (kSamples - 1);
        ys[i] = xs[i] <= min_dist ? 1.0 : std::exp(-(xs[i] - min_dist));
    }
    auto objective = [&](double a, double b) {
        double f = 0;
        for (int i = 0; i < kSamples; ++i) {
            const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2 * b)) - ys[i];
            f += r * r;
        }
        return f;
    };

    double a = 1.0, b = 1.0;
    double f = objective(a, b);
    double damping = 1e-3;
    for (int iter = 0; iter < 2000; ++iter) {
        // Gauss-Newton normal equations with Marquardt scaling.
        double h00 = 0, h01 = 0, h11 = 0, g0 = 0, g1 = 0;
        for (int i = 0; i < kSamples; ++i) {
            const double x = xs[i];
            const double p = x > 0 ? std::pow(x, 2 * b) : 0.0;
            const double denom = 1.0 + a * p;
            const double r = 1.0 / denom - ys[i];
            const double ja = -p / (denom * denom);
            const double jb = x > 0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
            h00 += ja * ja;
            h01 += ja * jb;
            h11 += jb * jb;
            g0 += ja * r;
            g1 += jb * r;
        }
        bool accepted = false;
        while (damping < 1e12) {
            const double m00 = h00 * (1 + damping), m11 = h11 * (1 + damping);
            const double det = m00 * m11 - h01 * h01;
            if (det == 0) {
                damping *= 10;
                continue;
            }
            const double da = (-g0 * m11 + g1 * h01) / det;
            const double db = (-g1 * m00 + g0 * h01) / det;
            const double na = a + da, nb = b + db;
            if (na > 0 && nb > 0) {
                const double nf = objective(na, nb);
                if (nf <= f) {
                    const double rel = (f - nf) / std::max(f, 1e-300);
                    a = na;
                    b = nb;
                    f = nf;
                    damping = std::max(damping / 10, 1e-12);
                    accepted = true;
                    if (rel <= 1e-9) return {a, b};
                    break;
                }
            }
            damping *= 10;
        }
        if (!accepted) break;
    }
    return {a, b};
}

double attractive_objective(std::span<const double> yi, std::span<const double> yj, const Kernel& k) {
    const double d2 = squared_distance(yi, yj);
    return -std::log1p(k.a * std::pow(d2, k.b));
}

double repulsive_objective(std::span<const double> yi, std::span<const double> yj, const Kernel& k) {
    const double d2 = squared_distance(yi, yj);
    const double t = k.a * std::pow(d2, k.b);
    return std::log(t) - std::log1p(t);
}

void attractive_gradient(std::span<const double> yi, std::span<const double> yj, const Kernel& k,
                         std::span<double> grad) {
    const double d2 = squared_distance(yi, yj);
    double coeff = 0.0;
    if (d2 > 0.0) {
        coeff = -2.0 * k.a * k.b * std::pow(d2, k.b - 1.0) / (1.0 + k.a * std::pow(d2, k.b));
    }
    for (std::size_t c = 0; c < yi.size(); ++c) grad[c] = coeff * (yi[c] - yj[c]);
}

void repulsive_gradient(std::span<const double> yi, std::span<const double> yj, const Kernel& k,
                        std::span<double> grad, double epsilon) {
    const double d2 = squared_distance(yi, yj);
    double coeff = 0.0;
    if (d2 + epsilon > 0.0) coeff = 2.0 * k.b / ((epsilon + d2) * (1.0 + k.a * std::pow(d2, k.b)));
    for (std::size_t c = 0; c < yi.size(); ++c) grad[c] = coeff * (yi[c] - yj[c]);
}

Matrix initial_layout(const FuzzyGraph& graph, int n_components, std::uint64_t seed) {
    const std::size_t n = graph.n;
    const auto dim = static_cast<std::size_t>(n_components);
    if (n <= dim + 1 || graph.edges.empty()) return uniform_layout(n, n_components, seed);

    std::vector<double> degree(n, 0.0);
    for (const auto& e : graph.edges) {
        degree[e.i] += e.weight;
        degree[e.j] += e.weight;
    }
    if (std::any_of(degree.begin(), degree.end(), [](double d) { return d <= 0.0; })) {
        return uniform_layout(n, n_components, seed);
    }
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

    // Top eigenvectors of (I + D^-1/2 W D^-1/2) / 2 are the bottom eigenvectors
    // of the normalised Laplacian; found by subspace iteration with
    // Rayleigh-Ritz extraction.
    auto apply = [&](const Eigen::MatrixXd& x) {
        Eigen::MatrixXd y = 0.5 * x;
        for (const auto& e : graph.edges) {
            const double w = 0.5 * e.weight * inv_sqrt[e.i] * inv_sqrt[e.j];
            y.row(static_cast<Eigen::Index>(e.i)) += w * x.row(static_cast<Eigen::Index>(e.j));
            y.row(static_cast<Eigen::Index>(e.j)) += w * x.row(static_cast<Eigen::Index>(e.i));
        }
        return y;
    };
    auto orthonormalize = [](const Eigen::MatrixXd& x) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
        return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols()));
    };

    const auto block = static_cast<Eigen::Index>(std::min(n, dim + 1 + 8));
    const auto wanted = static_cast<Eigen::Index>(dim + 1);
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd q(static_cast<Eigen::Index>(n), block);
    for (Eigen::Index c = 0; c < block; ++c) {
        for (Eigen::Index r = 0; r < q.rows(); ++r) q(r, c) = unit_uniform(rng) - 0.5;
    }
    q = orthonormalize(q);

    Eigen::MatrixXd ritz_vectors;
    for (int iter = 1; iter <= 2000; ++iter) {
        q = orthonormalize(apply(q));
        if (iter % 10 != 0 && iter != 2000) continue;
        const Eigen::MatrixXd aq = apply(q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(q.transpose() * aq);
        if (small.info() != Eigen::Success) return uniform_layout(n, n_components, seed);
        // Eigen sorts ascending; the wanted vectors are the last `wanted`.
        const Eigen::MatrixXd v = q * small.eigenvectors();
        const Eigen::MatrixXd av = aq * small.eigenvectors();
        double worst = 0;
        for (Eigen::Index c = block - wanted; c < block; ++c) {
            worst = std::max(worst, (av.col(c) - small.eigenvalues()(c) * v.col(c)).norm());
        }
        ritz_vectors = v;
        q = v;
        if (worst < 1e-8) break;
    }
    if (!ritz_vectors.allFinite()) return uniform_layout(n, n_components, seed);

    Matrix out(n, dim);
    double max_abs = 0;
    for (std::size_t c = 0; c < dim; ++c) {
        // skip the trivial top vector (block - 1)
        const Eigen::Index col = block - 2 - static_cast<Eigen::Index>(c);
        for (std::size_t r = 0; r < n; ++r) {
            out(r, c) = ritz_vectors(static_cast<Eigen::Index>(r), col);
            max_abs = std::max(max_abs, std::abs(out(r, c)));
        }
    }
    if (max_abs == 0.0 || !std::isfinite(max_abs)) return uniform_layout(n, n_components, seed);
    const double expansion = 10.0 / max_abs;
    for (double& v : out.values()) v = v * expansion + 1e-4 * (2.0 * unit_uniform(rng) - 1.0);
    return out;
}

Matrix optimize_layout(const FuzzyGraph& graph, const ReduceParams& params, Matrix coords,
                       const EpochCallback& on_epoch) {
    if (params.n_epochs < 0) throw ParamError("n_epochs must be >= 0");
    if (params.negative_samples < 0) throw ParamError("negative_samples must be >= 0");
    if (coords.rows() != graph.n) throw ParamError("initial layout row count does not match graph");
    if (params.n_epochs == 0 || graph.edges.empty()) return coords;

    const Kernel kernel = params.kernel ? *params.kernel : fit_kernel(params.min_dist);
    const std::size_t n = graph.n;
    const std::size_t dim = coords.cols();

    double w_max = 0;
    for (const auto& e : graph.edges) w_max = std::max(w_max, e.weight);

    // Both orientations of every undirected edge, as in a symmetric sparse
    // adjacency; edges too weak to be sampled within n_epochs are dropped.
    struct Directed {
        std::size_t head, tail;
        double epochs_per_sample;
    };
    std::vector<Directed> edges;
    for (const auto& e : graph.edges) {
        if (e.weight < w_max / params.n_epochs) continue;
        edges.push_back({e.i, e.j, w_max / e.weight});
        edges.push_back({e.j, e.i, w_max / e.weight});
    }
    const double negatives = params.negative_samples;
    std::vector<double> next_sample(edges.size()), next_negative(edges.size()), per_negative(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        next_sample[e] = edges[e].epochs_per_sample;
        per_negative[e] = negatives > 0 ? edges[e].epochs_per_sample / negatives : 0.0;
        next_negative[e] = per_negative[e];
    }

    auto clip = [](double v) { return std::clamp(v, -4.0, 4.0); };

    auto process_edge = [&](std::size_t e, int epoch, double alpha, std::mt19937_64& rng, auto&& get, auto&& add) {
        if (next_sample[e] > epoch) return;
        const auto [head, tail, eps] = edges[e];
        std::vector<double> grad(dim), yi(dim), yj(dim);
        auto fetch = [&](std::size_t r, std::vector<double>& dst) {
            for (std::size_t c = 0; c < dim; ++c) dst[c] = get(r, c);
        };
        fetch(head, yi);
        fetch(tail, yj);
        attractive_gradient(yi, yj, kernel, grad);
        for (std::size_t c = 0; c < dim; ++c) {
            const double g = clip(grad[c]) * alpha;
            add(head, c, g);
            add(tail, c, -g);
        }
        next_sample[e] += eps;

        if (negatives <= 0) return;
        const auto n_neg = static_cast<long>((epoch - next_negative[e]) / per_negative[e]);
        for (long p = 0; p < n_neg; ++p) {
            const std::size_t other = static_cast<std::size_t>(rng() % n);
            if (other == head) continue;
            fetch(head, yi);
            fetch(other, yj);
            repulsive_gradient(yi, yj, kernel, grad, 1e-3);
            for (std::size_t c = 0; c < dim; ++c) add(head, c, clip(grad[c]) * alpha);
        }
        next_negative[e] += static_cast<double>(n_neg) * per_negative[e];
    };

    std::mt19937_64 rng(params.seed ^ 0xa0761d6478bd642fULL);
    for (int epoch = 0; epoch < params.n_epochs; ++epoch) {
        const double alpha = params.learning_rate * (1.0 - static_cast<double>(epoch) / params.n_epochs);
        if (!params.parallel) {
            auto get = [&](std::size_t r, std::size_t c) { return coords(r, c); };
            auto add = [&](std::size_t r, std::size_t c, double v) { coords(r, c) += v; };
            for (std::size_t e = 0; e < edges.size(); ++e) process_edge(e, epoch, alpha, rng, get, add);
        } else {
            // Lock-free updates on shared coordinates; per-edge bookkeeping is
            // owned by exactly one thread.
            const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
            std::vector<std::jthread> threads;
            for (std::size_t w = 0; w < workers; ++w) {
                threads.emplace_back([&, w] {
                    std::mt19937_64 local(params.seed + 0x9e3779b97f4a7c15ULL * (epoch * workers + w + 1));
                    auto get = [&](std::size_t r, std::size_t c) {
                        return std::atomic_ref<double>(coords(r, c)).load(std::memory_order_relaxed);
                    };
                    auto add = [&](std::size_t r, std::size_t c, double v) {
                        std::atomic_ref<double>(coords(r, c)).fetch_add(v, std::memory_order_relaxed);
                    };
                    for (std::size_t e = w; e < edges.size(); e += workers) {
                        process_edge(e, epoch, alpha, local, get, add);
                    }
                });
            }
        }
        if (on_epoch) on_epoch(epoch, coords);
    }
    return coords;
}

Matrix optimize_layout(const FuzzyGraph& graph, const ReduceParams& params) {
    return optimize_layout(graph, params, initial_layout(graph, params.n_components, params.seed));
}

Matrix reduce(const Matrix& points, const ReduceParams& params) {
    if (params.n_neighbors < 2) throw ParamError("n_neighbors must be >= 2");
    if (params.n_components < 2) throw ParamError("n_components must be >= 2");
    const auto result = knn(points, static_cast<std::size_t>(params.n_neighbors), params.metric);
    std::vector<Membership> calibration(result.n);
    for (std::size_t i = 0; i < result.n; ++i) calibration[i] = smooth_knn(result.dists(i), result.k);
    return optimize_layout(fuzzy_graph(result, calibration), params);
}

}  // namespace themescope::reduce
