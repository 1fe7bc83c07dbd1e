#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "themescope/matrix.hpp"

namespace themescope::reduce {

enum class Metric { cosine, euclidean };

struct Kernel {
    double a = 0;
    double b = 0;
};

struct ReduceParams {
    int n_neighbors = 15;
    int n_components = 5;
    double min_dist = 0.0;
    int n_epochs = 200;
    std::uint64_t seed = 42;
    std::optional<Kernel> kernel;  // fitted from min_dist when absent
    double learning_rate = 1.0;
    int negative_samples = 5;
    Metric metric = Metric::cosine;
    bool parallel = false;  // Hogwild-style epochs; not bit-reproducible
};

struct KnnResult {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::size_t> indices;  // n*k, row-major
    std::vector<double> distances;     // n*k, ascending per row

    std::span<const std::size_t> neighbors(std::size_t i) const { return {indices.data() + i * k, k}; }
    std::span<const double> dists(std::size_t i) const { return {distances.data() + i * k, k}; }
};

struct Membership {
    double rho = 0;
    double sigma = 0;
};

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct FuzzyGraph {
    std::size_t n = 0;
    std::vector<Edge> edges;  // i < j, sorted by (i, j)
};

inline constexpr double kSigmaMin = 1e-12;
inline constexpr double kSigmaMax = 1e12;
inline constexpr double kSigmaTolerance = 1e-5;

/// Exact k nearest neighbours of every row, self excluded, distances
/// ascending, ties broken by lower index. Under the cosine metric a zero row
/// sits at distance 1 from everything. Throws ParamError when k >= n or k < 1.
KnnResult knn(const Matrix& points, std::size_t k, Metric metric);

/// Calibrates one point. rho is the smallest non-zero distance (0 when all
/// are zero); sigma solves sum_j exp(-max(0, d_j - rho) / sigma) = log2(k) by
/// bisection, clamped to [kSigmaMin, kSigmaMax]. When the target cannot be
/// reached sigma is kSigmaMin.
Membership smooth_knn(std::span<const double> distances, std::size_t k);

/// Sum that smooth_knn drives to log2(k).
double membership_sum(std::span<const double> distances, const Membership& m);

/// w = w_ij + w_ji - w_ij * w_ji
inline double symmetrize(double w_ij, double w_ji) { return w_ij + w_ji - w_ij * w_ji; }

FuzzyGraph fuzzy_graph(const KnnResult& knn, std::span<const Membership> calibration);

/// Least-squares fit of 1 / (1 + a d^(2b)) to the offset-exponential target
/// over 300 samples on [0, 3], by Levenberg-Marquardt.
Kernel fit_kernel(double min_dist);

/// Low-dimensional membership phi(d) = 1 / (1 + a d^(2b)).
double low_dim_membership(double distance, const Kernel& kernel);

/// Per-edge objectives and their analytic gradients with respect to `yi`.
/// attractive: log phi(|yi - yj|); repulsive: log(1 - phi(|yi - yj|)).
/// `epsilon` regularises the repulsive gradient near zero distance; the
/// exact gradient is epsilon = 0.
double attractive_objective(std::span<const double> yi, std::span<const double> yj, const Kernel& k);
double repulsive_objective(std::span<const double> yi, std::span<const double> yj, const Kernel& k);
void attractive_gradient(std::span<const double> yi, std::span<const double> yj, const Kernel& k,
                         std::span<double> grad);
void repulsive_gradient(std::span<const double> yi, std::span<const double> yj, const Kernel& k,
                        std::span<double> grad, double epsilon = 0.0);

/// Spectral embedding from the normalised graph Laplacian, scaled into
/// [-10, 10] with a little seeded jitter. Falls back to seeded uniform
/// [-10, 10] coordinates when the eigen-solve is not possible or fails.
Matrix initial_layout(const FuzzyGraph& graph, int n_components, std::uint64_t seed);

using EpochCallback = std::function<void(int epoch, const Matrix& coords)>;

/// Negative-sampling SGD over the cross-entropy between the graph and the
/// low-dimensional memberships, starting at `initial`.
Matrix optimize_layout(const FuzzyGraph& graph, const ReduceParams& params, Matrix initial,
                       const EpochCallback& on_epoch = {});

/// As above, starting from initial_layout(graph, ...).
Matrix optimize_layout(const FuzzyGraph& graph, const ReduceParams& params);

/// knn -> smooth_knn -> fuzzy_graph -> optimize_layout.
Matrix reduce(const Matrix& points, const ReduceParams& params);

}  // namespace themescope::reduce
