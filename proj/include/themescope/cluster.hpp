#pragma once

#include <optional>
#include <vector>

#include "themescope/matrix.hpp"

namespace themescope::cluster {

struct ClusterParams {
    int min_cluster_size = 10;
    std::optional<int> min_samples;  // defaults to min_cluster_size

    int effective_min_samples() const { return min_samples.value_or(min_cluster_size); }
};

struct ClusterLabels {
    std::vector<int> labels;          // -1 noise, else 0..m-1
    std::vector<double> stabilities;  // per selected cluster
    std::vector<double> lambda_leave; // per point, lambda at which it left its last condensed cluster

    int cluster_count() const { return static_cast<int>(stabilities.size()); }
};

struct MstEdge {
    std::size_t i = 0;  // i < j
    std::size_t j = 0;
    double weight = 0;

    friend bool operator==(const MstEdge&, const MstEdge&) = default;
};

Matrix pairwise_distances(const Matrix& points);

/// Euclidean distance to the min_samples-th nearest neighbour, self excluded.
/// Throws ParamError when min_samples >= n or min_samples < 1.
std::vector<double> core_distances(const Matrix& points, int min_samples);

/// mr(a, b) = max(core(a), core(b), d(a, b)); zero diagonal.
Matrix mutual_reachability(const Matrix& distances, const std::vector<double>& core);

/// Prim's algorithm on a dense symmetric matrix. Ties are resolved by
/// (weight, min index, max index). Edges are returned sorted the same way.
/// Throws ParamError when n < 2.
std::vector<MstEdge> mst(const Matrix& weights);

/// Single-linkage hierarchy from the MST, condensed with `min_cluster_size`,
/// flat clusters chosen by excess of mass. The root is only eligible when it
/// has no child clusters. Labels are numbered in condensed-tree order.
ClusterLabels condense_and_extract(const std::vector<MstEdge>& edges, std::size_t n, int min_cluster_size);

/// Full pipeline over euclidean coordinates. When n < min_cluster_size every
/// point is noise.
ClusterLabels cluster(const Matrix& points, const ClusterParams& params);

}  // namespace themescope::cluster
