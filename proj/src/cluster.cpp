#include "themescope/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "themescope/error.hpp"

namespace themescope::cluster {

namespace {

// Smallest merge distance used when converting to lambda = 1 / distance, so
// duplicate points yield a large finite lambda instead of infinity.
constexpr double kMinMergeDistance = 1e-12;

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
};

struct Merge {
    std::size_t left, right;
    double distance;
    std::size_t size;
};

struct CondensedEntry {
    std::size_t parent;  // condensed cluster label
    std::size_t child;   // point index (< n) or cluster label (>= n)
    double lambda;
    std::size_t child_size;
};

}  // namespace

Matrix pairwise_distances(const Matrix& points) {
    const std::size_t n = points.rows();
    Matrix d(n, n);
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double s = 0;
            for (std::size_t c = 0; c < points.cols(); ++c) {
                const double diff = points(i, c) - points(j, c);
                s += diff * diff;
            }
            d(i, j) = std::sqrt(s);
        }
    });
    return d;
}

std::vector<double> core_distances(const Matrix& points, int min_samples) {
    const std::size_t n = points.rows();
    if (min_samples < 1 || static_cast<std::size_t>(min_samples) >= n) {
        throw ParamError("core_distances needs 1 <= min_samples < n");
    }
    const Matrix d = pairwise_distances(points);
    std::vector<double> core(n);
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> row;
        row.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) row.push_back(d(i, j));
        }
        auto kth = row.begin() + (min_samples - 1);
        std::nth_element(row.begin(), kth, row.end());
        core[i] = *kth;
    });
    return core;
}

Matrix mutual_reachability(const Matrix& distances, const std::vector<double>& core) {
    const std::size_t n = distances.rows();
    if (distances.cols() != n || core.size() != n) throw ParamError("mutual_reachability: shape mismatch");
    Matrix mr(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a != b) mr(a, b) = std::max({core[a], core[b], distances(a, b)});
        }
    }
    return mr;
}

std::vector<MstEdge> mst(const Matrix& weights) {
    const std::size_t n = weights.rows();
    if (n < 2) throw ParamError("mst needs at least 2 points");

    using Key = std::tuple<double, std::size_t, std::size_t>;
    const Key none{std::numeric_limits<double>::infinity(), n, n};
    auto key_of = [](double w, std::size_t a, std::size_t b) { return Key{w, std::min(a, b), std::max(a, b)}; };

    std::vector<bool> in_tree(n, false);
    std::vector<Key> best(n, none);
    std::vector<MstEdge> edges;
    edges.reserve(n - 1);

    in_tree[0] = true;
    for (std::size_t v = 1; v < n; ++v) best[v] = key_of(weights(0, v), 0, v);

    for (std::size_t step = 1; step < n; ++step) {
        std::size_t pick = n;
        for (std::size_t v = 0; v < n; ++v) {
            if (!in_tree[v] && (pick == n || best[v] < best[pick])) pick = v;
        }
        const auto [w, a, b] = best[pick];
        edges.push_back({a, b, w});
        in_tree[pick] = true;
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            const Key candidate = key_of(weights(pick, v), pick, v);
            if (candidate < best[v]) best[v] = candidate;
        }
    }
    std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
        return std::tie(x.weight, x.i, x.j) < std::tie(y.weight, y.i, y.j);
    });
    return edges;
}

ClusterLabels condense_and_extract(const std::vector<MstEdge>& edges, std::size_t n, int min_cluster_size) {
    ClusterLabels out;
    out.labels.assign(n, -1);
    out.lambda_leave.assign(n, 0.0);
    const auto mcs = static_cast<std::size_t>(std::max(min_cluster_size, 1));
    if (n < 2 || n < mcs) return out;
    if (edges.size() + 1 != n) throw ParamError("condense_and_extract: expected n-1 MST edges");

    // Single-linkage dendrogram: node ids < n are points, n + k is merge k.
    auto sorted = edges;
    std::sort(sorted.begin(), sorted.end(), [](const MstEdge& x, const MstEdge& y) {
        return std::tie(x.weight, x.i, x.j) < std::tie(y.weight, y.i, y.j);
    });
    std::vector<Merge> merges;
    merges.reserve(n - 1);
    UnionFind uf(2 * n - 1);
    std::vector<std::size_t> node_size(2 * n - 1, 1);
    for (const auto& e : sorted) {
        const std::size_t ra = uf.find(e.i), rb = uf.find(e.j);
        const std::size_t node = n + merges.size();
        merges.push_back({ra, rb, e.weight, node_size[ra] + node_size[rb]});
        node_size[node] = node_size[ra] + node_size[rb];
        uf.parent[ra] = node;
        uf.parent[rb] = node;
    }

    auto leaves_of = [&](std::size_t node, auto&& emit) {
        std::vector<std::size_t> stack{node};
        while (!stack.empty()) {
            const std::size_t x = stack.back();
            stack.pop_back();
            if (x < n) {
                emit(x);
            } else {
                stack.push_back(merges[x - n].right);
                stack.push_back(merges[x - n].left);
            }
        }
    };
    auto lambda_of = [](double distance) { return 1.0 / std::max(distance, kMinMergeDistance); };

    // Condense: walk down from the root carrying the condensed label.
    std::vector<CondensedEntry> condensed;
    std::size_t next_label = n + 1;
    const std::size_t root = 2 * n - 2;
    std::vector<std::pair<std::size_t, std::size_t>> work{{root, n}};  // (dendrogram node, condensed label)
    while (!work.empty()) {
        auto [node, label] = work.back();
        work.pop_back();
        const Merge& m = merges[node - n];
        const double lambda = lambda_of(m.distance);
        const std::size_t ls = node_size[m.left], rs = node_size[m.right];
        const bool left_big = ls >= mcs, right_big = rs >= mcs;
        auto fall_out = [&](std::size_t child) {
            leaves_of(child, [&](std::size_t p) { condensed.push_back({label, p, lambda, 1}); });
        };
        auto continue_as = [&](std::size_t child, std::size_t child_label) {
            if (child < n) {
                condensed.push_back({child_label == label ? label : child_label, child, lambda, 1});
            } else {
                work.emplace_back(child, child_label);
            }
        };
        if (left_big && right_big) {
            const std::size_t l_label = next_label++;
            const std::size_t r_label = next_label++;
            condensed.push_back({label, l_label, lambda, ls});
            condensed.push_back({label, r_label, lambda, rs});
            continue_as(m.left, l_label);
            continue_as(m.right, r_label);
        } else if (!left_big && !right_big) {
            fall_out(m.left);
            fall_out(m.right);
        } else if (left_big) {
            fall_out(m.right);
            continue_as(m.left, label);
        } else {
            fall_out(m.left);
            continue_as(m.right, label);
        }
    }
    // A child cluster that is a single point (mcs == 1) is recorded as a point
    // entry above; every cluster label >= n below is a true condensed cluster.

    const std::size_t n_clusters = next_label - n;
    std::vector<double> birth(n_clusters, 0.0);
    std::vector<double> stability(n_clusters, 0.0);
    std::vector<std::vector<std::size_t>> children(n_clusters);
    for (const auto& e : condensed) {
        if (e.child >= n) {
            birth[e.child - n] = e.lambda;
            children[e.parent - n].push_back(e.child - n);
        }
    }
    for (const auto& e : condensed) {
        stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * static_cast<double>(e.child_size);
    }

    // Excess of mass, bottom-up: children always carry larger labels.
    std::vector<bool> selected(n_clusters, false);
    std::vector<double> subtree(stability);
    for (std::size_t c = n_clusters; c-- > 1;) {
        double child_sum = 0;
        for (auto ch : children[c]) child_sum += subtree[ch];
        if (children[c].empty() || stability[c] > child_sum) {
            selected[c] = true;
            subtree[c] = stability[c];
        } else {
            subtree[c] = child_sum;
        }
    }
    if (children[0].empty()) selected[0] = true;

    // Deselect descendants of selected clusters.
    std::vector<std::size_t> owner(n_clusters, n_clusters);  // selected ancestor (or self)
    for (std::size_t c = 0; c < n_clusters; ++c) {
        if (owner[c] == n_clusters && selected[c]) owner[c] = c;
        for (auto ch : children[c]) {
            if (owner[c] != n_clusters) {
                owner[ch] = owner[c];
                selected[ch] = false;
            }
        }
    }

    std::vector<int> flat_id(n_clusters, -1);
    for (std::size_t c = 0; c < n_clusters; ++c) {
        if (selected[c]) {
            flat_id[c] = static_cast<int>(out.stabilities.size());
            out.stabilities.push_back(stability[c]);
        }
    }
    for (const auto& e : condensed) {
        if (e.child >= n) continue;
        out.lambda_leave[e.child] = e.lambda;
        const std::size_t o = owner[e.parent - n];
        if (o != n_clusters) out.labels[e.child] = flat_id[o];
    }
    return out;
}

ClusterLabels cluster(const Matrix& points, const ClusterParams& params) {
    const std::size_t n = points.rows();
    if (params.min_cluster_size < 2) throw ParamError("min_cluster_size must be >= 2");
    if (params.effective_min_samples() < 1) throw ParamError("min_samples must be >= 1");
    if (n < static_cast<std::size_t>(params.min_cluster_size) || n < 2) {
        ClusterLabels all_noise;
        all_noise.labels.assign(n, -1);
        all_noise.lambda_leave.assign(n, 0.0);
        return all_noise;
    }
    const int min_samples = std::min<int>(params.effective_min_samples(), static_cast<int>(n) - 1);
    const auto core = core_distances(points, min_samples);
    const auto edges = mst(mutual_reachability(pairwise_distances(points), core));
    return condense_and_extract(edges, n, params.min_cluster_size);
}

}  // namespace themescope::cluster
