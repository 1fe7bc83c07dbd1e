#include "themescope/embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <unordered_map>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"

namespace themescope::embed {

namespace {

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Projection entry (bucket, column) is a pure function of the seed, so the
// buckets x dim matrix never has to be materialised.
double projection_sign(std::uint64_t seed, std::uint64_t bucket, std::uint64_t column) {
    const std::uint64_t h = splitmix64(splitmix64(seed ^ 0x5851f42d4c957f2dULL) ^ (bucket * 0x100000001b3ULL + column));
    return (h >> 63) ? 1.0 : -1.0;
}

std::uint32_t read_u32le(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

void write_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

double norm(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

std::vector<bool> normalize_rows(Matrix& m) {
    std::vector<bool> zero(m.rows(), false);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double n = norm(row);
        if (n == 0.0 || !std::isfinite(n)) {
            std::fill(row.begin(), row.end(), 0.0);
            zero[r] = true;
            continue;
        }
        for (double& x : row) x /= n;
    }
    return zero;
}

EmbeddingMatrix embed_hashed(std::span<const preprocess::Tokens> corpus, const HashedParams& params) {
    if (corpus.empty()) throw EmptyCorpusError("embed_hashed needs at least one sentence");
    if (params.dim < 2) throw ParamError("dim must be >= 2");
    if (params.buckets < params.dim) throw ParamError("buckets must be >= dim");

    const auto buckets = static_cast<std::uint64_t>(params.buckets);
    const auto dim = static_cast<std::size_t>(params.dim);
    const std::size_t n = corpus.size();

    // Signed bucket counts per sentence, ordered by bucket for a fixed
    // summation order.
    std::vector<std::map<std::uint64_t, double>> counts(n);
    std::unordered_map<std::uint64_t, int> df;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& token : corpus[i]) {
            const std::uint64_t h = fnv1a(token);
            const std::uint64_t bucket = h % buckets;
            const double sign = (splitmix64(h) >> 63) ? 1.0 : -1.0;
            counts[i][bucket] += sign;
        }
        for (const auto& [bucket, value] : counts[i]) {
            if (value != 0.0) ++df[bucket];
        }
    }

    EmbeddingMatrix out;
    out.values = Matrix(n, dim);
    out.backend = Backend::hashed;
    out.seed = params.seed;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));

    parallel_for(n, [&](std::size_t i) {
        std::vector<std::pair<std::uint64_t, double>> weighted;
        double sq = 0;
        for (const auto& [bucket, value] : counts[i]) {
            if (value == 0.0) continue;
            const double idf = std::log((1.0 + n) / (1.0 + df.at(bucket))) + 1.0;
            weighted.emplace_back(bucket, value * idf);
            sq += value * idf * value * idf;
        }
        if (sq == 0.0) return;
        const double inv = 1.0 / std::sqrt(sq);
        auto row = out.values.row(i);
        for (const auto& [bucket, w] : weighted) {
            for (std::size_t c = 0; c < dim; ++c) row[c] += w * inv * scale * projection_sign(params.seed, bucket, c);
        }
    });
    out.zero_rows = normalize_rows(out.values);
    return out;
}

EmbeddingMatrix parse_emb1(std::span<const std::uint8_t> bytes, std::size_t expected_n) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "EMB1", 4) != 0) {
        throw FormatError("missing EMB1 magic or truncated header");
    }
    const std::size_t n = read_u32le(bytes, 4);
    const std::size_t dim = read_u32le(bytes, 8);
    if (dim == 0) throw FormatError("EMB1 dim must be positive");
    if (bytes.size() != 12 + n * dim * 4) {
        throw FormatError("EMB1 payload size " + std::to_string(bytes.size() - 12) + " does not match " +
                          std::to_string(n) + "x" + std::to_string(dim) + " float32");
    }
    if (n != expected_n) {
        throw RowCountMismatch("expected " + std::to_string(expected_n) + " rows, file has " + std::to_string(n));
    }
    EmbeddingMatrix out;
    out.values = Matrix(n, dim);
    out.backend = Backend::external;
    for (std::size_t k = 0; k < n * dim; ++k) {
        out.values.values()[k] = std::bit_cast<float>(read_u32le(bytes, 12 + 4 * k));
    }
    out.zero_rows = normalize_rows(out.values);
    return out;
}

EmbeddingMatrix load_external_embeddings(const std::filesystem::path& path, std::size_t expected_n) {
    const std::string raw = io::read_text(path);
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
    return parse_emb1(bytes, expected_n);
}

std::vector<std::uint8_t> encode_emb1(const Matrix& values) {
    std::vector<std::uint8_t> out{'E', 'M', 'B', '1'};
    out.reserve(12 + values.values().size() * 4);
    write_u32le(out, static_cast<std::uint32_t>(values.rows()));
    write_u32le(out, static_cast<std::uint32_t>(values.cols()));
    for (double v : values.values()) write_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

void save_embeddings(const std::filesystem::path& path, const Matrix& values) {
    const auto bytes = encode_emb1(values);
    io::atomic_write(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ParamError("cosine_distance: length mismatch");
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw ZeroVectorError("cosine_distance of a zero vector");
    return std::clamp(1.0 - dot / (std::sqrt(nu) * std::sqrt(nv)), 0.0, 2.0);
}

}  // namespace themescope::embed
