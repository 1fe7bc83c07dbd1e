#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "themescope/matrix.hpp"
#include "themescope/preprocess.hpp"

namespace themescope::embed {

enum class Backend { hashed, external };

struct EmbeddingMatrix {
    Matrix values;                 // n x dim, unit rows except flagged ones
    std::vector<bool> zero_rows;   // rows that carry the zero vector
    Backend backend = Backend::hashed;
    std::uint64_t seed = 0;        // hashed backend only

    std::size_t n() const noexcept { return values.rows(); }
    std::size_t dim() const noexcept { return values.cols(); }
};

struct HashedParams {
    int dim = 256;
    int buckets = 32768;
    std::uint64_t seed = 42;
};

/// Signed feature hashing into `buckets` counts, TF-IDF weighting with
/// idf = ln((1+n)/(1+df)) + 1, L2 normalisation, projection through a seeded
/// +-1/sqrt(dim) matrix, L2 normalisation. Output depends only on the token
/// multisets, the corpus-level df table and the parameters.
EmbeddingMatrix embed_hashed(std::span<const preprocess::Tokens> corpus, const HashedParams& params);

/// Reads an EMB1 file: "EMB1", u32le n, u32le dim, n*dim float32le row-major.
EmbeddingMatrix load_external_embeddings(const std::filesystem::path& path, std::size_t expected_n);
EmbeddingMatrix parse_emb1(std::span<const std::uint8_t> bytes, std::size_t expected_n);

/// Writes values as EMB1 (float32, so precision beyond float is dropped).
std::vector<std::uint8_t> encode_emb1(const Matrix& values);
void save_embeddings(const std::filesystem::path& path, const Matrix& values);

/// 1 - cos(u, v), clamped to [0, 2]. Throws ZeroVectorError for a zero
/// vector and ParamError on length mismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Normalises every row to unit L2 norm in place; returns the zero-row flags.
std::vector<bool> normalize_rows(Matrix& m);

}  // namespace themescope::embed
