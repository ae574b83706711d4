#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/matrix.hpp"

namespace idne {

// Word and topic vectors in one shared embedding space.
struct ModelParams {
    std::size_t n_words = 0;
    std::size_t n_topics = 0;
    std::size_t dim = 0;
    Matrix W;  // n_words x dim
    Matrix T;  // n_topics x dim
};

// i.i.d. uniform on [-1/sqrt(dim), +1/sqrt(dim)], deterministic per seed.
ModelParams init_params(std::size_t n_words, std::size_t n_topics, std::size_t dim,
                        std::uint64_t seed);

// Columns whose rectified scores sum to <= kAttentionEps are left all-zero
// and reported as fallback columns; the word then contributes nothing to the
// document vector.
constexpr double kAttentionEps = 1e-12;

struct AttentionMap {
    std::vector<std::uint32_t> term_indices;  // the document's distinct vocab ids
    std::vector<std::uint32_t> counts;
    Matrix Z;                                 // n_topics x n_distinct, column-stochastic
    std::vector<std::uint8_t> fallback;       // per column
    std::vector<double> column_sums;          // pre-normalization rectified sums

    std::size_t n_fallback() const;
};

// Z column w: relu(T . W[w]) normalized to sum 1. Counts never enter the
// computation; normalization would cancel them anyway.
AttentionMap attention(const ModelParams& params, TermCounts doc_row);

struct DocEmbedding {
    std::vector<double> d;  // dim
    Matrix topic_parts;     // n_topics x dim, d = sum of rows
};

// Shared by training and induction: topic part k is the attention-weighted,
// count-weighted average of the word vectors, scaled by 1/|X_i|_1; d is the
// sum of the topic parts.
DocEmbedding embed_doc(const ModelParams& params, TermCounts doc_row);
// Same computation over an attention map already in hand (the trainer caches
// one per distinct document in a batch).
DocEmbedding embed_doc(const ModelParams& params, const AttentionMap& map);

// Row per document; flagged all-zero rows embed as the zero vector.
Matrix embed_corpus(const ModelParams& params, const DocTermMatrix& X);

// Checkpoint: fixed header + row-major little-endian float32 W then T. The
// vocabulary is stored alongside as one term per line and hashed into the
// header so index alignment at inductive time is guaranteed.
std::uint64_t vocab_hash(const Vocabulary& vocab);
void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     const std::string& model_path, const std::string& vocab_path);
std::pair<ModelParams, Vocabulary> load_checkpoint(const std::string& model_path,
                                                   const std::string& vocab_path);

}  // namespace idne
