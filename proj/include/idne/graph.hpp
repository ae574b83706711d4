#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/rng.hpp"

namespace idne {

// Symmetric binary adjacency with zero diagonal, stored as sorted neighbor
// lists.
struct DocumentGraph {
    std::size_t n_nodes = 0;
    std::vector<std::vector<std::uint32_t>> adj;

    bool has_edge(std::uint32_t i, std::uint32_t j) const;
    std::size_t undirected_edges() const;  // nonzeros / 2

    // Induced subgraph over `keep` (sorted node ids); node k of the result is
    // keep[k].
    DocumentGraph subgraph(const std::vector<std::uint32_t>& keep) const;
};

DocumentGraph build_graph(const RawCorpus& corpus);
DocumentGraph build_graph(std::size_t n_nodes,
                          const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);

// delta[i][j] = 1 iff (A + A^2)[i][j] > 0 for i != j; pos_weight keeps the
// integer path counts for weighted positive sampling.
struct ReachabilityMatrix {
    std::size_t n_nodes = 0;
    std::vector<std::vector<std::uint32_t>> delta_rows;  // sorted, diagonal excluded
    std::vector<std::vector<TermCount>> weight_rows;     // (node, path count), aligned

    bool reachable(std::uint32_t i, std::uint32_t j) const;
    std::size_t positive_count() const;  // ordered pairs
    double density() const;
};

ReachabilityMatrix build_delta(const DocumentGraph& graph);

struct PairBatch {
    struct Pair {
        std::uint32_t i;
        std::uint32_t j;
        std::uint8_t label;  // 1 = reachable
    };
    std::vector<Pair> pairs;
};

// Balanced positive/negative sampler over an immutable reachability matrix.
// Positives are drawn proportional to path counts, negatives uniformly by
// rejection. Owns its random state; one instance per training run.
class PairSampler {
public:
    // `excluded` marks docs (all-zero term rows) that must not appear in any
    // sampled pair.
    PairSampler(const ReachabilityMatrix& reach, std::uint64_t seed,
                const std::vector<std::uint8_t>* excluded = nullptr);

    PairBatch sample_batch(std::size_t batch_size);

    std::size_t positive_support() const { return positive_pairs_.size(); }

private:
    static constexpr std::size_t kMaxRejects = 10000;

    const ReachabilityMatrix* reach_;
    Rng rng_;
    std::vector<std::uint8_t> excluded_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> positive_pairs_;
    std::vector<double> cumulative_;  // over positive_pairs_
    bool negatives_exist_ = false;

    std::pair<std::uint32_t, std::uint32_t> draw_positive();
    std::pair<std::uint32_t, std::uint32_t> draw_negative();
};

}  // namespace idne
