#include "idne/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace idne {

namespace {

bool sorted_contains(const std::vector<std::uint32_t>& v, std::uint32_t x) {
    return std::binary_search(v.begin(), v.end(), x);
}

}  // namespace

bool DocumentGraph::has_edge(std::uint32_t i, std::uint32_t j) const {
    return sorted_contains(adj[i], j);
}

std::size_t DocumentGraph::undirected_edges() const {
    std::size_t nnz = 0;
    for (const auto& row : adj) nnz += row.size();
    return nnz / 2;
}

DocumentGraph DocumentGraph::subgraph(const std::vector<std::uint32_t>& keep) const {
    std::vector<std::int64_t> remap(n_nodes, -1);
    for (std::size_t k = 0; k < keep.size(); ++k) remap[keep[k]] = static_cast<std::int64_t>(k);
    DocumentGraph sub;
    sub.n_nodes = keep.size();
    sub.adj.resize(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        for (std::uint32_t j : adj[keep[k]]) {
            if (remap[j] >= 0) sub.adj[k].push_back(static_cast<std::uint32_t>(remap[j]));
        }
        // source lists are sorted, remap is monotone, so rows stay sorted
    }
    return sub;
}

DocumentGraph build_graph(std::size_t n_nodes,
                          const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    DocumentGraph g;
    g.n_nodes = n_nodes;
    g.adj.resize(n_nodes);
    for (const auto& [a, b] : edges) {
        if (a == b) continue;  // self-loops dropped
        if (a >= n_nodes || b >= n_nodes) throw std::runtime_error("edge endpoint out of range");
        g.adj[a].push_back(b);
        g.adj[b].push_back(a);
    }
    for (auto& row : g.adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());  // parallel edges collapsed
    }
    return g;
}

DocumentGraph build_graph(const RawCorpus& corpus) {
    return build_graph(corpus.n_docs(), corpus.edges);
}

bool ReachabilityMatrix::reachable(std::uint32_t i, std::uint32_t j) const {
    return sorted_contains(delta_rows[i], j);
}

std::size_t ReachabilityMatrix::positive_count() const {
    std::size_t n = 0;
    for (const auto& row : delta_rows) n += row.size();
    return n;
}

double ReachabilityMatrix::density() const {
    if (n_nodes < 2) return 0.0;
    return static_cast<double>(positive_count()) /
           (static_cast<double>(n_nodes) * static_cast<double>(n_nodes - 1));
}

ReachabilityMatrix build_delta(const DocumentGraph& graph) {
    ReachabilityMatrix reach;
    reach.n_nodes = graph.n_nodes;
    reach.delta_rows.resize(graph.n_nodes);
    reach.weight_rows.resize(graph.n_nodes);

    // (A + A^2) row by row with a scratch accumulator; diagonal forced to 0
    std::vector<std::uint32_t> path_count(graph.n_nodes, 0);
    std::vector<std::uint32_t> touched;
    for (std::uint32_t i = 0; i < graph.n_nodes; ++i) {
        touched.clear();
        for (std::uint32_t j : graph.adj[i]) {
            if (path_count[j]++ == 0) touched.push_back(j);
            for (std::uint32_t k : graph.adj[j]) {
                if (path_count[k]++ == 0) touched.push_back(k);
            }
        }
        std::sort(touched.begin(), touched.end());
        auto& drow = reach.delta_rows[i];
        auto& wrow = reach.weight_rows[i];
        for (std::uint32_t j : touched) {
            if (j != i) {
                drow.push_back(j);
                wrow.push_back({j, path_count[j]});
            }
            path_count[j] = 0;
        }
    }
    return reach;
}

PairSampler::PairSampler(const ReachabilityMatrix& reach, std::uint64_t seed,
                         const std::vector<std::uint8_t>* excluded)
    : reach_(&reach), rng_(seed) {
    excluded_.assign(reach.n_nodes, 0);
    if (excluded) {
        if (excluded->size() != reach.n_nodes)
            throw std::invalid_argument("exclusion mask size mismatch");
        excluded_ = *excluded;
    }

    std::size_t eligible = 0;
    for (std::size_t i = 0; i < reach.n_nodes; ++i)
        if (!excluded_[i]) ++eligible;

    double total = 0.0;
    for (std::uint32_t i = 0; i < reach.n_nodes; ++i) {
        if (excluded_[i]) continue;
        for (const auto& [j, w] : reach.weight_rows[i]) {
            if (excluded_[j]) continue;
            positive_pairs_.emplace_back(i, j);
            total += static_cast<double>(w);
            cumulative_.push_back(total);
        }
    }
    negatives_exist_ =
        eligible >= 2 &&
        static_cast<std::size_t>(eligible) * (eligible - 1) > positive_pairs_.size();
}

std::pair<std::uint32_t, std::uint32_t> PairSampler::draw_positive() {
    const double u = rng_.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cumulative_.begin());
    if (idx >= positive_pairs_.size()) idx = positive_pairs_.size() - 1;
    return positive_pairs_[idx];
}

std::pair<std::uint32_t, std::uint32_t> PairSampler::draw_negative() {
    const std::uint64_t n = reach_->n_nodes;
    for (std::size_t attempt = 0; attempt < kMaxRejects; ++attempt) {
        auto i = static_cast<std::uint32_t>(rng_.below(n));
        auto j = static_cast<std::uint32_t>(rng_.below(n));
        if (i == j || excluded_[i] || excluded_[j]) continue;
        if (reach_->reachable(i, j)) continue;
        return {i, j};
    }
    throw std::runtime_error("negative sampling exceeded the rejection cap");
}

PairBatch PairSampler::sample_batch(std::size_t batch_size) {
    if (batch_size == 0 || batch_size % 2 != 0)
        throw std::invalid_argument("batch size must be even and positive");
    if (positive_pairs_.empty())
        throw std::runtime_error("no positive pairs to sample");
    if (!negatives_exist_)
        throw std::runtime_error("no negative pairs to sample (graph is complete)");

    PairBatch batch;
    batch.pairs.reserve(batch_size);
    for (std::size_t k = 0; k < batch_size / 2; ++k) {
        auto [i, j] = draw_positive();
        batch.pairs.push_back({i, j, 1});
    }
    for (std::size_t k = 0; k < batch_size / 2; ++k) {
        auto [i, j] = draw_negative();
        batch.pairs.push_back({i, j, 0});
    }
    return batch;
}

}  // namespace idne
