#pragma once

// Shared fixtures and independent oracles. The oracles deliberately avoid the
// library's numeric helpers: plain scalar arithmetic, different loop shapes.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/graph.hpp"
#include "idne/model.hpp"
#include "idne/rng.hpp"
#include "idne/trainer.hpp"

namespace testutil {

inline std::filesystem::path make_temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("idne_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

// --- planted two-clique corpus -------------------------------------------
// 20 docs in two 10-doc cliques with disjoint 5-word vocabularies. Every word
// appears in exactly 5 docs, which sits right on both pruning boundaries
// (min df 5, max df 0.25 * 20 = 5).

inline idne::RawCorpus make_two_clique_corpus(std::uint64_t seed = 7) {
    static const char* kAlpha[5] = {"amber", "apple", "arbor", "ashen", "azure"};
    static const char* kBeta[5] = {"basil", "beach", "bison", "blaze", "brook"};

    idne::RawCorpus corpus;
    idne::Rng rng(seed);
    for (int clique = 0; clique < 2; ++clique) {
        const char** pool = clique == 0 ? kAlpha : kBeta;
        for (int d = 0; d < 10; ++d) {
            idne::RawDoc doc;
            doc.id = (clique == 0 ? "a" : "b") + std::to_string(d);
            doc.labels.push_back(clique == 0 ? "east" : "west");
            std::string text;
            for (int w = 0; w < 5; ++w) {
                // word w covers positions 2w .. 2w+4 (mod 10): df exactly 5
                const int rel = (d - 2 * w) % 10;
                const int pos = rel < 0 ? rel + 10 : rel;
                if (pos > 4) continue;
                const auto repeats = 1 + rng.below(3);
                for (std::uint64_t r = 0; r < repeats; ++r) {
                    if (!text.empty()) text += ' ';
                    text += pool[w];
                }
            }
            doc.text = text;
            corpus.id_to_index.emplace(doc.id,
                                       static_cast<std::uint32_t>(corpus.docs.size()));
            corpus.docs.push_back(std::move(doc));
        }
    }
    for (std::uint32_t base : {0u, 10u})
        for (std::uint32_t i = 0; i < 10; ++i)
            for (std::uint32_t j = i + 1; j < 10; ++j)
                corpus.edges.emplace_back(base + i, base + j);
    return corpus;
}

// Same corpus as generic-format files, for CLI-level tests.
inline void write_two_clique_files(const std::filesystem::path& docs_path,
                                   const std::filesystem::path& edges_path,
                                   std::uint64_t seed = 7) {
    const idne::RawCorpus corpus = make_two_clique_corpus(seed);
    std::ofstream docs(docs_path);
    for (const auto& doc : corpus.docs)
        docs << doc.id << '\t' << doc.labels[0] << '\t' << doc.text << '\n';
    std::ofstream edges(edges_path);
    for (const auto& [a, b] : corpus.edges)
        edges << corpus.docs[a].id << '\t' << corpus.docs[b].id << '\n';
}

// --- planted communities ---------------------------------------------------
// Mid-scale corpus for protocol tests: dense intra-class linking, per-class
// signature vocabularies plus a shared pool.

inline std::string synth_word(std::size_t index) {
    std::string w = "q";
    for (int i = 0; i < 3; ++i) {
        w.push_back(static_cast<char>('a' + index % 26));
        index /= 26;
    }
    return w;
}

inline idne::RawCorpus make_community_corpus(std::size_t n_classes = 5,
                                             std::size_t docs_per_class = 42,
                                             std::uint64_t seed = 11) {
    constexpr std::size_t kSignatureWords = 12;
    constexpr std::size_t kSharedWords = 15;
    idne::RawCorpus corpus;
    idne::Rng rng(seed);

    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t d = 0; d < docs_per_class; ++d) {
            idne::RawDoc doc;
            doc.id = "d" + std::to_string(c) + "x" + std::to_string(d);
            doc.labels.push_back("class" + std::to_string(c));
            std::string text;
            const std::size_t n_sig = 8 + rng.below(8);
            for (std::size_t t = 0; t < n_sig; ++t) {
                if (!text.empty()) text += ' ';
                text += synth_word(c * kSignatureWords + rng.below(kSignatureWords));
            }
            const std::size_t n_shared = 2 + rng.below(3);
            for (std::size_t t = 0; t < n_shared; ++t) {
                text += ' ';
                text += synth_word(1000 + rng.below(kSharedWords));
            }
            doc.text = text;
            corpus.id_to_index.emplace(doc.id,
                                       static_cast<std::uint32_t>(corpus.docs.size()));
            corpus.docs.push_back(std::move(doc));
        }
    }

    const std::size_t n = corpus.docs.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i / docs_per_class;
        for (int e = 0; e < 3; ++e) {
            std::size_t j = c * docs_per_class + rng.below(docs_per_class);
            if (rng.below(10) == 0) j = rng.below(n);  // occasional cross link
            if (j == i) continue;
            corpus.edges.emplace_back(static_cast<std::uint32_t>(i),
                                      static_cast<std::uint32_t>(j));
        }
    }
    return corpus;
}

// --- independent oracles ---------------------------------------------------

struct DenseDelta {
    std::vector<std::vector<int>> weight;  // (A + A^2) with zeroed diagonal
    std::vector<std::vector<bool>> delta;
};

inline DenseDelta brute_force_delta(std::size_t n,
                                    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
    for (auto [i, j] : edges) {
        if (i == j) continue;
        a[i][j] = 1;
        a[j][i] = 1;
    }
    DenseDelta out;
    out.weight.assign(n, std::vector<int>(n, 0));
    out.delta.assign(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            int paths = a[i][j];
            for (std::size_t k = 0; k < n; ++k) paths += a[i][k] * a[k][j];
            if (i != j) {
                out.weight[i][j] = paths;
                out.delta[i][j] = paths > 0;
            }
        }
    }
    return out;
}

// Scalar recomputation of the document embedding in extended precision,
// word-major instead of topic-major.
inline std::vector<double> oracle_embed(const idne::ModelParams& params,
                                        const std::vector<idne::TermCount>& row) {
    const std::size_t n_topics = params.n_topics;
    const std::size_t dim = params.dim;
    long double total = 0.0L;
    for (const auto& tc : row) total += tc.count;

    std::vector<long double> d(dim, 0.0L);
    for (const auto& tc : row) {
        std::vector<long double> rect(n_topics, 0.0L);
        long double col_sum = 0.0L;
        for (std::size_t k = 0; k < n_topics; ++k) {
            long double a = 0.0L;
            for (std::size_t j = 0; j < dim; ++j)
                a += static_cast<long double>(params.T.at(k, j)) *
                     static_cast<long double>(params.W.at(tc.term, j));
            rect[k] = a > 0.0L ? a : 0.0L;
            col_sum += rect[k];
        }
        if (col_sum <= 1e-12L) continue;  // fallback column, contributes nothing
        for (std::size_t k = 0; k < n_topics; ++k) {
            const long double z = rect[k] / col_sum;
            for (std::size_t j = 0; j < dim; ++j)
                d[j] += z * static_cast<long double>(tc.count) *
                        static_cast<long double>(params.W.at(tc.term, j)) / total;
        }
    }
    return std::vector<double>(d.begin(), d.end());
}

// Mean batch loss through the public forward path, for finite differences.
inline double batch_loss(const idne::ModelParams& params, const idne::DocTermMatrix& X,
                         const idne::PairBatch& batch) {
    double loss = 0.0;
    for (const auto& pr : batch.pairs) {
        const auto di = idne::embed_doc(params, X.row(pr.i));
        const auto dj = idne::embed_doc(params, X.row(pr.j));
        loss += idne::pair_loss(di.d, dj.d, pr.label);
    }
    return loss / static_cast<double>(batch.pairs.size());
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_gradient = 0.0;  // guards against vacuously-zero instances
    std::size_t checked = 0;
};

// Central differences with h = 1e-5 against every coordinate of the analytic
// gradient. Near-zero coordinates use an absolute floor: FD noise on a
// structurally-zero coordinate is ~1e-10, which would otherwise divide by
// nothing meaningful.
inline GradCheckResult finite_difference_check(const idne::ModelParams& params,
                                               const idne::DocTermMatrix& X,
                                               const idne::PairBatch& batch) {
    constexpr double h = 1e-5;
    constexpr double floor = 1e-2;
    const idne::BatchGradients grads = idne::batch_gradients(params, X, batch);

    GradCheckResult result;
    auto run = [&](bool is_w) {
        idne::ModelParams probe = params;
        idne::Matrix& theta = is_w ? probe.W : probe.T;
        const idne::Matrix& analytic = is_w ? grads.grad_W : grads.grad_T;
        for (std::size_t idx = 0; idx < theta.data.size(); ++idx) {
            const double saved = theta.data[idx];
            theta.data[idx] = saved + h;
            const double up = batch_loss(probe, X, batch);
            theta.data[idx] = saved - h;
            const double down = batch_loss(probe, X, batch);
            theta.data[idx] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double a = analytic.data[idx];
            const double denom = std::max({std::fabs(a), std::fabs(fd), floor});
            const double rel = std::fabs(a - fd) / denom;
            if (rel > result.max_rel_error) result.max_rel_error = rel;
            if (std::fabs(a) > result.max_gradient) result.max_gradient = std::fabs(a);
            ++result.checked;
        }
    };
    run(true);
    run(false);
    return result;
}

// Random small instance with margins away from ReLU kinks and fallback
// thresholds so the finite differences stay on one smooth piece.
struct SmallInstance {
    idne::ModelParams params;
    idne::DocTermMatrix X;
    idne::PairBatch batch;
};

inline SmallInstance make_small_instance(std::uint64_t seed, std::size_t max_topics = 3,
                                         std::size_t max_dim = 4, std::size_t max_vocab = 6,
                                         std::size_t max_docs = 4) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        idne::Rng rng(idne::derive_seed(seed, "instance", attempt));
        const std::size_t n_topics = 1 + rng.below(max_topics);
        const std::size_t dim = 1 + rng.below(max_dim);
        const std::size_t n_vocab = 2 + rng.below(max_vocab - 1);
        const std::size_t n_docs = 2 + rng.below(max_docs - 1);

        SmallInstance inst;
        inst.params = idne::init_params(n_vocab, n_topics, dim, idne::derive_seed(seed, "p", attempt));
        // widen the spread so dot products have healthy margins
        for (auto& v : inst.params.W.data) v *= 3.0;
        for (auto& v : inst.params.T.data) v *= 3.0;

        inst.X.n_docs = n_docs;
        inst.X.n_terms = n_vocab;
        inst.X.rows.resize(n_docs);
        for (std::size_t i = 0; i < n_docs; ++i) {
            const std::size_t n_words = 1 + rng.below(std::min<std::size_t>(n_vocab, 4));
            std::vector<std::uint32_t> terms;
            for (std::size_t w = 0; w < n_vocab && terms.size() < n_words; ++w)
                if (rng.below(2) == 0) terms.push_back(static_cast<std::uint32_t>(w));
            if (terms.empty()) terms.push_back(static_cast<std::uint32_t>(rng.below(n_vocab)));
            for (auto t : terms)
                inst.X.rows[i].push_back({t, static_cast<std::uint32_t>(1 + rng.below(3))});
        }

        const std::size_t n_pairs = 1 + rng.below(3);
        for (std::size_t k = 0; k < n_pairs; ++k) {
            const auto i = static_cast<std::uint32_t>(rng.below(n_docs));
            auto j = static_cast<std::uint32_t>(rng.below(n_docs));
            if (j == i) j = (j + 1) % n_docs;
            inst.batch.pairs.push_back({i, j, static_cast<std::uint8_t>(rng.below(2))});
        }

        // margin check: every rectified score and column sum well away from
        // the kink/threshold
        bool ok = true;
        std::vector<std::uint8_t> doc_active(n_docs, 0);
        for (std::size_t i = 0; i < n_docs && ok; ++i) {
            for (const auto& tc : inst.X.rows[i]) {
                double col_sum = 0.0;
                for (std::size_t k = 0; k < n_topics; ++k) {
                    const double a = idne::dot(inst.params.T.row(k),
                                               inst.params.W.row(tc.term), dim);
                    if (std::fabs(a) < 1e-3) ok = false;
                    if (a > 0) col_sum += a;
                }
                if (col_sum > 0 && col_sum < 1e-3) ok = false;
                if (col_sum > 0) doc_active[i] = 1;
            }
        }
        // at least one pair with both sides non-degenerate, so the gradient
        // check never passes vacuously (the all-fallback path has its own test)
        bool live_pair = false;
        for (const auto& pr : inst.batch.pairs)
            if (doc_active[pr.i] && doc_active[pr.j]) live_pair = true;
        if (ok && live_pair) return inst;
    }
}

}  // namespace testutil
