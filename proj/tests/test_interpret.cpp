#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "idne/interpret.hpp"

using namespace idne;

namespace {

Vocabulary toy_vocab(std::initializer_list<const char*> terms) {
    Vocabulary v;
    for (const char* t : terms) {
        v.term_to_index.emplace(t, static_cast<std::uint32_t>(v.terms.size()));
        v.terms.push_back(t);
    }
    v.doc_freq.assign(v.terms.size(), 1);
    return v;
}

}  // namespace

TEST_SUITE("interpret") {

TEST_CASE("topic_top_words ranks by dot product with deterministic ties") {
    Vocabulary vocab = toy_vocab({"alpha", "beta", "gamma"});
    ModelParams p;
    p.n_words = 3, p.n_topics = 1, p.dim = 2;
    p.W = Matrix(3, 2);
    p.W.at(0, 0) = 1.0;   // alpha . t = 1
    p.W.at(1, 1) = 1.0;   // beta  . t = 0
    p.W.at(2, 0) = 1.0;   // gamma . t = 1 (tie with alpha -> index order)
    p.T = Matrix(1, 2);
    p.T.at(0, 0) = 1.0;
    const TopicSummary summary = topic_top_words(p, vocab, 3);
    REQUIRE(summary.top_words.size() == 1);
    CHECK(summary.top_words[0][0].first == 0);
    CHECK(summary.top_words[0][1].first == 2);
    CHECK(summary.top_words[0][2].first == 1);
    CHECK(summary.top_words[0][0].second == doctest::Approx(1.0));
}

TEST_CASE("topic_top_words with k = vocabulary size is a permutation") {
    const ModelParams p = init_params(12, 3, 4, 6);
    Vocabulary vocab;
    for (int i = 0; i < 12; ++i) {
        vocab.term_to_index.emplace("term" + std::to_string(i),
                                    static_cast<std::uint32_t>(i));
        vocab.terms.push_back("term" + std::to_string(i));
    }
    vocab.doc_freq.assign(12, 1);
    const TopicSummary summary = topic_top_words(p, vocab, 12);
    for (const auto& ranking : summary.top_words) {
        std::vector<bool> seen(12, false);
        for (const auto& [w, score] : ranking) {
            CHECK_FALSE(seen[w]);
            seen[w] = true;
        }
        // exact argsort: scores non-increasing
        for (std::size_t i = 1; i < ranking.size(); ++i)
            CHECK(ranking[i - 1].second >= ranking[i].second);
    }
    CHECK(summary.largest_norms.front().second >= summary.largest_norms.back().second);
    CHECK(summary.smallest_norms.front().second <= summary.smallest_norms.back().second);
    CHECK_THROWS_AS(topic_top_words(p, vocab, 13), std::invalid_argument);
}

TEST_CASE("matched topic ranks its own word first") {
    Vocabulary vocab = toy_vocab({"target", "othera", "otherb"});
    ModelParams p;
    p.n_words = 3, p.n_topics = 1, p.dim = 3;
    p.W = Matrix(3, 3);
    p.W.at(0, 0) = 1.0;
    p.W.at(1, 1) = 1.0;
    p.W.at(2, 2) = 1.0;
    p.T = Matrix(1, 3);
    p.T.at(0, 0) = 1.0;  // equals "target"
    const TopicSummary summary = topic_top_words(p, vocab, 1);
    CHECK(summary.top_words[0][0].first == 0);
}

TEST_CASE("annotate_document with one topic assigns everything to it") {
    Vocabulary vocab = toy_vocab({"genetic", "fitness"});
    ModelParams p;
    p.n_words = 2, p.n_topics = 1, p.dim = 2;
    p.W = Matrix(2, 2, 0.4);
    p.T = Matrix(1, 2, 0.5);
    const DocAnnotation ann = annotate_document(p, vocab, "Genetic fitness, genetic!");
    CHECK(ann.tokens.size() == 3);
    REQUIRE(ann.terms.size() == 2);
    for (const auto& term : ann.terms) {
        CHECK(term.topic == 0);
        CHECK(term.weight == doctest::Approx(1.0));
        CHECK(term.passes);
    }
    REQUIRE(ann.topic_shares.size() == 1);
    CHECK(ann.topic_shares[0] == doctest::Approx(1.0));
}

TEST_CASE("tied topics split the column and fail the strict half test") {
    Vocabulary vocab = toy_vocab({"word"});
    ModelParams p;
    p.n_words = 1, p.n_topics = 2, p.dim = 2;
    p.W = Matrix(1, 2, 0.3);
    p.T = Matrix(2, 2, 0.25);  // identical rows -> weights exactly 0.5
    const DocAnnotation ann = annotate_document(p, vocab, "word word");
    REQUIRE(ann.terms.size() == 1);
    CHECK(ann.terms[0].weight == doctest::Approx(0.5));
    CHECK_FALSE(ann.terms[0].passes);
}

TEST_CASE("annotate_document rejects fully out-of-vocabulary text") {
    Vocabulary vocab = toy_vocab({"known"});
    const ModelParams p = init_params(1, 2, 3, 4);
    CHECK_THROWS_WITH_AS(annotate_document(p, vocab, "completely different words"),
                         doctest::Contains("different"), std::invalid_argument);
}

TEST_CASE("annotation agrees with the attention map and shares form a distribution") {
    const RawCorpus corpus = testutil::make_two_clique_corpus();
    const Vocabulary vocab = build_vocab(corpus);
    const ModelParams p = init_params(vocab.size(), 3, 8, 15);
    const std::string text = corpus.docs[2].text;
    const DocAnnotation ann = annotate_document(p, vocab, text);

    // single source of truth: recompute the attention map directly
    const DocTermMatrix X = vectorize(corpus, vocab);
    const AttentionMap map = attention(p, X.row(2));
    REQUIRE(map.term_indices.size() == ann.terms.size());
    for (std::size_t c = 0; c < map.term_indices.size(); ++c) {
        CHECK(ann.terms[c].vocab_index == map.term_indices[c]);
        double best = -1.0;
        for (std::size_t k = 0; k < p.n_topics; ++k) best = std::max(best, map.Z.at(k, c));
        CHECK(ann.terms[c].weight == best);
    }

    double share_sum = 0.0;
    for (double s : ann.topic_shares) {
        CHECK(s >= 0.0);
        share_sum += s;
    }
    CHECK(share_sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ann.highlighted.size() == 2);
}

TEST_CASE("renderers emit both underline styles and topic shares") {
    const RawCorpus corpus = testutil::make_two_clique_corpus();
    const Vocabulary vocab = build_vocab(corpus);
    const ModelParams p = init_params(vocab.size(), 3, 8, 15);
    const DocAnnotation ann = annotate_document(p, vocab, corpus.docs[2].text);

    const std::string text = render_annotation_text(ann, vocab);
    CHECK(text.find("\x1b[4;32m") != std::string::npos);
    CHECK(text.find("share") != std::string::npos);

    const std::string html = render_annotation_html(ann, vocab);
    CHECK(html.find("<!DOCTYPE html>") == 0);
    CHECK(html.find("2px solid") != std::string::npos);
    CHECK(html.find("3px double") != std::string::npos);
    CHECK(html.find('%') != std::string::npos);
    CHECK(html.find("href") == std::string::npos);  // inline styles only, no assets

    // share percentages rendered from an independent recomputation
    const DocTermMatrix X = vectorize(corpus, vocab);
    const AttentionMap map = attention(p, X.row(2));
    std::vector<double> mass(p.n_topics, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < map.term_indices.size(); ++c) {
        if (map.fallback[c]) continue;
        for (std::size_t k = 0; k < p.n_topics; ++k) {
            mass[k] += map.Z.at(k, c);
            total += map.Z.at(k, c);
        }
    }
    for (std::size_t k = 0; k < p.n_topics; ++k)
        CHECK(ann.topic_shares[k] == doctest::Approx(mass[k] / total).epsilon(1e-12));
}

}  // TEST_SUITE
