#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/model.hpp"

namespace idne {

struct TopicSummary {
    // Per topic: (vocab index, dot product) ranked by score desc, ties by index.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> top_words;
    std::vector<std::pair<std::uint32_t, double>> largest_norms;
    std::vector<std::pair<std::uint32_t, double>> smallest_norms;
};

TopicSummary topic_top_words(const ModelParams& params, const Vocabulary& vocab,
                             std::size_t k);

std::string render_topics_table(const TopicSummary& summary, const Vocabulary& vocab);

struct DocAnnotation {
    struct TermInfo {
        std::uint32_t vocab_index;
        std::uint32_t topic;    // argmax of the term's Z column
        double weight;          // the max value
        bool passes;            // weight strictly greater than 1/2
        bool fallback;          // all-zero column
    };

    std::vector<std::string> tokens;           // full token stream of the input
    std::vector<std::int64_t> token_terms;     // index into `terms`, -1 for out-of-vocab
    std::vector<TermInfo> terms;               // one per distinct in-vocab term
    std::vector<double> topic_shares;          // attention mass per topic, sums to 1
    std::vector<std::uint32_t> highlighted;    // the two most represented topics
};

// tokenize -> vectorize against the model vocabulary -> attention; throws if
// no token is in vocabulary (the message lists the unknown tokens).
DocAnnotation annotate_document(const ModelParams& params, const Vocabulary& vocab,
                                const std::string& text);

// ANSI rendering: the two most-shared topics get distinct underline colors.
std::string render_annotation_text(const DocAnnotation& ann, const Vocabulary& vocab);
// Single-file HTML with inline styles only.
std::string render_annotation_html(const DocAnnotation& ann, const Vocabulary& vocab);

}  // namespace idne
