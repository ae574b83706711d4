#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace idne {

struct RawDoc {
    std::string id;
    std::string text;
    std::vector<std::string> labels;
    // Loaders that already know the term stream (attribute-form Cora rows)
    // fill this; downstream code then skips tokenize().
    std::vector<std::string> pre_tokens;
    bool has_pre_tokens = false;
};

struct RawCorpus {
    std::vector<RawDoc> docs;
    // Undirected link list over doc indices, deduplicated; self-loops are
    // kept here and dropped by the graph module.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::unordered_map<std::string, std::uint32_t> id_to_index;
    std::size_t dangling_dropped = 0;

    std::size_t n_docs() const { return docs.size(); }
};

const std::unordered_set<std::string>& english_stopwords();

std::vector<std::string> tokenize(const std::string& text);
std::vector<std::string> tokenize(const std::string& text,
                                  const std::unordered_set<std::string>& stopwords);

// Token stream of a document: pre-tokenized form if the loader provided one,
// otherwise tokenize(text).
std::vector<std::string> doc_tokens(const RawDoc& doc);
std::vector<std::string> doc_tokens(const RawDoc& doc,
                                    const std::unordered_set<std::string>& stopwords);

// Cora citation network. Content rows are either
//   <id>\t<text>\t<label>                      (one free-text field)
// or
//   <id>\t<v0>\t<v1>\t...\t<vN>\t<label>       (precomputed term counts)
// Cites rows are <citing_id>\t<cited_id>. Dangling citations are dropped and
// counted; duplicate links are collapsed.
RawCorpus load_cora(const std::string& content_path, const std::string& cites_path);

// Generic format: docs are <id>\t<label1,label2,...>\t<text>, edges are
// <src>\t<dst>. The label list may be empty.
RawCorpus load_generic(const std::string& docs_path, const std::string& edges_path);

struct Vocabulary {
    std::vector<std::string> terms;  // descending corpus frequency, ties lexicographic
    std::unordered_map<std::string, std::uint32_t> term_to_index;
    std::vector<std::uint32_t> doc_freq;

    std::size_t size() const { return terms.size(); }
};

struct VocabOptions {
    std::size_t min_doc_freq = 5;
    double max_doc_ratio = 0.25;
    const std::unordered_set<std::string>* stopwords = nullptr;  // null = built-in
};

Vocabulary build_vocab(const RawCorpus& corpus, const VocabOptions& opts = {});

struct TermCount {
    std::uint32_t term;
    std::uint32_t count;
};

using TermCounts = std::span<const TermCount>;

struct DocTermMatrix {
    std::size_t n_docs = 0;
    std::size_t n_terms = 0;
    std::vector<std::vector<TermCount>> rows;  // sorted by term index
    std::vector<std::uint32_t> empty_rows;     // docs that lost every token to pruning

    TermCounts row(std::size_t i) const { return rows[i]; }
    bool row_empty(std::size_t i) const { return rows[i].empty(); }
    // |X_i|_1, the document's total token count
    double row_total(std::size_t i) const {
        double t = 0.0;
        for (const auto& tc : rows[i]) t += tc.count;
        return t;
    }
};

DocTermMatrix vectorize(const RawCorpus& corpus, const Vocabulary& vocab,
                        const VocabOptions& opts = {});

// Label assignments resolved against a stable name table.
struct LabelSet {
    std::vector<std::string> names;  // sorted
    std::vector<std::vector<std::uint32_t>> per_doc;

    std::size_t n_classes() const { return names.size(); }
    bool single_label() const;
};

LabelSet collect_labels(const RawCorpus& corpus);

}  // namespace idne
