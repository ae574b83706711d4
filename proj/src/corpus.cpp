#include "idne/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace idne {

namespace {

bool is_letter(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char to_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_uint(const std::string& s, std::uint64_t& out) {
    if (s.empty()) return false;
    std::uint64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    out = v;
    return true;
}

[[noreturn]] void parse_error(const std::string& path, std::size_t line_no,
                              const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

void add_doc(RawCorpus& corpus, RawDoc doc, const std::string& path, std::size_t line_no) {
    auto [it, inserted] =
        corpus.id_to_index.emplace(doc.id, static_cast<std::uint32_t>(corpus.docs.size()));
    if (!inserted)
        parse_error(path, line_no, "duplicate document id \"" + doc.id + "\"");
    (void)it;
    corpus.docs.push_back(std::move(doc));
}

// Edges deduplicated as unordered pairs; endpoints not in the corpus are
// dropped and counted.
void load_edges(RawCorpus& corpus, const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            parse_error(path, line_no, "expected <id>\\t<id>");
        auto a = corpus.id_to_index.find(fields[0]);
        auto b = corpus.id_to_index.find(fields[1]);
        if (a == corpus.id_to_index.end() || b == corpus.id_to_index.end()) {
            ++corpus.dangling_dropped;
            continue;
        }
        std::uint32_t u = a->second, v = b->second;
        if (u > v) std::swap(u, v);
        seen.emplace_back(u, v);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    corpus.edges = std::move(seen);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    return tokenize(text, english_stopwords());
}

std::vector<std::string> tokenize(const std::string& text,
                                  const std::unordered_set<std::string>& stopwords) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (is_letter(c)) {
            cur.push_back(to_lower(c));
        } else if (!cur.empty()) {
            if (!stopwords.count(cur)) tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty() && !stopwords.count(cur)) tokens.push_back(cur);
    return tokens;
}

std::vector<std::string> doc_tokens(const RawDoc& doc) {
    return doc_tokens(doc, english_stopwords());
}

std::vector<std::string> doc_tokens(const RawDoc& doc,
                                    const std::unordered_set<std::string>& stopwords) {
    if (doc.has_pre_tokens) return doc.pre_tokens;
    return tokenize(doc.text, stopwords);
}

RawCorpus load_cora(const std::string& content_path, const std::string& cites_path) {
    std::ifstream in = open_or_throw(content_path);
    RawCorpus corpus;
    std::string line;
    std::size_t line_no = 0;
    std::size_t attr_width = 0;  // fixed across rows in attribute form
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() < 3)
            parse_error(content_path, line_no, "expected <id>\\t<attrs|text>\\t<label>");
        RawDoc doc;
        doc.id = fields.front();
        doc.labels.push_back(fields.back());
        if (fields.size() == 3) {
            doc.text = fields[1];
        } else {
            // attribute form: every middle field is a non-negative count for
            // the term at that position
            std::size_t width = fields.size() - 2;
            if (attr_width == 0) attr_width = width;
            if (width != attr_width)
                parse_error(content_path, line_no,
                            "attribute row width " + std::to_string(width) +
                                " differs from " + std::to_string(attr_width));
            doc.has_pre_tokens = true;
            for (std::size_t k = 0; k < width; ++k) {
                std::uint64_t count = 0;
                if (!parse_uint(fields[k + 1], count))
                    parse_error(content_path, line_no,
                                "attribute field " + std::to_string(k) +
                                    " is not a non-negative integer");
                // attribute index k becomes vocabulary term "w<k>"
                for (std::uint64_t r = 0; r < count; ++r)
                    doc.pre_tokens.push_back("w" + std::to_string(k));
            }
        }
        if (doc.id.empty()) parse_error(content_path, line_no, "empty document id");
        add_doc(corpus, std::move(doc), content_path, line_no);
    }
    if (corpus.docs.empty())
        throw std::runtime_error(content_path + ": no documents");
    load_edges(corpus, cites_path);
    return corpus;
}

RawCorpus load_generic(const std::string& docs_path, const std::string& edges_path) {
    std::ifstream in = open_or_throw(docs_path);
    RawCorpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3)
            parse_error(docs_path, line_no, "expected <id>\\t<labels>\\t<text>");
        RawDoc doc;
        doc.id = fields[0];
        if (doc.id.empty()) parse_error(docs_path, line_no, "empty document id");
        std::stringstream labels(fields[1]);
        std::string label;
        while (std::getline(labels, label, ',')) {
            if (!label.empty()) doc.labels.push_back(label);
        }
        doc.text = fields[2];
        add_doc(corpus, std::move(doc), docs_path, line_no);
    }
    if (corpus.docs.empty())
        throw std::runtime_error(docs_path + ": no documents");
    load_edges(corpus, edges_path);
    return corpus;
}

Vocabulary build_vocab(const RawCorpus& corpus, const VocabOptions& opts) {
    if (corpus.docs.empty()) throw std::runtime_error("empty corpus");
    const auto& stopwords = opts.stopwords ? *opts.stopwords : english_stopwords();

    std::unordered_map<std::string, std::uint64_t> total_count;
    std::unordered_map<std::string, std::uint32_t> doc_count;
    for (const auto& doc : corpus.docs) {
        auto tokens = doc_tokens(doc, stopwords);
        std::sort(tokens.begin(), tokens.end());
        for (std::size_t i = 0; i < tokens.size();) {
            std::size_t j = i;
            while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
            total_count[tokens[i]] += j - i;
            doc_count[tokens[i]] += 1;
            i = j;
        }
    }

    const std::size_t n_docs = corpus.docs.size();
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (const auto& [term, df] : doc_count) {
        if (df < opts.min_doc_freq) continue;
        if (static_cast<double>(df) > opts.max_doc_ratio * static_cast<double>(n_docs))
            continue;
        kept.emplace_back(term, total_count[term]);
    }
    if (kept.empty())
        throw std::runtime_error(
            "vocabulary pruning removed every term; relax --min-df/--max-df-ratio");

    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.terms.reserve(kept.size());
    vocab.doc_freq.reserve(kept.size());
    for (const auto& [term, cnt] : kept) {
        (void)cnt;
        vocab.term_to_index.emplace(term, static_cast<std::uint32_t>(vocab.terms.size()));
        vocab.terms.push_back(term);
        vocab.doc_freq.push_back(doc_count[term]);
    }
    return vocab;
}

DocTermMatrix vectorize(const RawCorpus& corpus, const Vocabulary& vocab,
                        const VocabOptions& opts) {
    const auto& stopwords = opts.stopwords ? *opts.stopwords : english_stopwords();
    DocTermMatrix X;
    X.n_docs = corpus.docs.size();
    X.n_terms = vocab.size();
    X.rows.resize(X.n_docs);
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        std::unordered_map<std::uint32_t, std::uint32_t> counts;
        for (const auto& tok : doc_tokens(corpus.docs[i], stopwords)) {
            auto it = vocab.term_to_index.find(tok);
            if (it != vocab.term_to_index.end()) counts[it->second] += 1;
        }
        auto& row = X.rows[i];
        row.reserve(counts.size());
        for (const auto& [term, count] : counts) row.push_back({term, count});
        std::sort(row.begin(), row.end(),
                  [](const TermCount& a, const TermCount& b) { return a.term < b.term; });
        if (row.empty()) X.empty_rows.push_back(static_cast<std::uint32_t>(i));
    }
    return X;
}

bool LabelSet::single_label() const {
    for (const auto& ls : per_doc)
        if (ls.size() != 1) return false;
    return true;
}

LabelSet collect_labels(const RawCorpus& corpus) {
    LabelSet labels;
    std::vector<std::string> names;
    for (const auto& doc : corpus.docs)
        for (const auto& l : doc.labels) names.push_back(l);
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    labels.names = names;

    std::unordered_map<std::string, std::uint32_t> index;
    for (std::size_t i = 0; i < names.size(); ++i)
        index.emplace(names[i], static_cast<std::uint32_t>(i));

    labels.per_doc.resize(corpus.docs.size());
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        for (const auto& l : corpus.docs[i].labels)
            labels.per_doc[i].push_back(index.at(l));
        std::sort(labels.per_doc[i].begin(), labels.per_doc[i].end());
        labels.per_doc[i].erase(
            std::unique(labels.per_doc[i].begin(), labels.per_doc[i].end()),
            labels.per_doc[i].end());
    }
    return labels;
}

}  // namespace idne
