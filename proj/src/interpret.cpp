#include "idne/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace idne {

namespace {

// argsort with the tie rule used everywhere here: score desc, index asc
std::vector<std::uint32_t> rank_desc(const std::vector<double>& scores) {
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

std::string escape_html(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string percent(double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * x << "%";
    return os.str();
}

}  // namespace

TopicSummary topic_top_words(const ModelParams& params, const Vocabulary& vocab,
                             std::size_t k) {
    if (params.n_words != vocab.size())
        throw std::invalid_argument("model/vocabulary size mismatch");
    if (k > params.n_words) throw std::invalid_argument("k exceeds vocabulary size");

    TopicSummary summary;
    summary.top_words.resize(params.n_topics);
    std::vector<double> scores(params.n_words);
    for (std::size_t t = 0; t < params.n_topics; ++t) {
        const double* topic = params.T.row(t);
        for (std::size_t w = 0; w < params.n_words; ++w)
            scores[w] = dot(topic, params.W.row(w), params.dim);
        const auto order = rank_desc(scores);
        for (std::size_t i = 0; i < k; ++i)
            summary.top_words[t].emplace_back(order[i], scores[order[i]]);
    }

    std::vector<double> norms(params.n_words);
    for (std::size_t w = 0; w < params.n_words; ++w)
        norms[w] = std::sqrt(dot(params.W.row(w), params.W.row(w), params.dim));
    const auto order = rank_desc(norms);
    for (std::size_t i = 0; i < k && i < order.size(); ++i)
        summary.largest_norms.emplace_back(order[i], norms[order[i]]);
    for (std::size_t i = 0; i < k && i < order.size(); ++i) {
        const auto idx = order[order.size() - 1 - i];
        summary.smallest_norms.emplace_back(idx, norms[idx]);
    }
    return summary;
}

std::string render_topics_table(const TopicSummary& summary, const Vocabulary& vocab) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (std::size_t t = 0; t < summary.top_words.size(); ++t) {
        os << "topic " << t << " |";
        for (const auto& [w, score] : summary.top_words[t])
            os << ' ' << vocab.terms[w] << " (" << score << ")";
        os << '\n';
    }
    os << "largest norms  |";
    for (const auto& [w, norm] : summary.largest_norms)
        os << ' ' << vocab.terms[w] << " (" << norm << ")";
    os << '\n';
    os << "smallest norms |";
    for (const auto& [w, norm] : summary.smallest_norms)
        os << ' ' << vocab.terms[w] << " (" << norm << ")";
    os << '\n';
    return os.str();
}

DocAnnotation annotate_document(const ModelParams& params, const Vocabulary& vocab,
                                const std::string& text) {
    DocAnnotation ann;
    ann.tokens = tokenize(text);

    std::vector<TermCount> row;
    std::vector<std::string> oov;
    {
        std::unordered_map<std::uint32_t, std::uint32_t> counts;
        for (const auto& tok : ann.tokens) {
            auto it = vocab.term_to_index.find(tok);
            if (it == vocab.term_to_index.end()) {
                oov.push_back(tok);
            } else {
                counts[it->second] += 1;
            }
        }
        for (const auto& [term, count] : counts) row.push_back({term, count});
        std::sort(row.begin(), row.end(),
                  [](const TermCount& a, const TermCount& b) { return a.term < b.term; });
    }
    if (row.empty()) {
        std::string msg = "no in-vocabulary tokens; unknown tokens:";
        std::sort(oov.begin(), oov.end());
        oov.erase(std::unique(oov.begin(), oov.end()), oov.end());
        for (const auto& t : oov) msg += ' ' + t;
        throw std::invalid_argument(msg);
    }

    const AttentionMap map = attention(params, row);

    std::unordered_map<std::uint32_t, std::size_t> term_slot;
    ann.terms.reserve(map.term_indices.size());
    for (std::size_t c = 0; c < map.term_indices.size(); ++c) {
        DocAnnotation::TermInfo info;
        info.vocab_index = map.term_indices[c];
        info.fallback = map.fallback[c] != 0;
        std::uint32_t best = 0;
        double best_w = map.Z.at(0, c);
        for (std::size_t k = 1; k < params.n_topics; ++k) {
            if (map.Z.at(k, c) > best_w) {
                best_w = map.Z.at(k, c);
                best = static_cast<std::uint32_t>(k);
            }
        }
        info.topic = best;
        info.weight = best_w;
        info.passes = best_w > 0.5;  // strict: a tie at exactly 1/2 fails
        term_slot.emplace(info.vocab_index, ann.terms.size());
        ann.terms.push_back(info);
    }

    ann.token_terms.reserve(ann.tokens.size());
    for (const auto& tok : ann.tokens) {
        auto it = vocab.term_to_index.find(tok);
        if (it == vocab.term_to_index.end()) {
            ann.token_terms.push_back(-1);
        } else {
            ann.token_terms.push_back(static_cast<std::int64_t>(term_slot.at(it->second)));
        }
    }

    // share of raw attention mass per topic over non-fallback columns;
    // counts stay out of it since Z is count-invariant
    ann.topic_shares.assign(params.n_topics, 0.0);
    double total_mass = 0.0;
    for (std::size_t c = 0; c < map.term_indices.size(); ++c) {
        if (map.fallback[c]) continue;
        for (std::size_t k = 0; k < params.n_topics; ++k) {
            ann.topic_shares[k] += map.Z.at(k, c);
            total_mass += map.Z.at(k, c);
        }
    }
    if (total_mass > 0.0)
        for (auto& s : ann.topic_shares) s /= total_mass;

    const auto order = rank_desc(ann.topic_shares);
    for (std::size_t i = 0; i < order.size() && i < 2; ++i) ann.highlighted.push_back(order[i]);
    return ann;
}

std::string render_annotation_text(const DocAnnotation& ann, const Vocabulary& vocab) {
    (void)vocab;
    static const char* kColors[2] = {"\x1b[4;32m", "\x1b[4;34m"};  // green, blue underline
    std::ostringstream os;
    for (std::size_t i = 0; i < ann.highlighted.size(); ++i) {
        os << kColors[i] << "topic " << ann.highlighted[i] << "\x1b[0m"
           << " share " << percent(ann.topic_shares[ann.highlighted[i]]) << '\n';
    }
    for (std::size_t i = 0; i < ann.tokens.size(); ++i) {
        if (i) os << ' ';
        const auto slot = ann.token_terms[i];
        bool styled = false;
        if (slot >= 0) {
            const auto& info = ann.terms[static_cast<std::size_t>(slot)];
            for (std::size_t h = 0; h < ann.highlighted.size(); ++h) {
                if (info.passes && info.topic == ann.highlighted[h]) {
                    os << kColors[h] << ann.tokens[i] << "\x1b[0m";
                    styled = true;
                    break;
                }
            }
        }
        if (!styled) os << ann.tokens[i];
    }
    os << '\n';
    return os.str();
}

std::string render_annotation_html(const DocAnnotation& ann, const Vocabulary& vocab) {
    (void)vocab;
    static const char* kStyles[2] = {
        "color:#1a7f37;border-bottom:2px solid #1a7f37;",
        "color:#1f5fbf;border-bottom:3px double #1f5fbf;",
    };
    std::ostringstream os;
    os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"></head>\n"
       << "<body style=\"font-family:serif;max-width:60em;margin:2em auto;\">\n<p>";
    for (std::size_t i = 0; i < ann.highlighted.size(); ++i) {
        os << "<span style=\"" << kStyles[i] << "\">topic " << ann.highlighted[i] << "</span> "
           << percent(ann.topic_shares[ann.highlighted[i]]);
        if (i + 1 < ann.highlighted.size()) os << " &middot; ";
    }
    os << "</p>\n<p>";
    for (std::size_t i = 0; i < ann.tokens.size(); ++i) {
        if (i) os << ' ';
        const auto slot = ann.token_terms[i];
        bool styled = false;
        if (slot >= 0) {
            const auto& info = ann.terms[static_cast<std::size_t>(slot)];
            for (std::size_t h = 0; h < ann.highlighted.size(); ++h) {
                if (info.passes && info.topic == ann.highlighted[h]) {
                    os << "<span style=\"" << kStyles[h] << "\">" << escape_html(ann.tokens[i])
                       << "</span>";
                    styled = true;
                    break;
                }
            }
        }
        if (!styled) os << escape_html(ann.tokens[i]);
    }
    os << "</p>\n</body></html>\n";
    return os.str();
}

}  // namespace idne
