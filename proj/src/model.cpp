#include "idne/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "idne/rng.hpp"

namespace idne {

ModelParams init_params(std::size_t n_words, std::size_t n_topics, std::size_t dim,
                        std::uint64_t seed) {
    if (n_words == 0 || n_topics == 0 || dim == 0)
        throw std::invalid_argument("model dimensions must be positive");
    ModelParams params;
    params.n_words = n_words;
    params.n_topics = n_topics;
    params.dim = dim;
    params.W = Matrix(n_words, dim);
    params.T = Matrix(n_topics, dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    Rng rng(seed);
    for (double& v : params.W.data) v = rng.uniform(-bound, bound);
    for (double& v : params.T.data) v = rng.uniform(-bound, bound);
    return params;
}

std::size_t AttentionMap::n_fallback() const {
    std::size_t n = 0;
    for (auto f : fallback) n += f;
    return n;
}

AttentionMap attention(const ModelParams& params, TermCounts doc_row) {
    if (doc_row.empty())
        throw std::invalid_argument("attention over an empty document");

    const std::size_t n_topics = params.n_topics;
    const std::size_t dim = params.dim;
    AttentionMap map;
    map.term_indices.reserve(doc_row.size());
    map.counts.reserve(doc_row.size());
    map.Z = Matrix(n_topics, doc_row.size());
    map.fallback.assign(doc_row.size(), 0);
    map.column_sums.assign(doc_row.size(), 0.0);

    for (std::size_t c = 0; c < doc_row.size(); ++c) {
        const auto& tc = doc_row[c];
        map.term_indices.push_back(tc.term);
        map.counts.push_back(tc.count);
        const double* w = params.W.row(tc.term);
        double col_sum = 0.0;
        for (std::size_t k = 0; k < n_topics; ++k) {
            double r = dot(params.T.row(k), w, dim);
            r = r > 0.0 ? r : 0.0;
            map.Z.at(k, c) = r;
            col_sum += r;
        }
        map.column_sums[c] = col_sum;
        if (col_sum > kAttentionEps) {
            for (std::size_t k = 0; k < n_topics; ++k) map.Z.at(k, c) /= col_sum;
        } else {
            for (std::size_t k = 0; k < n_topics; ++k) map.Z.at(k, c) = 0.0;
            map.fallback[c] = 1;
        }
    }
    return map;
}

DocEmbedding embed_doc(const ModelParams& params, TermCounts doc_row) {
    return embed_doc(params, attention(params, doc_row));
}

DocEmbedding embed_doc(const ModelParams& params, const AttentionMap& map) {
    const std::size_t n_topics = params.n_topics;
    const std::size_t dim = params.dim;

    double total = 0.0;
    for (auto c : map.counts) total += c;
    if (total == 0.0) throw std::invalid_argument("document has zero total count");

    DocEmbedding emb;
    emb.topic_parts = Matrix(n_topics, dim);
    emb.d.assign(dim, 0.0);
    for (std::size_t k = 0; k < n_topics; ++k) {
        double* part = emb.topic_parts.row(k);
        for (std::size_t c = 0; c < map.term_indices.size(); ++c) {
            const double z = map.Z.at(k, c);
            if (z == 0.0) continue;
            axpy(z * map.counts[c] / total, params.W.row(map.term_indices[c]), part, dim);
        }
        for (std::size_t j = 0; j < dim; ++j) emb.d[j] += part[j];
    }
    return emb;
}

Matrix embed_corpus(const ModelParams& params, const DocTermMatrix& X) {
    Matrix out(X.n_docs, params.dim);
    for (std::size_t i = 0; i < X.n_docs; ++i) {
        if (X.row_empty(i)) continue;  // flagged rows stay zero
        DocEmbedding emb = embed_doc(params, X.row(i));
        std::copy(emb.d.begin(), emb.d.end(), out.row(i));
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'I', 'D', 'N', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_matrix_f32(std::ofstream& out, const Matrix& m) {
    std::vector<float> buf(m.data.size());
    for (std::size_t i = 0; i < m.data.size(); ++i) buf[i] = static_cast<float>(m.data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Matrix read_matrix_f32(std::ifstream& in, std::size_t rows, std::size_t cols) {
    std::vector<float> buf(rows * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < buf.size(); ++i) m.data[i] = static_cast<double>(buf[i]);
    return m;
}

}  // namespace

std::uint64_t vocab_hash(const Vocabulary& vocab) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over terms joined by \n
    for (const auto& term : vocab.terms) {
        for (char c : term) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 0x100000001b3ULL;
    }
    return h;
}

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     const std::string& model_path, const std::string& vocab_path) {
    if (params.n_words != vocab.size())
        throw std::invalid_argument("word matrix rows do not match vocabulary size");
    {
        std::ofstream out(vocab_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + vocab_path);
        for (const auto& term : vocab.terms) out << term << '\n';
    }
    std::ofstream out(model_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + model_path);
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(params.n_words));
    write_u32(out, static_cast<std::uint32_t>(params.n_topics));
    write_u32(out, static_cast<std::uint32_t>(params.dim));
    write_u64(out, vocab_hash(vocab));
    write_matrix_f32(out, params.W);
    write_matrix_f32(out, params.T);
    if (!out) throw std::runtime_error("short write to " + model_path);
}

std::pair<ModelParams, Vocabulary> load_checkpoint(const std::string& model_path,
                                                   const std::string& vocab_path) {
    Vocabulary vocab;
    {
        std::ifstream in(vocab_path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + vocab_path);
        std::string term;
        while (std::getline(in, term)) {
            if (!term.empty() && term.back() == '\r') term.pop_back();
            vocab.term_to_index.emplace(term, static_cast<std::uint32_t>(vocab.terms.size()));
            vocab.terms.push_back(term);
        }
        vocab.doc_freq.assign(vocab.terms.size(), 0);  // not serialized
    }

    std::ifstream in(model_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + model_path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error(model_path + ": not a model checkpoint");
    const std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error(model_path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    ModelParams params;
    params.n_words = read_u32(in);
    params.n_topics = read_u32(in);
    params.dim = read_u32(in);
    const std::uint64_t stored_hash = read_u64(in);
    if (params.n_words != vocab.size())
        throw std::runtime_error("checkpoint/vocabulary size mismatch");
    if (stored_hash != vocab_hash(vocab))
        throw std::runtime_error("vocabulary file does not match checkpoint hash");
    params.W = read_matrix_f32(in, params.n_words, params.dim);
    params.T = read_matrix_f32(in, params.n_topics, params.dim);
    if (!in) throw std::runtime_error(model_path + ": truncated checkpoint");
    return {std::move(params), std::move(vocab)};
}

}  // namespace idne
