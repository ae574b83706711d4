#include "idne/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "idne/rng.hpp"

namespace idne {

void TrainConfig::validate() const {
    if (n_topics == 0 || dim == 0) throw std::invalid_argument("n_topics and dim must be positive");
    if (steps == 0) throw std::invalid_argument("steps must be >= 1");
    if (batch_size == 0 || batch_size % 2 != 0)
        throw std::invalid_argument("batch_size must be even and positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("adam betas must lie in (0,1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double pair_loss_from_score(double score, int label) {
    const double y = label ? 1.0 : 0.0;
    return std::max(score, 0.0) - score * y + std::log1p(std::exp(-std::fabs(score)));
}

double pair_loss(const std::vector<double>& d_i, const std::vector<double>& d_j, int label) {
    if (d_i.size() != d_j.size()) throw std::invalid_argument("embedding size mismatch");
    return pair_loss_from_score(dot(d_i.data(), d_j.data(), d_i.size()), label);
}

namespace {

struct DocState {
    AttentionMap map;
    std::vector<double> d;
    std::vector<double> upstream;  // dL/dd accumulated over the batch's pairs
};

// dL/dd -> grad_W, grad_T for one document. The value path goes through the
// weighted sum of word vectors; the key path goes through the quotient rule
// of the column normalization and the ReLU gate. Fallback columns carry no
// gradient.
void backward_doc(const ModelParams& params, const DocState& doc, Matrix& grad_W,
                  Matrix& grad_T) {
    const std::size_t n_topics = params.n_topics;
    const std::size_t dim = params.dim;
    const AttentionMap& map = doc.map;
    const double* u = doc.upstream.data();

    double total = 0.0;
    for (auto c : map.counts) total += c;

    for (std::size_t c = 0; c < map.term_indices.size(); ++c) {
        if (map.fallback[c]) continue;
        const std::uint32_t v = map.term_indices[c];
        const double* w = params.W.row(v);
        const double beta = map.counts[c] / total;

        double zsum = 0.0;
        for (std::size_t k = 0; k < n_topics; ++k) zsum += map.Z.at(k, c);

        // value path: d depends on W[v] with coefficient beta * zsum
        axpy(beta * zsum, u, grad_W.row(v), dim);

        // key path: dL/dz is the same scalar for every topic, so the
        // normalization backprop collapses to one scalar per column
        const double q = beta * dot(u, w, dim);
        const double t0 = q * (1.0 - zsum) / map.column_sums[c];
        if (t0 == 0.0) continue;
        for (std::size_t k = 0; k < n_topics; ++k) {
            if (map.Z.at(k, c) <= 0.0) continue;  // ReLU subgradient 0 at 0
            axpy(t0, w, grad_T.row(k), dim);
            axpy(t0, params.T.row(k), grad_W.row(v), dim);
        }
    }
}

double accumulate_batch(const ModelParams& params, const DocTermMatrix& X,
                        const PairBatch& batch, Matrix& grad_W, Matrix& grad_T) {
    if (batch.pairs.empty()) throw std::invalid_argument("empty batch");
    const std::size_t dim = params.dim;

    // forward each distinct document once
    std::vector<std::uint32_t> doc_ids;
    doc_ids.reserve(batch.pairs.size() * 2);
    for (const auto& pr : batch.pairs) {
        doc_ids.push_back(pr.i);
        doc_ids.push_back(pr.j);
    }
    std::sort(doc_ids.begin(), doc_ids.end());
    doc_ids.erase(std::unique(doc_ids.begin(), doc_ids.end()), doc_ids.end());

    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<DocState> docs(doc_ids.size());
    for (std::size_t s = 0; s < doc_ids.size(); ++s) {
        const std::uint32_t id = doc_ids[s];
        if (X.row_empty(id))
            throw std::invalid_argument("batch references all-zero document row " +
                                        std::to_string(id));
        docs[s].map = attention(params, X.row(id));
        docs[s].d = embed_doc(params, docs[s].map).d;
        docs[s].upstream.assign(dim, 0.0);
        slot.emplace(id, s);
    }

    const double inv_pairs = 1.0 / static_cast<double>(batch.pairs.size());
    double loss = 0.0;
    for (const auto& pr : batch.pairs) {
        DocState& a = docs[slot.at(pr.i)];
        DocState& b = docs[slot.at(pr.j)];
        const double score = dot(a.d.data(), b.d.data(), dim);
        loss += pair_loss_from_score(score, pr.label);
        const double g = (sigmoid(score) - (pr.label ? 1.0 : 0.0)) * inv_pairs;
        axpy(g, b.d.data(), a.upstream.data(), dim);
        axpy(g, a.d.data(), b.upstream.data(), dim);
    }

    // fixed reduction order: ascending document id
    for (const auto& doc : docs) backward_doc(params, doc, grad_W, grad_T);

    return loss * inv_pairs;
}

// ADAM over one parameter/gradient pair; consumes (zeroes) the gradient so
// the caller can reuse the buffer. Returns a finiteness probe of the grads.
double adam_update(Matrix& theta, Matrix& grad, Matrix& m, Matrix& v,
                   const TrainConfig& cfg, double bc1, double bc2) {
    double probe = 0.0;
    const double lr = cfg.learning_rate;
    const std::size_t n = theta.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad.data[i];
        probe += g;
        const double mi = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
        const double vi = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
        m.data[i] = mi;
        v.data[i] = vi;
        theta.data[i] -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.adam_eps);
        grad.data[i] = 0.0;
    }
    return probe;
}

}  // namespace

BatchGradients batch_gradients(const ModelParams& params, const DocTermMatrix& X,
                               const PairBatch& batch) {
    BatchGradients out;
    out.grad_W = Matrix(params.n_words, params.dim);
    out.grad_T = Matrix(params.n_topics, params.dim);
    out.mean_loss = accumulate_batch(params, X, batch, out.grad_W, out.grad_T);
    return out;
}

AdamState AdamState::zeros(const ModelParams& params) {
    AdamState s;
    s.m_W = Matrix(params.n_words, params.dim);
    s.v_W = Matrix(params.n_words, params.dim);
    s.m_T = Matrix(params.n_topics, params.dim);
    s.v_T = Matrix(params.n_topics, params.dim);
    return s;
}

void adam_step(ModelParams& params, const BatchGradients& grads, AdamState& state,
               const TrainConfig& config) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    // the public surface takes const grads; copy so the fused zeroing of the
    // in-place path below stays an implementation detail
    Matrix gw = grads.grad_W;
    Matrix gt = grads.grad_T;
    const double probe = adam_update(params.W, gw, state.m_W, state.v_W, config, bc1, bc2) +
                         adam_update(params.T, gt, state.m_T, state.v_T, config, bc1, bc2);
    if (!std::isfinite(probe))
        throw std::runtime_error("non-finite gradient at optimizer step " +
                                 std::to_string(state.step));
}

TrainReport train(const DocTermMatrix& X, const ReachabilityMatrix& reach,
                  const TrainConfig& config, const StepHook& on_step) {
    config.validate();
    if (X.n_docs != reach.n_nodes)
        throw std::invalid_argument("document matrix and reachability size mismatch");

    const auto t_start = std::chrono::steady_clock::now();

    TrainReport report;
    report.flagged_docs = X.empty_rows.size();
    report.params =
        init_params(X.n_terms, config.n_topics, config.dim, derive_seed(config.seed, "init"));

    std::vector<std::uint8_t> excluded(X.n_docs, 0);
    for (auto i : X.empty_rows) excluded[i] = 1;
    PairSampler sampler(reach, derive_seed(config.seed, "sampler"), &excluded);

    AdamState state = AdamState::zeros(report.params);
    Matrix grad_W(report.params.n_words, report.params.dim);
    Matrix grad_T(report.params.n_topics, report.params.dim);

    report.loss_curve.reserve(config.steps);
    for (std::size_t step = 1; step <= config.steps; ++step) {
        PairBatch batch = sampler.sample_batch(config.batch_size);
        const double loss = accumulate_batch(report.params, X, batch, grad_W, grad_T);
        if (!std::isfinite(loss))
            throw std::runtime_error("non-finite loss at step " + std::to_string(step));
        report.loss_curve.push_back(loss);

        state.step = step;
        const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
        const double probe =
            adam_update(report.params.W, grad_W, state.m_W, state.v_W, config, bc1, bc2) +
            adam_update(report.params.T, grad_T, state.m_T, state.v_T, config, bc1, bc2);
        if (!std::isfinite(probe))
            throw std::runtime_error("non-finite gradient at optimizer step " +
                                     std::to_string(step));
        if (on_step) on_step(step, report.params);
    }

    report.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

}  // namespace idne
