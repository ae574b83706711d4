#include "idne/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "idne/rng.hpp"

namespace idne {

namespace {

constexpr std::size_t kLogRegMaxIter = 500;
constexpr double kLogRegTol = 1e-5;
constexpr double kLogRegLearningRate = 0.05;

std::vector<std::uint8_t> multi_hot(const std::vector<std::vector<std::uint32_t>>& labels,
                                    std::size_t n_classes) {
    std::vector<std::uint8_t> y(labels.size() * n_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (auto l : labels[i]) y[i * n_classes + l] = 1;
    return y;
}

// Tasks are independent; results land in caller-owned slots keyed by index,
// so scheduling order never shows in the output.
void parallel_over(std::size_t n, bool enable, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = 1;
    if (enable) {
        const unsigned hw = std::thread::hardware_concurrency();
        workers = std::min<std::size_t>(std::max(1u, hw), n);
    }
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

Matrix gather_rows(const Matrix& m, const std::vector<std::uint32_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(m.row(idx[r]), m.row(idx[r]) + m.cols, out.row(r));
    return out;
}

std::vector<std::vector<std::uint32_t>> gather_labels(
    const std::vector<std::vector<std::uint32_t>>& labels,
    const std::vector<std::uint32_t>& idx) {
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels[i]);
    return out;
}

}  // namespace

double cosine_similarity(const double* a, const double* b, std::size_t n) {
    const double na = std::sqrt(dot(a, a, n));
    const double nb = std::sqrt(dot(b, b, n));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b, n) / (na * nb);
}

double binary_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
    if (scores.size() != truth.size()) throw std::invalid_argument("AUC input size mismatch");
    std::size_t n_pos = 0;
    for (auto t : truth) n_pos += t ? 1 : 0;
    const std::size_t n_neg = truth.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("AUC undefined: truth labels are constant");

    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] < scores[b];
    });

    // Mann-Whitney with midranks for ties
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (truth[order[k]]) rank_sum_pos += midrank;
        i = j;
    }
    const double p = static_cast<double>(n_pos);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

double micro_auc(const Matrix& scores, const std::vector<std::vector<std::uint32_t>>& labels,
                 std::size_t n_classes) {
    if (scores.rows != labels.size() || scores.cols != n_classes)
        throw std::invalid_argument("micro_auc shape mismatch");
    const std::vector<std::uint8_t> y = multi_hot(labels, n_classes);
    return binary_auc(scores.data, y);
}

LogRegModel logreg_ovr_train(const Matrix& features,
                             const std::vector<std::vector<std::uint32_t>>& labels,
                             std::size_t n_classes, double c_reg) {
    const std::size_t n = features.rows;
    const std::size_t p = features.cols;
    if (n < 2) throw std::invalid_argument("need at least two training documents");
    if (labels.size() != n) throw std::invalid_argument("label/feature size mismatch");

    LogRegModel model;
    model.n_classes = n_classes;
    model.weights = Matrix(n_classes, p);
    model.bias.assign(n_classes, 0.0);
    model.feat_mean.assign(p, 0.0);
    model.feat_scale.assign(p, 1.0);
    model.class_present.assign(n_classes, 0);
    model.class_prior.assign(n_classes, 0.0);

    // standardize with train statistics
    for (std::size_t i = 0; i < n; ++i)
        axpy(1.0 / static_cast<double>(n), features.row(i), model.feat_mean.data(), p);
    std::vector<double> var(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = features.row(i);
        for (std::size_t j = 0; j < p; ++j) {
            const double c = x[j] - model.feat_mean[j];
            var[j] += c * c;
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        const double s = std::sqrt(var[j] / static_cast<double>(n));
        model.feat_scale[j] = s > 0.0 ? s : 1.0;
    }
    Matrix X(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = features.row(i);
        double* dst = X.row(i);
        for (std::size_t j = 0; j < p; ++j)
            dst[j] = (src[j] - model.feat_mean[j]) / model.feat_scale[j];
    }

    const std::vector<std::uint8_t> Y = multi_hot(labels, n_classes);
    std::vector<std::size_t> pos_count(n_classes, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < n_classes; ++l) pos_count[l] += Y[i * n_classes + l];

    std::size_t n_absent = 0;
    for (std::size_t l = 0; l < n_classes; ++l) {
        model.class_prior[l] =
            (static_cast<double>(pos_count[l]) + 1.0) / (static_cast<double>(n) + 2.0);
        if (pos_count[l] > 0 && pos_count[l] < n)
            model.class_present[l] = 1;
        else
            ++n_absent;
    }
    if (n_absent > 0)
        std::cerr << "warning: " << n_absent << " of " << n_classes
                  << " classes degenerate in the training split; scored with class prior\n";

    // full-batch ADAM on all present classes jointly; objective per class is
    // mean log-loss + ||w||^2 / (2 C n), bias unpenalized
    const double inv_n = 1.0 / static_cast<double>(n);
    const double reg = 1.0 / (c_reg * static_cast<double>(n));
    Matrix grad_w(n_classes, p);
    std::vector<double> grad_b(n_classes, 0.0);
    Matrix m_w(n_classes, p), v_w(n_classes, p);
    std::vector<double> m_b(n_classes, 0.0), v_b(n_classes, 0.0);
    std::vector<double> residual(n_classes, 0.0);

    for (std::size_t iter = 1; iter <= kLogRegMaxIter; ++iter) {
        grad_w.fill(0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = X.row(i);
            for (std::size_t l = 0; l < n_classes; ++l) {
                if (!model.class_present[l]) continue;
                const double s = dot(model.weights.row(l), x, p) + model.bias[l];
                residual[l] = (sigmoid(s) - static_cast<double>(Y[i * n_classes + l])) * inv_n;
            }
            for (std::size_t l = 0; l < n_classes; ++l) {
                if (!model.class_present[l] || residual[l] == 0.0) continue;
                axpy(residual[l], x, grad_w.row(l), p);
                grad_b[l] += residual[l];
            }
        }
        double grad_norm_sq = 0.0;
        for (std::size_t l = 0; l < n_classes; ++l) {
            if (!model.class_present[l]) continue;
            double* gw = grad_w.row(l);
            const double* w = model.weights.row(l);
            for (std::size_t j = 0; j < p; ++j) {
                gw[j] += reg * w[j];
                grad_norm_sq += gw[j] * gw[j];
            }
            grad_norm_sq += grad_b[l] * grad_b[l];
        }
        if (std::sqrt(grad_norm_sq) < kLogRegTol) break;

        const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(iter));
        const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(iter));
        for (std::size_t l = 0; l < n_classes; ++l) {
            if (!model.class_present[l]) continue;
            double* w = model.weights.row(l);
            double* gm = m_w.row(l);
            double* gv = v_w.row(l);
            const double* gw = grad_w.row(l);
            for (std::size_t j = 0; j < p; ++j) {
                gm[j] = 0.9 * gm[j] + 0.1 * gw[j];
                gv[j] = 0.999 * gv[j] + 0.001 * gw[j] * gw[j];
                w[j] -= kLogRegLearningRate * (gm[j] / bc1) / (std::sqrt(gv[j] / bc2) + 1e-8);
            }
            m_b[l] = 0.9 * m_b[l] + 0.1 * grad_b[l];
            v_b[l] = 0.999 * v_b[l] + 0.001 * grad_b[l] * grad_b[l];
            model.bias[l] -=
                kLogRegLearningRate * (m_b[l] / bc1) / (std::sqrt(v_b[l] / bc2) + 1e-8);
        }
    }
    return model;
}

Matrix logreg_predict_proba(const LogRegModel& model, const Matrix& features) {
    if (features.cols != model.weights.cols)
        throw std::invalid_argument("feature dimension mismatch");
    const std::size_t p = features.cols;
    Matrix probs(features.rows, model.n_classes);
    std::vector<double> x(p);
    for (std::size_t i = 0; i < features.rows; ++i) {
        const double* src = features.row(i);
        for (std::size_t j = 0; j < p; ++j)
            x[j] = (src[j] - model.feat_mean[j]) / model.feat_scale[j];
        for (std::size_t l = 0; l < model.n_classes; ++l) {
            probs.at(i, l) = model.class_present[l]
                                 ? sigmoid(dot(model.weights.row(l), x.data(), p) + model.bias[l])
                                 : model.class_prior[l];
        }
    }
    return probs;
}

double EvalCell::mean() const {
    if (aucs.empty()) return 0.0;
    return std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
}

double EvalCell::stddev() const {
    if (aucs.size() < 2) return 0.0;
    const double mu = mean();
    double acc = 0.0;
    for (double a : aucs) acc += (a - mu) * (a - mu);
    return std::sqrt(acc / static_cast<double>(aucs.size()));
}

namespace {

// Stratified when every document carries exactly one label; multi-label
// corpora fall back to a plain shuffled split.
std::vector<std::uint32_t> sample_train_indices(const LabelSet& labels, double ratio, Rng& rng,
                                                bool* stratified_out) {
    const std::size_t n = labels.per_doc.size();
    const bool stratified = labels.single_label();
    if (stratified_out) *stratified_out = stratified;

    std::vector<std::uint32_t> train;
    if (stratified) {
        std::vector<std::vector<std::uint32_t>> by_class(labels.n_classes());
        for (std::size_t i = 0; i < n; ++i)
            by_class[labels.per_doc[i][0]].push_back(static_cast<std::uint32_t>(i));
        for (auto& members : by_class) {
            for (std::size_t i = members.size(); i > 1; --i)
                std::swap(members[i - 1], members[rng.below(i)]);
            const auto take = static_cast<std::size_t>(
                std::floor(ratio * static_cast<double>(members.size()) + 0.5));
            for (std::size_t i = 0; i < take && i < members.size(); ++i)
                train.push_back(members[i]);
        }
    } else {
        std::vector<std::uint32_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
        const auto take =
            static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
        train.assign(all.begin(), all.begin() + std::min(take, n));
    }
    std::sort(train.begin(), train.end());
    return train;
}

std::vector<std::uint32_t> complement_of(const std::vector<std::uint32_t>& sorted_subset,
                                         std::size_t n) {
    std::vector<std::uint32_t> out;
    out.reserve(n - sorted_subset.size());
    std::size_t k = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (k < sorted_subset.size() && sorted_subset[k] == i) {
            ++k;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

// 3-fold cross-validation of the regularization grid on the training split.
double choose_c(const Matrix& features, const std::vector<std::vector<std::uint32_t>>& labels,
                std::size_t n_classes, const SplitSpec& spec, Rng& rng) {
    if (spec.c_grid.empty()) throw std::invalid_argument("empty C grid");
    if (spec.c_grid.size() == 1) return spec.c_grid[0];
    const std::size_t n = features.rows;
    const std::size_t folds = std::min(spec.cv_folds, n);

    // stratified round-robin fold assignment when single-label
    bool single = true;
    for (const auto& ls : labels)
        if (ls.size() != 1) single = false;
    std::vector<std::uint32_t> fold_of(n, 0);
    if (single) {
        std::vector<std::vector<std::uint32_t>> by_class(n_classes);
        for (std::size_t i = 0; i < n; ++i)
            by_class[labels[i][0]].push_back(static_cast<std::uint32_t>(i));
        std::uint32_t next = 0;
        for (auto& members : by_class) {
            for (std::size_t i = members.size(); i > 1; --i)
                std::swap(members[i - 1], members[rng.below(i)]);
            for (auto idx : members) fold_of[idx] = (next++) % folds;
        }
    } else {
        std::vector<std::uint32_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
        for (std::size_t k = 0; k < n; ++k) fold_of[all[k]] = static_cast<std::uint32_t>(k % folds);
    }

    double best_c = spec.c_grid[0];
    double best_score = -1.0;
    for (double c : spec.c_grid) {
        double score_sum = 0.0;
        std::size_t scored = 0;
        for (std::uint32_t f = 0; f < folds; ++f) {
            std::vector<std::uint32_t> tr, va;
            for (std::uint32_t i = 0; i < n; ++i)
                (fold_of[i] == f ? va : tr).push_back(i);
            if (tr.size() < 2 || va.empty()) continue;
            LogRegModel m = logreg_ovr_train(gather_rows(features, tr), gather_labels(labels, tr),
                                             n_classes, c);
            Matrix probs = logreg_predict_proba(m, gather_rows(features, va));
            try {
                score_sum += micro_auc(probs, gather_labels(labels, va), n_classes);
                ++scored;
            } catch (const std::invalid_argument&) {
                // validation fold with constant truth contributes nothing
            }
        }
        const double score = scored ? score_sum / static_cast<double>(scored) : 0.0;
        if (score > best_score) {
            best_score = score;
            best_c = c;
        }
    }
    return best_c;
}

}  // namespace

std::vector<EvalCell> eval_traditional(const Matrix& embeddings, const LabelSet& labels,
                                       const std::vector<double>& ratios,
                                       const SplitSpec& spec) {
    if (embeddings.rows != labels.per_doc.size())
        throw std::invalid_argument("embedding/label size mismatch");
    for (double r : ratios)
        if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("train ratio must be in (0,1)");
    if (spec.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");

    std::vector<EvalCell> cells(ratios.size());
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
        cells[ri].task = "traditional";
        cells[ri].ratio = ratios[ri];
        cells[ri].aucs.assign(spec.repetitions, 0.0);
    }

    const std::size_t n_tasks = ratios.size() * spec.repetitions;
    parallel_over(n_tasks, spec.parallel, [&](std::size_t t) {
        const std::size_t ri = t / spec.repetitions;
        const std::size_t rep = t % spec.repetitions;
        Rng rng(derive_seed(spec.seed, "traditional-split", ri * 7919 + rep));

        bool stratified = false;
        const auto train_idx = sample_train_indices(labels, ratios[ri], rng, &stratified);
        static std::atomic<bool> warned{false};
        if (!stratified && !warned.exchange(true))
            std::cerr << "warning: multi-label corpus; unstratified splits used\n";
        const auto test_idx = complement_of(train_idx, embeddings.rows);
        if (train_idx.empty() || test_idx.empty())
            throw std::runtime_error("degenerate train/test split at ratio " +
                                     std::to_string(ratios[ri]));

        const Matrix train_x = gather_rows(embeddings, train_idx);
        const auto train_y = gather_labels(labels.per_doc, train_idx);
        const double c = choose_c(train_x, train_y, labels.n_classes(), spec, rng);
        const LogRegModel model = logreg_ovr_train(train_x, train_y, labels.n_classes(), c);
        const Matrix probs = logreg_predict_proba(model, gather_rows(embeddings, test_idx));
        cells[ri].aucs[rep] =
            micro_auc(probs, gather_labels(labels.per_doc, test_idx), labels.n_classes());
    });
    return cells;
}

InductiveReport eval_inductive(const DocTermMatrix& X, const DocumentGraph& graph,
                               const LabelSet& labels, const TrainConfig& train_config,
                               const SplitSpec& spec) {
    if (X.n_docs != graph.n_nodes || X.n_docs != labels.per_doc.size())
        throw std::invalid_argument("corpus/graph/label size mismatch");
    if (!(spec.hidden_fraction > 0.0 && spec.hidden_fraction < 1.0))
        throw std::invalid_argument("hidden fraction must be in (0,1)");

    const std::size_t n = X.n_docs;
    const ReachabilityMatrix full_reach = build_delta(graph);  // link-prediction truth

    InductiveReport report;
    report.classification.task = "inductive-classification";
    report.classification.ratio = spec.hidden_fraction;
    report.classification.aucs.assign(spec.repetitions, 0.0);
    report.link_prediction.task = "inductive-link";
    report.link_prediction.ratio = spec.hidden_fraction;
    report.link_prediction.aucs.assign(spec.repetitions, 0.0);
    std::vector<std::size_t> flagged(spec.repetitions, 0);

    parallel_over(spec.repetitions, spec.parallel, [&](std::size_t rep) {
        Rng rng(derive_seed(spec.seed, "inductive-split", rep));

        std::vector<std::uint32_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
        std::size_t n_hidden = static_cast<std::size_t>(
            std::floor(spec.hidden_fraction * static_cast<double>(n) + 0.5));
        n_hidden = std::max<std::size_t>(1, std::min(n_hidden, n - 2));
        std::vector<std::uint32_t> hidden(all.begin(), all.begin() + n_hidden);
        std::sort(hidden.begin(), hidden.end());
        const auto observed = complement_of(hidden, n);

        // sub-network: hidden rows/columns never reach the trainer
        DocumentGraph subgraph = graph.subgraph(observed);
        DocTermMatrix sub_x;
        sub_x.n_docs = observed.size();
        sub_x.n_terms = X.n_terms;
        sub_x.rows.reserve(observed.size());
        for (std::size_t k = 0; k < observed.size(); ++k) {
            sub_x.rows.push_back(X.rows[observed[k]]);
            if (sub_x.rows.back().empty())
                sub_x.empty_rows.push_back(static_cast<std::uint32_t>(k));
        }

        TrainConfig cfg = train_config;
        cfg.seed = derive_seed(derive_seed(spec.seed, "inductive-train", rep), "run");
        const TrainReport trained = train(sub_x, build_delta(subgraph), cfg);

        const Matrix emb = embed_corpus(trained.params, X);
        for (auto h : hidden)
            if (X.row_empty(h)) ++flagged[rep];

        // classification on induced representations
        const Matrix obs_x = gather_rows(emb, observed);
        const auto obs_y = gather_labels(labels.per_doc, observed);
        Rng cv_rng(derive_seed(spec.seed, "inductive-cv", rep));
        const double c = choose_c(obs_x, obs_y, labels.n_classes(), spec, cv_rng);
        const LogRegModel model = logreg_ovr_train(obs_x, obs_y, labels.n_classes(), c);
        const Matrix probs = logreg_predict_proba(model, gather_rows(emb, hidden));
        report.classification.aucs[rep] =
            micro_auc(probs, gather_labels(labels.per_doc, hidden), labels.n_classes());

        // rank (hidden, any) pairs by cosine against the full-graph truth
        std::vector<double> scores;
        std::vector<std::uint8_t> truth;
        scores.reserve(hidden.size() * (n - 1));
        truth.reserve(hidden.size() * (n - 1));
        for (auto h : hidden) {
            const double* dh = emb.row(h);
            for (std::uint32_t j = 0; j < n; ++j) {
                if (j == h) continue;
                scores.push_back(cosine_similarity(dh, emb.row(j), emb.cols));
                truth.push_back(full_reach.reachable(h, j) ? 1 : 0);
            }
        }
        report.link_prediction.aucs[rep] = binary_auc(scores, truth);
    });

    for (auto f : flagged) report.flagged_embeddings += f;
    return report;
}

void write_report_csv(const std::vector<EvalCell>& cells, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "task,ratio,repetition,auc\n";
    for (const auto& cell : cells)
        for (std::size_t rep = 0; rep < cell.aucs.size(); ++rep)
            out << cell.task << ',' << cell.ratio << ',' << rep << ',' << cell.aucs[rep] << '\n';
}

void write_report_json(const std::vector<EvalCell>& cells, const std::string& path) {
    nlohmann::json j;
    j["cells"] = nlohmann::json::array();
    for (const auto& cell : cells) {
        j["cells"].push_back({{"task", cell.task},
                              {"ratio", cell.ratio},
                              {"mean", cell.mean()},
                              {"std", cell.stddev()},
                              {"repetitions", cell.aucs.size()}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace idne
