#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/graph.hpp"
#include "idne/matrix.hpp"
#include "idne/trainer.hpp"

namespace idne {

struct SplitSpec {
    std::size_t repetitions = 10;
    double hidden_fraction = 0.10;  // inductive tasks
    std::uint64_t seed = 42;
    std::vector<double> c_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
    std::size_t cv_folds = 3;
    bool parallel = true;  // repetitions only; each carries a derived seed
};

// One-vs-rest L2-regularized logistic regression, bias unpenalized, features
// standardized with train-set statistics. Fit by full-batch ADAM, at most 500
// iterations, stopping at gradient norm < 1e-5.
struct LogRegModel {
    std::size_t n_classes = 0;
    Matrix weights;                         // L x p
    std::vector<double> bias;               // L
    std::vector<double> feat_mean, feat_scale;
    std::vector<std::uint8_t> class_present;  // absent classes score their prior
    std::vector<double> class_prior;
};

LogRegModel logreg_ovr_train(const Matrix& features,
                             const std::vector<std::vector<std::uint32_t>>& labels,
                             std::size_t n_classes, double c_reg);

Matrix logreg_predict_proba(const LogRegModel& model, const Matrix& features);

// Rank-statistic AUC with midrank tie handling. Throws if truth is constant.
double binary_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth);

// Micro average: every (instance, class) cell pooled into one ranking.
double micro_auc(const Matrix& scores, const std::vector<std::vector<std::uint32_t>>& labels,
                 std::size_t n_classes);

struct EvalCell {
    std::string task;
    double ratio = 0.0;
    std::vector<double> aucs;  // per repetition

    double mean() const;
    double stddev() const;
};

// Model trained on the full network; per repetition, a stratified train split
// of the given ratio feeds the classifier and the remainder is scored.
std::vector<EvalCell> eval_traditional(const Matrix& embeddings, const LabelSet& labels,
                                       const std::vector<double>& ratios,
                                       const SplitSpec& spec);

struct InductiveReport {
    EvalCell classification;
    EvalCell link_prediction;
    std::size_t flagged_embeddings = 0;  // hidden docs with all-zero term rows
};

// Per repetition: hide hidden_fraction of the docs, retrain from scratch on
// the induced sub-network, embed hidden docs from text alone, then score
// classification on the hidden docs and rank (hidden, any) pairs by cosine
// against the full-graph reachability truth.
InductiveReport eval_inductive(const DocTermMatrix& X, const DocumentGraph& graph,
                               const LabelSet& labels, const TrainConfig& train_config,
                               const SplitSpec& spec);

// CSV is task,ratio,repetition,auc; JSON carries {mean, std} per cell.
void write_report_csv(const std::vector<EvalCell>& cells, const std::string& path);
void write_report_json(const std::vector<EvalCell>& cells, const std::string& path);

double cosine_similarity(const double* a, const double* b, std::size_t n);  // 0 when a or b is 0

}  // namespace idne
