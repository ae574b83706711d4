#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "idne/corpus.hpp"
#include "idne/graph.hpp"
#include "idne/model.hpp"

namespace idne {

struct TrainConfig {
    std::size_t n_topics = 32;
    std::size_t dim = 256;
    std::size_t steps = 5000;
    std::size_t batch_size = 32;  // half positive, half negative
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 42;

    void validate() const;  // throws std::invalid_argument
};

// -[y log sigma(s) + (1-y) log sigma(-s)] for s = d_i . d_j, evaluated in the
// overflow-safe form max(s,0) - s*y + log1p(exp(-|s|)).
double pair_loss(const std::vector<double>& d_i, const std::vector<double>& d_j, int label);
double pair_loss_from_score(double score, int label);

double sigmoid(double x);

struct BatchGradients {
    Matrix grad_W;
    Matrix grad_T;
    double mean_loss = 0.0;
};

// Exact gradients of the mean pair loss through the full forward pass: the
// value path of W plus the key path of W and T through the rectified,
// column-normalized attention. Fallback columns propagate nothing. Each
// distinct document in the batch is embedded once.
BatchGradients batch_gradients(const ModelParams& params, const DocTermMatrix& X,
                               const PairBatch& batch);

struct AdamState {
    Matrix m_W, v_W, m_T, v_T;
    std::size_t step = 0;

    static AdamState zeros(const ModelParams& params);
};

// Standard bias-corrected update; throws on non-finite gradients.
void adam_step(ModelParams& params, const BatchGradients& grads, AdamState& state,
               const TrainConfig& config);

struct TrainReport {
    std::vector<double> loss_curve;  // mean NLL per step
    ModelParams params;
    double wallclock_seconds = 0.0;
    std::size_t flagged_docs = 0;    // all-zero term rows excluded from sampling
};

// on_step, when set, runs after each optimizer step (periodic checkpoints,
// progress reporting).
using StepHook = std::function<void(std::size_t step, const ModelParams&)>;

TrainReport train(const DocTermMatrix& X, const ReachabilityMatrix& reach,
                  const TrainConfig& config, const StepHook& on_step = {});

}  // namespace idne
