#pragma once

#include <cstdint>
#include <vector>

#include "iron/net.hpp"

namespace iron {

struct TrainConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs = 40;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;

    void validate() const;
};

// Per-parameter Adam moments, arranged parallel to
// IronModel::trainable_tensors().
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long t = 0;

    static AdamState zeros_like(const IronModel& model);
};

struct MseResult {
    double loss = 0.0;
    std::vector<double> grad;  // d(loss)/d(prediction), batch x dim
};

// Mean over batch and components of squared error; gradient is
// 2 * (pred - target) / (batch * dim).
MseResult mse_loss(const std::vector<double>& prediction, const std::vector<double>& target,
                   int batch, int dim);

// One standard Adam update with bias correction; increments state.t.
void adam_step(std::vector<TensorRef>& params, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg);

struct TrainResult {
    std::vector<double> loss_history;  // per-epoch mean training loss
};

// Seeded epoch shuffles, forward/mse/backward/adam per batch. Labels are
// padded to the network's six outputs with zero targets in slots 4-6.
// Deterministic for a fixed seed at any thread count.
TrainResult train(IronModel& model, const std::vector<TrainingSample>& dataset,
                  const TrainConfig& cfg, int n_threads = 1);

struct SplitMetrics {
    double mean_loss = 0.0;
    double param_acc = 0.0;  // fraction with all of components 1-3 within 1/22 of the label
    std::size_t count = 0;
};

// Infer-mode evaluation of a dataset split.
SplitMetrics evaluate_split(const IronModel& model, const std::vector<TrainingSample>& dataset,
                            double threshold = 1.0 / 22.0, int n_threads = 1);

// Seeded-shuffle split into train/validation parts (validation_fraction of
// the samples, at least one when the dataset has two or more).
void split_dataset(const std::vector<TrainingSample>& dataset, double validation_fraction,
                   std::uint64_t seed, std::vector<TrainingSample>& train_part,
                   std::vector<TrainingSample>& val_part);

}  // namespace iron
