#include "iron/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "iron/parallel.hpp"

namespace iron {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation_fraction must lie in [0, 1)");
}

AdamState AdamState::zeros_like(const IronModel& model) {
    AdamState s;
    const ModelGrads proto = ModelGrads::zeros_like(model);
    for (const auto& t : proto.tensors) {
        s.m.emplace_back(t.size(), 0.0);
        s.v.emplace_back(t.size(), 0.0);
    }
    return s;
}

MseResult mse_loss(const std::vector<double>& prediction, const std::vector<double>& target,
                   int batch, int dim) {
    const std::size_t n = static_cast<std::size_t>(batch) * dim;
    if (prediction.size() != n || target.size() != n) throw ShapeError("mse_loss shape mismatch");
    MseResult r;
    r.grad.resize(n);
    const double inv = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = prediction[i] - target[i];
        sum += d * d;
        r.grad[i] = 2.0 * d * inv;
    }
    r.loss = sum * inv;
    return r;
}

void adam_step(std::vector<TensorRef>& params, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg) {
    if (params.size() != grads.tensors.size() || params.size() != state.m.size())
        throw ShapeError("adam_step parameter/gradient/state arity mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<double>& w = *params[p].data;
        const std::vector<double>& g = grads.tensors[p];
        if (w.size() != g.size()) throw ShapeError("adam_step shape mismatch in tensor " + params[p].name);
        std::vector<double>& m = state.m[p];
        std::vector<double>& v = state.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

namespace {

// Copies a run of samples into a batch input array and a 6-wide target array
// (label in slots 1-3, zeros in slots 4-6).
void fill_batch(const std::vector<TrainingSample>& dataset, const std::vector<std::size_t>& order,
                std::size_t begin, std::size_t count, int dim_out, std::vector<double>& input,
                std::vector<double>& target) {
    const std::size_t in_sp = dataset[order[begin]].input.size();
    input.resize(count * in_sp);
    target.assign(count * static_cast<std::size_t>(dim_out), 0.0);
    for (std::size_t s = 0; s < count; ++s) {
        const TrainingSample& sample = dataset[order[begin + s]];
        for (std::size_t i = 0; i < in_sp; ++i)
            input[s * in_sp + i] = static_cast<double>(sample.input[i]);
        for (int c = 0; c < 3; ++c)
            target[s * static_cast<std::size_t>(dim_out) + c] = static_cast<double>(sample.label[static_cast<std::size_t>(c)]);
    }
}

}  // namespace

TrainResult train(IronModel& model, const std::vector<TrainingSample>& dataset,
                  const TrainConfig& cfg, int n_threads) {
    cfg.validate();
    model.validate();
    if (dataset.empty()) throw ConfigError("training dataset is empty");
    if (dataset.size() < static_cast<std::size_t>(cfg.batch_size))
        throw ConfigError("dataset size must be >= batch_size");

    const int dim_out = model.output_dim();
    std::vector<TensorRef> params = model.trainable_tensors();
    AdamState adam = AdamState::zeros_like(model);
    ModelGrads grads = ModelGrads::zeros_like(model);
    ForwardCache cache;
    std::mt19937_64 rng(cfg.seed);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    std::vector<double> input, target;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t begin = 0; begin < dataset.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), dataset.size() - begin);
            if (count < 2) break;  // BN needs at least two samples; drop a trailing singleton
            fill_batch(dataset, order, begin, count, dim_out, input, target);
            const std::vector<double> pred = forward_train(model, input, static_cast<int>(count), cache, n_threads);
            const MseResult mse = mse_loss(pred, target, static_cast<int>(count), dim_out);
            if (!std::isfinite(mse.loss))
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(begin / static_cast<std::size_t>(cfg.batch_size)));
            backward(model, cache, mse.grad, grads, n_threads);
            adam_step(params, grads, adam, cfg);
            epoch_loss += mse.loss * static_cast<double>(count);
            seen += count;
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(seen));
    }
    return result;
}

SplitMetrics evaluate_split(const IronModel& model, const std::vector<TrainingSample>& dataset,
                            double threshold, int n_threads) {
    if (dataset.empty()) throw ConfigError("evaluate_split requires a nonempty dataset");
    const int dim_out = model.output_dim();
    SplitMetrics metrics;
    metrics.count = dataset.size();

    // Batched infer passes keep this fast; results are per-sample and do not
    // depend on the batching.
    const std::size_t chunk = 256;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> input, target;
    double loss_sum = 0.0;
    std::size_t accurate = 0;
    for (std::size_t begin = 0; begin < dataset.size(); begin += chunk) {
        const std::size_t count = std::min(chunk, dataset.size() - begin);
        fill_batch(dataset, order, begin, count, dim_out, input, target);
        const std::vector<double> pred = forward_infer(model, input, static_cast<int>(count), n_threads);
        for (std::size_t s = 0; s < count; ++s) {
            bool ok = true;
            for (int c = 0; c < 3; ++c) {
                const double err = std::fabs(pred[s * static_cast<std::size_t>(dim_out) + c] -
                                             target[s * static_cast<std::size_t>(dim_out) + c]);
                if (!(err < threshold)) ok = false;
            }
            if (ok) ++accurate;
        }
        const MseResult mse = mse_loss(pred, target, static_cast<int>(count), dim_out);
        loss_sum += mse.loss * static_cast<double>(count);
    }
    metrics.mean_loss = loss_sum / static_cast<double>(dataset.size());
    metrics.param_acc = static_cast<double>(accurate) / static_cast<double>(dataset.size());
    return metrics;
}

void split_dataset(const std::vector<TrainingSample>& dataset, double validation_fraction,
                   std::uint64_t seed, std::vector<TrainingSample>& train_part,
                   std::vector<TrainingSample>& val_part) {
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed ^ 0x51E3D5B117C4D9A3ULL);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(dataset.size())));
    if (validation_fraction > 0.0 && dataset.size() >= 2 && n_val == 0) n_val = 1;
    if (n_val >= dataset.size()) n_val = dataset.size() - 1;
    train_part.clear();
    val_part.clear();
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < dataset.size() - n_val)
            train_part.push_back(dataset[order[i]]);
        else
            val_part.push_back(dataset[order[i]]);
    }
}

}  // namespace iron
