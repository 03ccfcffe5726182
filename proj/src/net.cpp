#include "iron/net.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "iron/parallel.hpp"

namespace iron {

namespace {

// ---- small deterministic GEMM kernels -------------------------------------
// Every output element is reduced serially in a fixed index order and written
// by exactly one thread, so results are bit-identical for any thread count.

constexpr int kRowBlock = 32;
constexpr int kColChunk = 512;

// C (M x N) = A (M x K) * B (K x N)
void gemm_abc(const double* a, const double* b, double* c, int m, int k, int n, int n_threads) {
    const int blocks = (m + kRowBlock - 1) / kRowBlock;
    parallel_for(blocks, n_threads, [&](std::int64_t blk) {
        const int m0 = static_cast<int>(blk) * kRowBlock;
        const int m1 = std::min(m, m0 + kRowBlock);
        for (int r = m0; r < m1; ++r) std::memset(c + static_cast<std::size_t>(r) * n, 0, sizeof(double) * n);
        for (int n0 = 0; n0 < n; n0 += kColChunk) {
            const int n1 = std::min(n, n0 + kColChunk);
            for (int kk = 0; kk < k; ++kk) {
                const double* brow = b + static_cast<std::size_t>(kk) * n;
                for (int r = m0; r < m1; ++r) {
                    const double w = a[static_cast<std::size_t>(r) * k + kk];
                    double* crow = c + static_cast<std::size_t>(r) * n;
                    for (int j = n0; j < n1; ++j) crow[j] += w * brow[j];
                }
            }
        }
    });
}

// C (M x K) = A (M x N) * B^T, with B stored as (K x N)
void gemm_a_bt(const double* a, const double* b, double* c, int m, int n, int k, int n_threads) {
    const int blocks = (m + kRowBlock - 1) / kRowBlock;
    parallel_for(blocks, n_threads, [&](std::int64_t blk) {
        const int m0 = static_cast<int>(blk) * kRowBlock;
        const int m1 = std::min(m, m0 + kRowBlock);
        for (int r = m0; r < m1; ++r) std::memset(c + static_cast<std::size_t>(r) * k, 0, sizeof(double) * k);
        for (int n0 = 0; n0 < n; n0 += kColChunk) {
            const int n1 = std::min(n, n0 + kColChunk);
            for (int kk = 0; kk < k; ++kk) {
                const double* brow = b + static_cast<std::size_t>(kk) * n;
                for (int r = m0; r < m1; ++r) {
                    const double* arow = a + static_cast<std::size_t>(r) * n;
                    double acc = 0.0;
                    for (int j = n0; j < n1; ++j) acc += arow[j] * brow[j];
                    c[static_cast<std::size_t>(r) * k + kk] += acc;
                }
            }
        }
    });
}

// C (K x N) = A^T * B, with A stored as (M x K), B as (M x N)
void gemm_at_b(const double* a, const double* b, double* c, int m, int k, int n, int n_threads) {
    const int blocks = (k + kRowBlock - 1) / kRowBlock;
    parallel_for(blocks, n_threads, [&](std::int64_t blk) {
        const int k0 = static_cast<int>(blk) * kRowBlock;
        const int k1 = std::min(k, k0 + kRowBlock);
        for (int r = k0; r < k1; ++r) std::memset(c + static_cast<std::size_t>(r) * n, 0, sizeof(double) * n);
        for (int n0 = 0; n0 < n; n0 += kColChunk) {
            const int n1 = std::min(n, n0 + kColChunk);
            for (int mm = 0; mm < m; ++mm) {
                const double* brow = b + static_cast<std::size_t>(mm) * n;
                for (int r = k0; r < k1; ++r) {
                    const double w = a[static_cast<std::size_t>(mm) * k + r];
                    double* crow = c + static_cast<std::size_t>(r) * n;
                    for (int j = n0; j < n1; ++j) crow[j] += w * brow[j];
                }
            }
        }
    });
}

// ---- im2col / col2im -------------------------------------------------------
// Activations are stored channel-major: element (c, sample, pos) lives at
// act[(c * batch + sample) * spatial + pos]. The column buffer is
// col[k][sample * out_spatial + p] with k = ((ci*3 + kd)*3 + kh)*3 + kw.

void im2col(const double* act, int batch, int in_ch, int edge, double* col, int n_threads) {
    const int out_edge = edge - 2;
    const int out_sp = out_edge * out_edge * out_edge;
    const int sp = edge * edge * edge;
    const std::size_t col_stride = static_cast<std::size_t>(batch) * out_sp;
    parallel_for(batch, n_threads, [&](std::int64_t nn) {
        const int n = static_cast<int>(nn);
        for (int ci = 0; ci < in_ch; ++ci) {
            const double* src = act + (static_cast<std::size_t>(ci) * batch + n) * sp;
            for (int kd = 0; kd < 3; ++kd)
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        const int krow = ((ci * 3 + kd) * 3 + kh) * 3 + kw;
                        double* dst = col + krow * col_stride + static_cast<std::size_t>(n) * out_sp;
                        for (int od = 0; od < out_edge; ++od)
                            for (int oh = 0; oh < out_edge; ++oh) {
                                const double* s = src + ((od + kd) * edge + oh + kh) * edge + kw;
                                double* d = dst + (od * out_edge + oh) * out_edge;
                                for (int ow = 0; ow < out_edge; ++ow) d[ow] = s[ow];
                            }
                    }
        }
    });
}

void col2im_add(const double* col, int batch, int in_ch, int edge, double* act, int n_threads) {
    const int out_edge = edge - 2;
    const int out_sp = out_edge * out_edge * out_edge;
    const int sp = edge * edge * edge;
    const std::size_t col_stride = static_cast<std::size_t>(batch) * out_sp;
    parallel_for(batch, n_threads, [&](std::int64_t nn) {
        const int n = static_cast<int>(nn);
        for (int ci = 0; ci < in_ch; ++ci) {
            double* dst = act + (static_cast<std::size_t>(ci) * batch + n) * sp;
            for (int kd = 0; kd < 3; ++kd)
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        const int krow = ((ci * 3 + kd) * 3 + kh) * 3 + kw;
                        const double* src = col + krow * col_stride + static_cast<std::size_t>(n) * out_sp;
                        for (int od = 0; od < out_edge; ++od)
                            for (int oh = 0; oh < out_edge; ++oh) {
                                double* d = dst + ((od + kd) * edge + oh + kh) * edge + kw;
                                const double* s = src + (od * out_edge + oh) * out_edge;
                                for (int ow = 0; ow < out_edge; ++ow) d[ow] += s[ow];
                            }
                    }
        }
    });
}

void add_bias_rows(double* out, const std::vector<double>& bias, std::size_t row_len, int n_threads) {
    parallel_for(static_cast<std::int64_t>(bias.size()), n_threads, [&](std::int64_t c) {
        double* row = out + static_cast<std::size_t>(c) * row_len;
        const double b = bias[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < row_len; ++i) row[i] += b;
    });
}

void bn_infer(const std::vector<double>& x, int batch, int channels, int spatial,
              const BatchNormParams& params, std::vector<double>& y, int n_threads) {
    const std::size_t slab = static_cast<std::size_t>(batch) * spatial;
    parallel_for(channels, n_threads, [&](std::int64_t c) {
        const double inv_std = 1.0 / std::sqrt(params.running_var[static_cast<std::size_t>(c)] + params.epsilon);
        const double scale = params.scale[static_cast<std::size_t>(c)] * inv_std;
        const double shift =
            params.shift[static_cast<std::size_t>(c)] - params.running_mean[static_cast<std::size_t>(c)] * scale;
        const double* xs = x.data() + static_cast<std::size_t>(c) * slab;
        double* ys = y.data() + static_cast<std::size_t>(c) * slab;
        for (std::size_t i = 0; i < slab; ++i) ys[i] = scale * xs[i] + shift;
    });
}

void relu_inplace(std::vector<double>& x) {
    for (double& v : x)
        if (v < 0.0) v = 0.0;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

// ---- model construction ----------------------------------------------------

IronModel IronModel::build(const std::vector<int>& channel_plan, const std::vector<int>& fc_plan,
                           int input_edge, std::uint64_t seed) {
    if (channel_plan.size() < 2 || fc_plan.size() < 2) throw ConfigError("model plans need at least two entries");
    IronModel m;
    m.input_edge = input_edge;
    std::mt19937_64 rng(mix_seed(seed, 0xC0FFEE));
    for (std::size_t l = 0; l + 1 < channel_plan.size(); ++l) {
        ConvBlock blk;
        blk.in_channels = channel_plan[l];
        blk.out_channels = channel_plan[l + 1];
        const int fan_in = blk.in_channels * 27;
        const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        blk.weights.resize(static_cast<std::size_t>(blk.out_channels) * fan_in);
        for (double& w : blk.weights) w = dist(rng);
        blk.bias.assign(static_cast<std::size_t>(blk.out_channels), 0.0);
        blk.bn.scale.assign(static_cast<std::size_t>(blk.out_channels), 1.0);
        blk.bn.shift.assign(static_cast<std::size_t>(blk.out_channels), 0.0);
        blk.bn.running_mean.assign(static_cast<std::size_t>(blk.out_channels), 0.0);
        blk.bn.running_var.assign(static_cast<std::size_t>(blk.out_channels), 1.0);
        m.conv.push_back(std::move(blk));
    }
    for (std::size_t l = 0; l + 1 < fc_plan.size(); ++l) {
        FcLayer fc;
        fc.in_features = fc_plan[l];
        fc.out_features = fc_plan[l + 1];
        const double limit = 1.0 / std::sqrt(static_cast<double>(fc.in_features));
        std::uniform_real_distribution<double> dist(-limit, limit);
        fc.weights.resize(static_cast<std::size_t>(fc.out_features) * fc.in_features);
        for (double& w : fc.weights) w = dist(rng);
        fc.bias.assign(static_cast<std::size_t>(fc.out_features), 0.0);
        m.fc.push_back(std::move(fc));
    }
    m.validate();
    return m;
}

IronModel IronModel::standard(std::uint64_t seed) {
    return build({1, 64, 128, 256, 512}, {512, 256, 64, 16, 6}, 9, seed);
}

IronModel IronModel::reduced(std::uint64_t seed) {
    return build({1, 2, 2, 2, 2}, {2, 2, 2, 2, 6}, 9, seed);
}

void IronModel::validate() const {
    if (conv.empty() || fc.empty()) throw ConfigError("model has no layers");
    if (input_edge - 2 * static_cast<int>(conv.size()) != 1)
        throw ShapeError("conv stack must collapse the input edge to exactly 1 (edge " +
                         std::to_string(input_edge) + ", " + std::to_string(conv.size()) + " blocks)");
    for (std::size_t l = 0; l < conv.size(); ++l) {
        const ConvBlock& b = conv[l];
        if (l > 0 && b.in_channels != conv[l - 1].out_channels)
            throw ShapeError("conv channel plan mismatch at block " + std::to_string(l));
        if (b.weights.size() != static_cast<std::size_t>(b.out_channels) * b.in_channels * 27 ||
            b.bias.size() != static_cast<std::size_t>(b.out_channels))
            throw ShapeError("conv block " + std::to_string(l) + " has inconsistent parameter shapes");
        const std::size_t oc = static_cast<std::size_t>(b.out_channels);
        if (b.bn.scale.size() != oc || b.bn.shift.size() != oc || b.bn.running_mean.size() != oc ||
            b.bn.running_var.size() != oc)
            throw ShapeError("conv block " + std::to_string(l) + " has inconsistent BN shapes");
        for (double v : b.bn.running_var)
            if (!(v >= 0.0)) throw NumericError("BN running variance must be >= 0");
    }
    if (fc.front().in_features != conv.back().out_channels)
        throw ShapeError("first FC input must match the final conv channel count");
    for (std::size_t l = 0; l < fc.size(); ++l) {
        if (l > 0 && fc[l].in_features != fc[l - 1].out_features)
            throw ShapeError("fc plan mismatch at layer " + std::to_string(l));
        if (fc[l].weights.size() != static_cast<std::size_t>(fc[l].out_features) * fc[l].in_features ||
            fc[l].bias.size() != static_cast<std::size_t>(fc[l].out_features))
            throw ShapeError("fc layer " + std::to_string(l) + " has inconsistent parameter shapes");
    }
}

std::vector<TensorRef> IronModel::trainable_tensors() {
    std::vector<TensorRef> out;
    for (std::size_t l = 0; l < conv.size(); ++l) {
        const std::string p = "conv" + std::to_string(l) + ".";
        ConvBlock& b = conv[l];
        out.push_back({p + "weight", {b.out_channels, b.in_channels, 3, 3, 3}, &b.weights});
        out.push_back({p + "bias", {b.out_channels}, &b.bias});
        out.push_back({p + "bn_scale", {b.out_channels}, &b.bn.scale});
        out.push_back({p + "bn_shift", {b.out_channels}, &b.bn.shift});
    }
    for (std::size_t l = 0; l < fc.size(); ++l) {
        const std::string p = "fc" + std::to_string(l) + ".";
        FcLayer& f = fc[l];
        out.push_back({p + "weight", {f.out_features, f.in_features}, &f.weights});
        out.push_back({p + "bias", {f.out_features}, &f.bias});
    }
    return out;
}

std::vector<TensorRef> IronModel::all_tensors() {
    std::vector<TensorRef> out = trainable_tensors();
    for (std::size_t l = 0; l < conv.size(); ++l) {
        const std::string p = "conv" + std::to_string(l) + ".";
        ConvBlock& b = conv[l];
        out.push_back({p + "bn_running_mean", {b.out_channels}, &b.bn.running_mean});
        out.push_back({p + "bn_running_var", {b.out_channels}, &b.bn.running_var});
    }
    return out;
}

ModelGrads ModelGrads::zeros_like(const IronModel& model) {
    ModelGrads g;
    for (const ConvBlock& b : model.conv) {
        g.tensors.emplace_back(b.weights.size(), 0.0);
        g.tensors.emplace_back(b.bias.size(), 0.0);
        g.tensors.emplace_back(b.bn.scale.size(), 0.0);
        g.tensors.emplace_back(b.bn.shift.size(), 0.0);
    }
    for (const FcLayer& f : model.fc) {
        g.tensors.emplace_back(f.weights.size(), 0.0);
        g.tensors.emplace_back(f.bias.size(), 0.0);
    }
    return g;
}

void ModelGrads::set_zero() {
    for (auto& t : tensors) std::fill(t.begin(), t.end(), 0.0);
}

// ---- primitive ops ---------------------------------------------------------

std::vector<double> conv3d_valid(const std::vector<double>& input, int in_channels, int edge,
                                 const std::vector<double>& kernels, int out_channels,
                                 const std::vector<double>& bias) {
    if (edge < 3) throw ShapeError("conv3d_valid requires spatial edge >= 3, got " + std::to_string(edge));
    const std::size_t sp = static_cast<std::size_t>(edge) * edge * edge;
    if (input.size() != static_cast<std::size_t>(in_channels) * sp)
        throw ShapeError("conv3d_valid input size mismatch");
    if (kernels.size() != static_cast<std::size_t>(out_channels) * in_channels * 27 ||
        bias.size() != static_cast<std::size_t>(out_channels))
        throw ShapeError("conv3d_valid kernel/bias size mismatch");
    const int out_edge = edge - 2;
    const int out_sp = out_edge * out_edge * out_edge;
    const int k = in_channels * 27;
    std::vector<double> col(static_cast<std::size_t>(k) * out_sp);
    im2col(input.data(), 1, in_channels, edge, col.data(), 1);
    std::vector<double> out(static_cast<std::size_t>(out_channels) * out_sp);
    gemm_abc(kernels.data(), col.data(), out.data(), out_channels, k, out_sp, 1);
    add_bias_rows(out.data(), bias, static_cast<std::size_t>(out_sp), 1);
    return out;
}

std::vector<double> batchnorm_forward(const std::vector<double>& x, int batch, int channels,
                                      int spatial, BatchNormParams& params, bool train,
                                      BatchNormCache* cache, int n_threads) {
    const std::size_t slab = static_cast<std::size_t>(batch) * spatial;
    if (x.size() != slab * channels) throw ShapeError("batchnorm input size mismatch");
    std::vector<double> y(x.size());
    if (!train) {
        bn_infer(x, batch, channels, spatial, params, y, n_threads);
        return y;
    }
    if (slab < 2)
        throw NumericError("batch normalization needs at least 2 values per channel in train mode "
                           "(insufficient statistics)");
    if (cache) {
        cache->batch = batch;
        cache->channels = channels;
        cache->spatial = spatial;
        cache->mean.assign(static_cast<std::size_t>(channels), 0.0);
        cache->var.assign(static_cast<std::size_t>(channels), 0.0);
        cache->xhat.resize(x.size());
    }
    const double inv_m = 1.0 / static_cast<double>(slab);
    parallel_for(channels, n_threads, [&](std::int64_t c) {
        const double* xs = x.data() + static_cast<std::size_t>(c) * slab;
        double* ys = y.data() + static_cast<std::size_t>(c) * slab;
        double sum = 0.0;
        for (std::size_t i = 0; i < slab; ++i) sum += xs[i];
        const double mean = sum * inv_m;
        double ssq = 0.0;
        for (std::size_t i = 0; i < slab; ++i) {
            const double d = xs[i] - mean;
            ssq += d * d;
        }
        const double var = ssq * inv_m;
        const double inv_std = 1.0 / std::sqrt(var + params.epsilon);
        const double g = params.scale[static_cast<std::size_t>(c)];
        const double b = params.shift[static_cast<std::size_t>(c)];
        if (cache) {
            cache->mean[static_cast<std::size_t>(c)] = mean;
            cache->var[static_cast<std::size_t>(c)] = var;
            double* xh = cache->xhat.data() + static_cast<std::size_t>(c) * slab;
            for (std::size_t i = 0; i < slab; ++i) {
                xh[i] = (xs[i] - mean) * inv_std;
                ys[i] = g * xh[i] + b;
            }
        } else {
            for (std::size_t i = 0; i < slab; ++i) ys[i] = g * (xs[i] - mean) * inv_std + b;
        }
        params.running_mean[static_cast<std::size_t>(c)] =
            (1.0 - params.momentum) * params.running_mean[static_cast<std::size_t>(c)] + params.momentum * mean;
        params.running_var[static_cast<std::size_t>(c)] =
            (1.0 - params.momentum) * params.running_var[static_cast<std::size_t>(c)] + params.momentum * var;
    });
    return y;
}

// ---- forward ---------------------------------------------------------------

namespace {

// Shared conv->BN->ReLU pipeline. In train mode `mutable_model` must be the
// same object as `model` (its BN running stats get updated) and the cache
// captures all intermediates; in infer mode only scratch buffers are used.
std::vector<double> run_network(const IronModel& model, IronModel* mutable_model,
                                const std::vector<double>& input, int batch, bool train,
                                ForwardCache* cache, int n_threads) {
    model.validate();
    const std::size_t in_sp = static_cast<std::size_t>(model.input_edge) * model.input_edge * model.input_edge;
    if (batch < 1 || input.size() != in_sp * batch)
        throw ShapeError("forward input must be batch x 1 x " + std::to_string(model.input_edge) + "^3");

    const int n_blocks = static_cast<int>(model.conv.size());
    std::vector<double> act = input;  // layout [c][n][sp], single input channel
    if (cache) {
        cache->model = &model;
        cache->batch = batch;
        cache->act.assign(static_cast<std::size_t>(n_blocks) + 1, {});
        cache->conv_out.assign(static_cast<std::size_t>(n_blocks), {});
        cache->col.assign(static_cast<std::size_t>(n_blocks), {});
        cache->bn.assign(static_cast<std::size_t>(n_blocks), {});
        cache->fc_in.assign(model.fc.size() + 1, {});
        cache->fc_pre.assign(model.fc.size(), {});
        cache->act[0] = act;
    }

    for (int l = 0; l < n_blocks; ++l) {
        const ConvBlock& blk = model.conv[static_cast<std::size_t>(l)];
        const int edge = model.edge_after(l);
        const int out_edge = edge - 2;
        const int out_sp = out_edge * out_edge * out_edge;
        const int krows = blk.in_channels * 27;
        const std::size_t cols = static_cast<std::size_t>(batch) * out_sp;

        std::vector<double> local_col;
        std::vector<double>& col = cache ? cache->col[static_cast<std::size_t>(l)] : local_col;
        col.resize(static_cast<std::size_t>(krows) * cols);
        im2col(act.data(), batch, blk.in_channels, edge, col.data(), n_threads);

        std::vector<double> conv_out(static_cast<std::size_t>(blk.out_channels) * cols);
        gemm_abc(blk.weights.data(), col.data(), conv_out.data(), blk.out_channels, krows,
                 static_cast<int>(cols), n_threads);
        add_bias_rows(conv_out.data(), blk.bias, cols, n_threads);

        std::vector<double> bn_out;
        if (train) {
            BatchNormParams& bn_params = mutable_model->conv[static_cast<std::size_t>(l)].bn;
            bn_out = batchnorm_forward(conv_out, batch, blk.out_channels, out_sp, bn_params, true,
                                       cache ? &cache->bn[static_cast<std::size_t>(l)] : nullptr, n_threads);
        } else {
            bn_out.resize(conv_out.size());
            bn_infer(conv_out, batch, blk.out_channels, out_sp, blk.bn, bn_out, n_threads);
        }
        if (cache) cache->conv_out[static_cast<std::size_t>(l)] = std::move(conv_out);
        relu_inplace(bn_out);
        act = std::move(bn_out);
        if (cache) cache->act[static_cast<std::size_t>(l) + 1] = act;
    }

    // Final conv stage has spatial extent 1: act is [channels][batch].
    const int feat = model.conv.back().out_channels;
    std::vector<double> fc_act(static_cast<std::size_t>(batch) * feat);
    for (int c = 0; c < feat; ++c)
        for (int n = 0; n < batch; ++n)
            fc_act[static_cast<std::size_t>(n) * feat + c] = act[static_cast<std::size_t>(c) * batch + n];
    if (cache) cache->fc_in[0] = fc_act;

    for (std::size_t f = 0; f < model.fc.size(); ++f) {
        const FcLayer& fc = model.fc[f];
        std::vector<double> pre(static_cast<std::size_t>(batch) * fc.out_features);
        parallel_for(batch, n_threads, [&](std::int64_t n) {
            const double* in_row = fc_act.data() + static_cast<std::size_t>(n) * fc.in_features;
            double* out_row = pre.data() + static_cast<std::size_t>(n) * fc.out_features;
            for (int o = 0; o < fc.out_features; ++o) {
                const double* w = fc.weights.data() + static_cast<std::size_t>(o) * fc.in_features;
                double acc = fc.bias[static_cast<std::size_t>(o)];
                for (int i = 0; i < fc.in_features; ++i) acc += w[i] * in_row[i];
                out_row[o] = acc;
            }
        });
        if (cache) cache->fc_pre[f] = pre;
        if (f + 1 < model.fc.size()) {
            relu_inplace(pre);
            fc_act = std::move(pre);
            if (cache) cache->fc_in[f + 1] = fc_act;
        } else {
            fc_act = std::move(pre);  // final layer is linear
        }
    }
    return fc_act;
}

}  // namespace

std::vector<double> forward_train(IronModel& model, const std::vector<double>& input, int batch,
                                  ForwardCache& cache, int n_threads) {
    ++model.train_forward_count;
    cache.forward_serial = model.train_forward_count;
    return run_network(model, &model, input, batch, true, &cache, n_threads);
}

std::vector<double> forward_infer(const IronModel& model, const std::vector<double>& input,
                                  int batch, int n_threads) {
    return run_network(model, nullptr, input, batch, false, nullptr, n_threads);
}

// ---- backward --------------------------------------------------------------

void backward(const IronModel& model, const ForwardCache& cache,
              const std::vector<double>& output_grad, ModelGrads& grads, int n_threads,
              std::vector<double>* input_grad) {
    if (cache.model != &model || cache.forward_serial != model.train_forward_count)
        throw Error("backward called with a stale or mismatched forward cache");
    const int batch = cache.batch;
    const int n_blocks = static_cast<int>(model.conv.size());
    const int n_fc = static_cast<int>(model.fc.size());
    if (output_grad.size() != static_cast<std::size_t>(batch) * model.output_dim())
        throw ShapeError("output_grad shape mismatch");
    if (grads.tensors.size() != static_cast<std::size_t>(4 * n_blocks + 2 * n_fc))
        grads = ModelGrads::zeros_like(model);

    // FC stage (small; serial over layers, parallel over rows where useful).
    std::vector<double> dpre = output_grad;
    for (int f = n_fc - 1; f >= 0; --f) {
        const FcLayer& fc = model.fc[static_cast<std::size_t>(f)];
        std::vector<double>& dw = grads.tensors[static_cast<std::size_t>(4 * n_blocks + 2 * f)];
        std::vector<double>& db = grads.tensors[static_cast<std::size_t>(4 * n_blocks + 2 * f + 1)];
        const std::vector<double>& in = cache.fc_in[static_cast<std::size_t>(f)];
        parallel_for(fc.out_features, n_threads, [&](std::int64_t o) {
            double* dwrow = dw.data() + static_cast<std::size_t>(o) * fc.in_features;
            std::fill(dwrow, dwrow + fc.in_features, 0.0);
            double dbv = 0.0;
            for (int n = 0; n < batch; ++n) {
                const double g = dpre[static_cast<std::size_t>(n) * fc.out_features + o];
                dbv += g;
                const double* in_row = in.data() + static_cast<std::size_t>(n) * fc.in_features;
                for (int i = 0; i < fc.in_features; ++i) dwrow[i] += g * in_row[i];
            }
            db[static_cast<std::size_t>(o)] = dbv;
        });
        std::vector<double> din(static_cast<std::size_t>(batch) * fc.in_features);
        parallel_for(batch, n_threads, [&](std::int64_t n) {
            double* drow = din.data() + static_cast<std::size_t>(n) * fc.in_features;
            std::fill(drow, drow + fc.in_features, 0.0);
            const double* grow = dpre.data() + static_cast<std::size_t>(n) * fc.out_features;
            for (int o = 0; o < fc.out_features; ++o) {
                const double g = grow[o];
                const double* w = fc.weights.data() + static_cast<std::size_t>(o) * fc.in_features;
                for (int i = 0; i < fc.in_features; ++i) drow[i] += g * w[i];
            }
        });
        if (f > 0) {
            // ReLU between FC layers: mask by the sign of the pre-activation.
            const std::vector<double>& pre = cache.fc_pre[static_cast<std::size_t>(f - 1)];
            for (std::size_t i = 0; i < din.size(); ++i)
                if (pre[i] <= 0.0) din[i] = 0.0;
        }
        dpre = std::move(din);
    }

    // Back to channel-major [c][n] layout for the conv stage.
    const int feat = model.conv.back().out_channels;
    std::vector<double> dact(static_cast<std::size_t>(feat) * batch);
    for (int c = 0; c < feat; ++c)
        for (int n = 0; n < batch; ++n)
            dact[static_cast<std::size_t>(c) * batch + n] = dpre[static_cast<std::size_t>(n) * feat + c];

    for (int l = n_blocks - 1; l >= 0; --l) {
        const ConvBlock& blk = model.conv[static_cast<std::size_t>(l)];
        const int edge = model.edge_after(l);
        const int out_edge = edge - 2;
        const int out_sp = out_edge * out_edge * out_edge;
        const std::size_t slab = static_cast<std::size_t>(batch) * out_sp;
        const BatchNormCache& bn = cache.bn[static_cast<std::size_t>(l)];
        const std::vector<double>& relu_out = cache.act[static_cast<std::size_t>(l) + 1];

        // ReLU backward (mask), then BN backward.
        std::vector<double> dy = std::move(dact);
        for (std::size_t i = 0; i < dy.size(); ++i)
            if (relu_out[i] <= 0.0) dy[i] = 0.0;

        std::vector<double>& dw = grads.tensors[static_cast<std::size_t>(4 * l)];
        std::vector<double>& db = grads.tensors[static_cast<std::size_t>(4 * l + 1)];
        std::vector<double>& dscale = grads.tensors[static_cast<std::size_t>(4 * l + 2)];
        std::vector<double>& dshift = grads.tensors[static_cast<std::size_t>(4 * l + 3)];

        std::vector<double> dconv(dy.size());
        const double inv_m = 1.0 / static_cast<double>(slab);
        parallel_for(blk.out_channels, n_threads, [&](std::int64_t c) {
            const double* dys = dy.data() + static_cast<std::size_t>(c) * slab;
            const double* xh = bn.xhat.data() + static_cast<std::size_t>(c) * slab;
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t i = 0; i < slab; ++i) {
                sum_dy += dys[i];
                sum_dy_xhat += dys[i] * xh[i];
            }
            dscale[static_cast<std::size_t>(c)] = sum_dy_xhat;
            dshift[static_cast<std::size_t>(c)] = sum_dy;
            const double g = blk.bn.scale[static_cast<std::size_t>(c)];
            const double inv_std = 1.0 / std::sqrt(bn.var[static_cast<std::size_t>(c)] + blk.bn.epsilon);
            const double k1 = sum_dy * inv_m;
            const double k2 = sum_dy_xhat * inv_m;
            double* dc = dconv.data() + static_cast<std::size_t>(c) * slab;
            for (std::size_t i = 0; i < slab; ++i) dc[i] = g * inv_std * (dys[i] - k1 - xh[i] * k2);
            // conv bias gradient: BN recenters per channel, so it equals the
            // channel sum of dconv (zero up to roundoff); computed exactly.
            double dbv = 0.0;
            for (std::size_t i = 0; i < slab; ++i) dbv += dc[i];
            db[static_cast<std::size_t>(c)] = dbv;
        });

        const int krows = blk.in_channels * 27;
        gemm_a_bt(dconv.data(), cache.col[static_cast<std::size_t>(l)].data(), dw.data(), blk.out_channels,
                  static_cast<int>(slab), krows, n_threads);

        if (l > 0 || input_grad) {
            std::vector<double> dcol(static_cast<std::size_t>(krows) * slab);
            gemm_at_b(blk.weights.data(), dconv.data(), dcol.data(), blk.out_channels, krows,
                      static_cast<int>(slab), n_threads);
            const std::size_t in_sp = static_cast<std::size_t>(edge) * edge * edge;
            dact.assign(static_cast<std::size_t>(blk.in_channels) * batch * in_sp, 0.0);
            col2im_add(dcol.data(), batch, blk.in_channels, edge, dact.data(), n_threads);
        } else {
            dact.clear();
        }
    }
    if (input_grad) *input_grad = std::move(dact);
}

// ---- one-shot prediction ---------------------------------------------------

Prediction predict_optimum(const IronModel& model, const SimilarityTensor& tensor,
                           const GridIndex& init_center, double label_scale,
                           const std::array<double, 3>& fixed_angles) {
    const int b = model.input_edge - 1;
    const SubTensor sub = extract_subtensor(tensor, init_center, b);
    const std::vector<double>& input = sub.values;
    const std::vector<double> out = forward_infer(model, input, 1, 1);

    Prediction pred;
    pred.init_center = init_center;
    pred.evaluation_count = 1;
    pred.normalized_offset = {out[0], out[1], out[2]};
    pred.metric_offset = denormalize_offset(pred.normalized_offset, label_scale, tensor.grid);
    pred.params.theta_x = tensor.grid.value_x(init_center.i) + pred.metric_offset[0];
    pred.params.theta_y = tensor.grid.value_y(init_center.j) + pred.metric_offset[1];
    pred.params.theta_z = tensor.grid.value_z(init_center.k) + pred.metric_offset[2];
    pred.params.alpha = fixed_angles[0];
    pred.params.beta = fixed_angles[1];
    pred.params.gamma = fixed_angles[2];
    return pred;
}

}  // namespace iron
