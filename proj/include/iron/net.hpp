#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "iron/landscape.hpp"

namespace iron {

// Per-channel batch normalization parameters and running statistics.
struct BatchNormParams {
    std::vector<double> scale;
    std::vector<double> shift;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;
};

struct BatchNormCache {
    int batch = 0;
    int channels = 0;
    int spatial = 0;
    std::vector<double> mean;  // per channel
    std::vector<double> var;   // per channel (biased)
    std::vector<double> xhat;  // normalized pre-affine values
};

// One Conv3d(3x3x3, valid, stride 1) + BN stage of the network.
struct ConvBlock {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> weights;  // [out][in][kd][kh][kw]
    std::vector<double> bias;     // [out]
    BatchNormParams bn;
};

struct FcLayer {
    int in_features = 0;
    int out_features = 0;
    std::vector<double> weights;  // [out][in]
    std::vector<double> bias;     // [out]
};

// Named view of one parameter or state tensor, used for serialization and
// for iterating parameters in a fixed order.
struct TensorRef {
    std::string name;
    std::vector<int> shape;
    std::vector<double>* data;
};

// The regression network: four valid 3x3x3 conv+BN+ReLU blocks collapsing
// the input volume 9 -> 7 -> 5 -> 3 -> 1, then four FC layers
// (512 -> 256 -> 64 -> 16 -> 6) with ReLU between all but the last.
struct IronModel {
    int input_edge = 9;
    std::vector<ConvBlock> conv;
    std::vector<FcLayer> fc;
    std::uint64_t train_forward_count = 0;

    // Standard plan: channels 1,64,128,256,512; FC 512,256,64,16,6.
    static IronModel standard(std::uint64_t seed);
    // Narrow plan for gradient checking: channels 1,2,2,2,2; FC 2,2,2,2,6.
    static IronModel reduced(std::uint64_t seed);
    static IronModel build(const std::vector<int>& channel_plan, const std::vector<int>& fc_plan,
                           int input_edge, std::uint64_t seed);

    int output_dim() const { return fc.empty() ? 0 : fc.back().out_features; }

    // Spatial edge after conv stage `l` (0 = input).
    int edge_after(int stage) const { return input_edge - 2 * stage; }

    void validate() const;

    // Trainable tensors in a fixed order (conv weight/bias/bn_scale/bn_shift
    // per block, then fc weight/bias per layer).
    std::vector<TensorRef> trainable_tensors();
    // Trainable tensors followed by BN running statistics; serialization order.
    std::vector<TensorRef> all_tensors();
};

// Gradients arranged parallel to IronModel::trainable_tensors().
struct ModelGrads {
    std::vector<std::vector<double>> tensors;

    static ModelGrads zeros_like(const IronModel& model);
    void set_zero();
};

// Everything the backward pass needs from a train-mode forward.
struct ForwardCache {
    const IronModel* model = nullptr;
    std::uint64_t forward_serial = 0;
    int batch = 0;
    std::vector<std::vector<double>> act;       // act[0] = input; act[l+1] = block l ReLU output
    std::vector<std::vector<double>> conv_out;  // pre-BN conv outputs per block
    std::vector<std::vector<double>> col;       // im2col buffers per block
    std::vector<BatchNormCache> bn;             // per block
    std::vector<std::vector<double>> fc_in;     // fc_in[0] = flattened conv output
    std::vector<std::vector<double>> fc_pre;    // pre-activation per fc layer
};

// ---- primitive ops -------------------------------------------------------

// Valid (no padding) stride-1 cross-correlation of a single C_in x D^3
// volume with C_out x C_in x 3^3 kernels. Output is C_out x (D-2)^3.
std::vector<double> conv3d_valid(const std::vector<double>& input, int in_channels, int edge,
                                 const std::vector<double>& kernels, int out_channels,
                                 const std::vector<double>& bias);

// Batch normalization over (batch, channels, spatial). Train mode normalizes
// with batch statistics and updates the running statistics in `params`;
// infer mode uses the running statistics and leaves them untouched.
std::vector<double> batchnorm_forward(const std::vector<double>& x, int batch, int channels,
                                      int spatial, BatchNormParams& params, bool train,
                                      BatchNormCache* cache, int n_threads = 1);

// ---- network passes ------------------------------------------------------

// Train-mode forward over a batch (input shape: batch x 1 x edge^3,
// flattened). Returns batch x output_dim predictions and fills `cache`.
std::vector<double> forward_train(IronModel& model, const std::vector<double>& input, int batch,
                                  ForwardCache& cache, int n_threads = 1);

// Infer-mode forward: pure function of (model, input), safe to call
// concurrently.
std::vector<double> forward_infer(const IronModel& model, const std::vector<double>& input,
                                  int batch, int n_threads = 1);

// Exact reverse-mode gradients of forward_train. `output_grad` has shape
// batch x output_dim. Throws if the cache is stale or from another model.
// When input_grad is non-null it receives d(loss)/d(input).
void backward(const IronModel& model, const ForwardCache& cache,
              const std::vector<double>& output_grad, ModelGrads& grads, int n_threads = 1,
              std::vector<double>* input_grad = nullptr);

// ---- one-shot prediction -------------------------------------------------

struct Prediction {
    PoseParams params;                       // estimated optimum (angles copied from fixed_angles)
    GridIndex init_center;
    std::array<double, 3> normalized_offset; // raw network output, components 1-3
    std::array<double, 3> metric_offset;     // offset in meters per axis
    long evaluation_count = 0;               // always 1
};

// Extracts the sub-tensor at init_center, runs exactly one infer-mode
// forward pass, and maps the first three outputs back to metric parameters.
Prediction predict_optimum(const IronModel& model, const SimilarityTensor& tensor,
                           const GridIndex& init_center, double label_scale,
                           const std::array<double, 3>& fixed_angles);

}  // namespace iron
