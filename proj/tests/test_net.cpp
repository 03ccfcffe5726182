#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "iron/net.hpp"

#include "gradcheck_common.hpp"

using namespace iron;

namespace {

// Naive 7-nested-loop reference convolution, independent of the im2col path.
std::vector<double> conv3d_reference(const std::vector<double>& input, int in_ch, int edge,
                                     const std::vector<double>& kernels, int out_ch,
                                     const std::vector<double>& bias) {
    const int oe = edge - 2;
    std::vector<double> out(static_cast<std::size_t>(out_ch) * oe * oe * oe, 0.0);
    for (int co = 0; co < out_ch; ++co)
        for (int od = 0; od < oe; ++od)
            for (int oh = 0; oh < oe; ++oh)
                for (int ow = 0; ow < oe; ++ow) {
                    double acc = bias[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < in_ch; ++ci)
                        for (int kd = 0; kd < 3; ++kd)
                            for (int kh = 0; kh < 3; ++kh)
                                for (int kw = 0; kw < 3; ++kw)
                                    acc += kernels[(((static_cast<std::size_t>(co) * in_ch + ci) * 3 + kd) * 3 + kh) * 3 + kw] *
                                           input[(static_cast<std::size_t>(ci) * edge + od + kd) * edge * edge +
                                                 (oh + kh) * edge + ow + kw];
                    out[((static_cast<std::size_t>(co) * oe + od) * oe + oh) * oe + ow] = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("conv3d_valid hand cases") {
    SUBCASE("all-ones kernel over all-ones 3^3 input sums to 27") {
        const std::vector<double> input(27, 1.0);
        const std::vector<double> kernel(27, 1.0);
        const std::vector<double> out = conv3d_valid(input, 1, 3, kernel, 1, {0.0});
        REQUIRE(out.size() == 1);
        CHECK(out[0] == doctest::Approx(27.0).epsilon(1e-15));
    }
    SUBCASE("center-one kernel crops the interior") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        std::vector<double> input(5 * 5 * 5);
        for (double& v : input) v = d(rng);
        std::vector<double> kernel(27, 0.0);
        kernel[13] = 1.0;  // offset (1,1,1)
        const std::vector<double> out = conv3d_valid(input, 1, 5, kernel, 1, {0.0});
        REQUIRE(out.size() == 27);
        for (int od = 0; od < 3; ++od)
            for (int oh = 0; oh < 3; ++oh)
                for (int ow = 0; ow < 3; ++ow)
                    CHECK(out[(static_cast<std::size_t>(od) * 3 + oh) * 3 + ow] ==
                          input[(static_cast<std::size_t>(od) + 1) * 25 + (oh + 1) * 5 + ow + 1]);
    }
    SUBCASE("matches the naive reference on random inputs") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        std::vector<double> input(5 * 5 * 5);
        for (double& v : input) v = d(rng);
        std::vector<double> kernels(2 * 27);
        for (double& v : kernels) v = d(rng);
        const std::vector<double> bias{0.3, -0.7};
        const auto fast = conv3d_valid(input, 1, 5, kernels, 2, bias);
        const auto ref = conv3d_reference(input, 1, 5, kernels, 2, bias);
        REQUIRE(fast.size() == ref.size());
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
    SUBCASE("multi-channel random case") {
        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        std::vector<double> input(3 * 4 * 4 * 4);
        for (double& v : input) v = d(rng);
        std::vector<double> kernels(5 * 3 * 27);
        for (double& v : kernels) v = d(rng);
        std::vector<double> bias(5);
        for (double& v : bias) v = d(rng);
        const auto fast = conv3d_valid(input, 3, 4, kernels, 5, bias);
        const auto ref = conv3d_reference(input, 3, 4, kernels, 5, bias);
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
    SUBCASE("edge below 3 is a shape error") {
        CHECK_THROWS_AS(conv3d_valid(std::vector<double>(8, 0.0), 1, 2, std::vector<double>(27, 0.0), 1, {0.0}),
                        ShapeError);
    }
}

TEST_CASE("batchnorm_forward") {
    BatchNormParams params;
    params.scale = {1.0};
    params.shift = {0.0};
    params.running_mean = {0.0};
    params.running_var = {1.0};

    SUBCASE("constant zero input stays zero in both modes") {
        const std::vector<double> x(8, 0.0);
        BatchNormParams p = params;
        for (double v : batchnorm_forward(x, 4, 1, 2, p, true, nullptr)) CHECK(v == doctest::Approx(0.0));
        BatchNormParams q = params;
        for (double v : batchnorm_forward(x, 4, 1, 2, q, false, nullptr)) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("scale zero pins the output to the shift") {
        BatchNormParams p = params;
        p.scale = {0.0};
        p.shift = {2.5};
        std::vector<double> x{-3.0, 1.0, 7.0, 0.5};
        for (double v : batchnorm_forward(x, 2, 1, 2, p, true, nullptr))
            CHECK(v == doctest::Approx(2.5).epsilon(1e-15));
    }
    SUBCASE("train mode standardizes each channel and updates running stats") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> d(3.0, 2.0);
        const int batch = 16, channels = 3, spatial = 25;
        std::vector<double> x(static_cast<std::size_t>(batch) * channels * spatial);
        for (double& v : x) v = d(rng);
        BatchNormParams p;
        p.scale.assign(channels, 1.0);
        p.shift.assign(channels, 0.0);
        p.running_mean.assign(channels, 0.0);
        p.running_var.assign(channels, 1.0);
        const auto out = batchnorm_forward(x, batch, channels, spatial, p, true, nullptr);
        const std::size_t slab = static_cast<std::size_t>(batch) * spatial;
        for (int c = 0; c < channels; ++c) {
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < slab; ++i) mean += out[c * slab + i];
            mean /= static_cast<double>(slab);
            for (std::size_t i = 0; i < slab; ++i)
                var += (out[c * slab + i] - mean) * (out[c * slab + i] - mean);
            var /= static_cast<double>(slab);
            CHECK(std::fabs(mean) < 1e-6);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
            CHECK(p.running_mean[static_cast<std::size_t>(c)] != 0.0);
            CHECK(p.running_var[static_cast<std::size_t>(c)] != 1.0);
        }
    }
    SUBCASE("single value per channel in train mode is an error") {
        BatchNormParams p = params;
        const std::vector<double> x(1, 1.0);
        CHECK_THROWS_AS(batchnorm_forward(x, 1, 1, 1, p, true, nullptr), NumericError);
    }
}

TEST_CASE("forward pass") {
    SUBCASE("zero weights propagate zeros") {
        IronModel m = IronModel::reduced(1);
        for (TensorRef& t : m.trainable_tensors())
            if (t.name.find("bn_scale") == std::string::npos)
                std::fill(t.data->begin(), t.data->end(), 0.0);
        const std::vector<double> input(2 * 729, 0.5);
        const auto out = forward_infer(m, input, 2);
        REQUIRE(out.size() == 12);
        for (double v : out) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("intermediate shapes follow the channel plan") {
        IronModel m = IronModel::standard(7);
        const int batch = 2;
        std::vector<double> input(static_cast<std::size_t>(batch) * 729, 0.1);
        ForwardCache cache;
        const auto out = forward_train(m, input, batch, cache);
        CHECK(out.size() == static_cast<std::size_t>(batch) * 6);
        const int plan_channels[4] = {64, 128, 256, 512};
        const int plan_edges[4] = {7, 5, 3, 1};
        for (int l = 0; l < 4; ++l) {
            const std::size_t spatial = static_cast<std::size_t>(plan_edges[l]) * plan_edges[l] * plan_edges[l];
            CHECK(cache.conv_out[static_cast<std::size_t>(l)].size() ==
                  static_cast<std::size_t>(plan_channels[l]) * batch * spatial);
        }
        CHECK(cache.fc_in[0].size() == static_cast<std::size_t>(batch) * 512);
    }
    SUBCASE("fixed seed and input give bit-identical outputs") {
        IronModel a = IronModel::reduced(42);
        IronModel b = IronModel::reduced(42);
        std::vector<double> input(3 * 729);
        std::mt19937_64 gen(9);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        for (double& v : input) v = d(gen);
        ForwardCache ca, cb;
        CHECK(forward_train(a, input, 3, ca) == forward_train(b, input, 3, cb));
        CHECK(forward_infer(a, input, 3) == forward_infer(b, input, 3));
    }
    SUBCASE("thread count does not change results") {
        IronModel a = IronModel::standard(5);
        IronModel b = IronModel::standard(5);
        std::vector<double> input(4 * 729);
        std::mt19937_64 gen(11);
        std::uniform_real_distribution<double> d(-0.5, 0.5);
        for (double& v : input) v = d(gen);
        ForwardCache ca, cb;
        const auto oa = forward_train(a, input, 4, ca, 1);
        const auto ob = forward_train(b, input, 4, cb, 4);
        CHECK(oa == ob);
        std::vector<double> dout(4 * 6, 0.25);
        ModelGrads ga = ModelGrads::zeros_like(a);
        ModelGrads gb = ModelGrads::zeros_like(b);
        backward(a, ca, dout, ga, 1);
        backward(b, cb, dout, gb, 4);
        CHECK(ga.tensors == gb.tensors);
    }
    SUBCASE("bad input shape is rejected") {
        IronModel m = IronModel::reduced(3);
        CHECK_THROWS_AS(forward_infer(m, std::vector<double>(100, 0.0), 1), ShapeError);
    }
}

TEST_CASE("backward pass") {
    SUBCASE("zero output gradient produces zero parameter gradients") {
        IronModel m = IronModel::reduced(2);
        std::vector<double> input(2 * 729, 0.3);
        ForwardCache cache;
        forward_train(m, input, 2, cache);
        ModelGrads grads = ModelGrads::zeros_like(m);
        backward(m, cache, std::vector<double>(12, 0.0), grads);
        for (const auto& t : grads.tensors)
            for (double v : t) CHECK(v == 0.0);
    }
    SUBCASE("final FC weight gradient is the outer product of output grad and its input") {
        IronModel m = IronModel::reduced(4);
        std::vector<double> input(2 * 729);
        std::mt19937_64 gen(21);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        for (double& v : input) v = d(gen);
        ForwardCache cache;
        forward_train(m, input, 2, cache);
        std::vector<double> dout(12);
        for (double& v : dout) v = d(gen);
        ModelGrads grads = ModelGrads::zeros_like(m);
        backward(m, cache, dout, grads);
        const std::vector<double>& dw = grads.tensors[16 + 6];  // 4 conv blocks x 4, then fc3.weight
        const std::vector<double>& fc_in = cache.fc_in[3];
        const FcLayer& fc = m.fc[3];
        for (int o = 0; o < fc.out_features; ++o)
            for (int i = 0; i < fc.in_features; ++i) {
                double expect = 0.0;
                for (int n = 0; n < 2; ++n)
                    expect += dout[static_cast<std::size_t>(n) * 6 + o] *
                              fc_in[static_cast<std::size_t>(n) * fc.in_features + i];
                CHECK(dw[static_cast<std::size_t>(o) * fc.in_features + i] ==
                      doctest::Approx(expect).epsilon(1e-12));
            }
    }
    SUBCASE("gradients match central finite differences on the reduced network") {
        for (std::uint64_t seed : {1ULL, 2ULL}) {
            const double err = gradcheck::max_gradient_error(seed, 1e-4);
            CHECK(err < 1e-4);
        }
    }
    SUBCASE("stale cache is rejected") {
        IronModel m = IronModel::reduced(6);
        std::vector<double> input(2 * 729, 0.1);
        ForwardCache first, second;
        forward_train(m, input, 2, first);
        forward_train(m, input, 2, second);
        ModelGrads grads = ModelGrads::zeros_like(m);
        CHECK_THROWS_AS(backward(m, first, std::vector<double>(12, 0.0), grads), Error);
        CHECK_NOTHROW(backward(m, second, std::vector<double>(12, 0.0), grads));
    }
}

TEST_CASE("predict_optimum") {
    GridSpec grid;
    SimilarityTensor tensor;
    tensor.grid = grid;
    const int s = grid.nodes_per_axis;
    tensor.values.assign(static_cast<std::size_t>(s) * s * s, 0.1);
    const GridIndex opt{22, 9, 13};
    tensor.at(opt.i, opt.j, opt.k) = 1.0;
    const GridIndex init{15, 15, 15};

    auto stub_model = [](const std::array<double, 3>& out_first3) {
        IronModel m = IronModel::standard(0);
        for (TensorRef& t : m.trainable_tensors())
            if (t.name.find("bn_scale") == std::string::npos)
                std::fill(t.data->begin(), t.data->end(), 0.0);
        // zero activations reach the last FC; its bias becomes the output
        m.fc.back().bias[0] = out_first3[0];
        m.fc.back().bias[1] = out_first3[1];
        m.fc.back().bias[2] = out_first3[2];
        return m;
    };

    SUBCASE("a model emitting the exact label recovers the grid-truth optimum") {
        const auto label = make_label(init, opt, 22.0);
        const IronModel m = stub_model({label[0], label[1], label[2]});
        const Prediction pred = predict_optimum(m, tensor, init, 22.0, {0, 0, 0});
        CHECK(pred.evaluation_count == 1);
        CHECK(pred.params.theta_x == doctest::Approx(grid.value_x(opt.i)).epsilon(1e-9));
        CHECK(pred.params.theta_y == doctest::Approx(grid.value_y(opt.j)).epsilon(1e-9));
        CHECK(pred.params.theta_z == doctest::Approx(grid.value_z(opt.k)).epsilon(1e-9));
    }
    SUBCASE("a zero model returns the initialization unchanged") {
        const IronModel m = stub_model({0, 0, 0});
        const Prediction pred = predict_optimum(m, tensor, init, 22.0, {0, 0, 0});
        CHECK(pred.evaluation_count == 1);
        CHECK(pred.params.theta_x == doctest::Approx(grid.value_x(init.i)));
        CHECK(pred.params.theta_y == doctest::Approx(grid.value_y(init.j)));
        CHECK(pred.params.theta_z == doctest::Approx(grid.value_z(init.k)));
    }
    SUBCASE("inadmissible center is a bounds error") {
        const IronModel m = stub_model({0, 0, 0});
        CHECK_THROWS_AS(predict_optimum(m, tensor, {2, 15, 15}, 22.0, {0, 0, 0}), BoundsError);
    }
    SUBCASE("evaluation count is one for arbitrary models and centers") {
        const IronModel m = IronModel::standard(77);
        for (const GridIndex c : {GridIndex{4, 4, 4}, GridIndex{26, 26, 26}, GridIndex{10, 20, 15}}) {
            const Prediction pred = predict_optimum(m, tensor, c, 22.0, {0, 0, 0});
            CHECK(pred.evaluation_count == 1);
        }
    }
}
