#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rilab/rng.hpp"

namespace rilab::nn {

/// Dense layer y = W x + b with W stored row-major (out x in).
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    Layer() = default;
    Layer(std::size_t in, std::size_t out);

    double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
    double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
    bool operator==(const Layer&) const = default;
};

/// Same shapes as the network's layers.
using Gradients = std::vector<Layer>;

/// Fully connected network, ReLU between layers, identity at the output.
class Mlp {
public:
    Mlp() = default;
    /// All parameters zero. Needs at least an input and an output size.
    explicit Mlp(std::vector<std::size_t> sizes);
    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    static Mlp glorot(std::vector<std::size_t> sizes, Rng& rng);

    std::size_t input_dim() const { return layers_.front().in; }
    std::size_t output_dim() const { return layers_.back().out; }
    std::vector<std::size_t> sizes() const;
    std::span<Layer> layers() { return layers_; }
    std::span<const Layer> layers() const { return layers_; }

    /// Throws std::invalid_argument on a dimension mismatch.
    std::vector<double> forward(std::span<const double> input) const;
    /// Gradient of <output_grad, forward(input)> w.r.t. every parameter.
    /// The ReLU derivative at zero is taken as zero.
    Gradients backward(std::span<const double> input, std::span<const double> output_grad) const;

    /// params <- params - step * grads
    void apply(const Gradients& grads, double step);

    std::size_t num_parameters() const;
    /// Layer by layer, weights then biases.
    std::vector<double> flat_parameters() const;
    void set_flat_parameters(std::span<const double> flat);
    bool all_finite() const;

    bool operator==(const Mlp&) const = default;

private:
    std::vector<Layer> layers_;
};

Gradients zero_gradients(const Mlp& net);
std::vector<double> flatten(const Gradients& grads);

/// Adam with bias correction; moment buffers shaped like the network.
class Adam {
public:
    explicit Adam(const Mlp& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Mlp& net, const Gradients& grads, double learning_rate);
    std::size_t steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

void to_json(nlohmann::json& j, const Mlp& net);
void from_json(const nlohmann::json& j, Mlp& net);
void save_checkpoint(const Mlp& net, const std::string& path);
Mlp load_checkpoint(const std::string& path);

}  // namespace rilab::nn
