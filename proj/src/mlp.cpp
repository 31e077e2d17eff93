#include "rilab/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rilab::nn {

Layer::Layer(std::size_t in_dim, std::size_t out_dim)
    : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), biases(out_dim, 0.0) {}

Mlp::Mlp(std::vector<std::size_t> sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (std::size_t s : sizes)
        if (s == 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) layers_.emplace_back(sizes[l], sizes[l + 1]);
}

Mlp Mlp::glorot(std::vector<std::size_t> sizes, Rng& rng) {
    Mlp net(std::move(sizes));
    for (Layer& layer : net.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        for (double& w : layer.weights) w = -limit + 2.0 * limit * rng.uniform();
    }
    return net;
}

std::vector<std::size_t> Mlp::sizes() const {
    std::vector<std::size_t> s;
    if (layers_.empty()) return s;
    s.push_back(layers_.front().in);
    for (const Layer& layer : layers_) s.push_back(layer.out);
    return s;
}

namespace {

void affine(const Layer& layer, std::span<const double> x, std::vector<double>& y) {
    y.assign(layer.biases.begin(), layer.biases.end());
    for (std::size_t r = 0; r < layer.out; ++r) {
        const double* row = layer.weights.data() + r * layer.in;
        double acc = 0.0;
        for (std::size_t c = 0; c < layer.in; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

}  // namespace

std::vector<double> Mlp::forward(std::span<const double> input) const {
    if (layers_.empty()) throw std::invalid_argument("Mlp: empty network");
    if (input.size() != input_dim())
        throw std::invalid_argument("Mlp: input has dimension " + std::to_string(input.size()) + ", expected " +
                                    std::to_string(input_dim()));
    std::vector<double> a(input.begin(), input.end());
    std::vector<double> z;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        affine(layers_[l], a, z);
        if (l + 1 < layers_.size())
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        a.swap(z);
    }
    return a;
}

Gradients Mlp::backward(std::span<const double> input, std::span<const double> output_grad) const {
    if (input.size() != input_dim()) throw std::invalid_argument("Mlp::backward: input dimension mismatch");
    if (output_grad.size() != output_dim()) throw std::invalid_argument("Mlp::backward: gradient dimension mismatch");

    // activations[l] is the input to layer l; pre[l] its pre-activation
    const std::size_t n = layers_.size();
    std::vector<std::vector<double>> activations(n + 1), pre(n);
    activations[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < n; ++l) {
        affine(layers_[l], activations[l], pre[l]);
        activations[l + 1] = pre[l];
        if (l + 1 < n)
            for (double& v : activations[l + 1]) v = v > 0.0 ? v : 0.0;
    }

    Gradients grads = zero_gradients(*this);
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (std::size_t l = n; l-- > 0;) {
        const Layer& layer = layers_[l];
        Layer& g = grads[l];
        for (std::size_t r = 0; r < layer.out; ++r) {
            g.biases[r] = delta[r];
            for (std::size_t c = 0; c < layer.in; ++c) g.w(r, c) = delta[r] * activations[l][c];
        }
        if (l == 0) break;
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t r = 0; r < layer.out; ++r)
            for (std::size_t c = 0; c < layer.in; ++c) prev[c] += layer.w(r, c) * delta[r];
        for (std::size_t c = 0; c < layer.in; ++c)
            if (!(pre[l - 1][c] > 0.0)) prev[c] = 0.0;
        delta.swap(prev);
    }
    return grads;
}

void Mlp::apply(const Gradients& grads, double step) {
    if (grads.size() != layers_.size()) throw std::invalid_argument("Mlp::apply: gradient shape mismatch");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Layer& layer = layers_[l];
        const Layer& g = grads[l];
        if (g.in != layer.in || g.out != layer.out) throw std::invalid_argument("Mlp::apply: gradient shape mismatch");
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= step * g.weights[i];
        for (std::size_t i = 0; i < layer.biases.size(); ++i) layer.biases[i] -= step * g.biases[i];
    }
}

std::size_t Mlp::num_parameters() const {
    std::size_t total = 0;
    for (const Layer& layer : layers_) total += layer.weights.size() + layer.biases.size();
    return total;
}

std::vector<double> flatten(const Gradients& grads) {
    std::vector<double> flat;
    for (const Layer& layer : grads) {
        flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
        flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
    }
    return flat;
}

std::vector<double> Mlp::flat_parameters() const { return flatten(layers_); }

void Mlp::set_flat_parameters(std::span<const double> flat) {
    if (flat.size() != num_parameters()) throw std::invalid_argument("Mlp: flat parameter vector has wrong length");
    std::size_t k = 0;
    for (Layer& layer : layers_) {
        for (double& w : layer.weights) w = flat[k++];
        for (double& b : layer.biases) b = flat[k++];
    }
}

bool Mlp::all_finite() const {
    for (const Layer& layer : layers_) {
        for (double w : layer.weights)
            if (!std::isfinite(w)) return false;
        for (double b : layer.biases)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

Gradients zero_gradients(const Mlp& net) {
    Gradients g;
    for (const Layer& layer : net.layers()) g.emplace_back(layer.in, layer.out);
    return g;
}

Adam::Adam(const Mlp& net, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(net.num_parameters(), 0.0), v_(net.num_parameters(), 0.0) {}

void Adam::step(Mlp& net, const Gradients& grads, double learning_rate) {
    const auto g = flatten(grads);
    if (g.size() != m_.size()) throw std::invalid_argument("Adam: gradient shape mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto params = net.flat_parameters();
    for (std::size_t i = 0; i < g.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g[i] * g[i];
        params[i] -= learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
    net.set_flat_parameters(params);
}

void to_json(nlohmann::json& j, const Mlp& net) {
    j = nlohmann::json{{"sizes", net.sizes()}, {"layers", nlohmann::json::array()}};
    for (const Layer& layer : net.layers())
        j["layers"].push_back({{"in", layer.in}, {"out", layer.out}, {"weights", layer.weights}, {"biases", layer.biases}});
}

void from_json(const nlohmann::json& j, Mlp& net) {
    Mlp loaded(j.at("sizes").get<std::vector<std::size_t>>());
    const auto& layers = j.at("layers");
    if (layers.size() != loaded.layers().size()) throw std::invalid_argument("checkpoint: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Layer& layer = loaded.layers()[l];
        auto w = layers[l].at("weights").get<std::vector<double>>();
        auto b = layers[l].at("biases").get<std::vector<double>>();
        if (w.size() != layer.weights.size() || b.size() != layer.biases.size())
            throw std::invalid_argument("checkpoint: parameter shape mismatch in layer " + std::to_string(l));
        layer.weights = std::move(w);
        layer.biases = std::move(b);
    }
    net = std::move(loaded);
}

void save_checkpoint(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    out << nlohmann::json(net).dump() << '\n';
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Mlp load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
    return nlohmann::json::parse(in).get<Mlp>();
}

}  // namespace rilab::nn
