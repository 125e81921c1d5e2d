#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vne_admit/rng.hpp"

namespace vne_admit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Fully connected network with rectifier hidden layers and a linear output layer.
/// Batches are column-major: one sample per column.
class Mlp {
public:
    struct Layer {
        Matrix weights;  // out x in
        Vector bias;     // out
    };

    /// Activations kept for backward(). `input` points at the caller's batch, which must outlive
    /// the cache.
    struct Cache {
        const Matrix* input = nullptr;
        std::vector<Matrix> hidden;  // rectified output of each hidden layer
        std::vector<Matrix> pre;     // pre-activation of each layer
    };

    Mlp() = default;

    /// He-uniform initialisation; `sizes` = {inputs, hidden..., outputs}.
    Mlp(const std::vector<std::size_t>& sizes, Rng& rng) {
        if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
        for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
            const auto in = static_cast<Eigen::Index>(sizes[k]);
            const auto out = static_cast<Eigen::Index>(sizes[k + 1]);
            if (in == 0 || out == 0) throw std::invalid_argument("Mlp layer sizes must be positive");
            const double bound = std::sqrt(6.0 / static_cast<double>(in));
            Layer layer{Matrix(out, in), Vector::Zero(out)};
            for (Eigen::Index c = 0; c < in; ++c)
                for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = rng.uniform_real(-bound, bound);
            layers_.push_back(std::move(layer));
        }
    }

    explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            if (layers_[k].weights.rows() != layers_[k].bias.size())
                throw std::invalid_argument("Mlp layer bias size mismatch");
            if (k > 0 && layers_[k].weights.cols() != layers_[k - 1].weights.rows())
                throw std::invalid_argument("Mlp layer shapes do not chain");
        }
    }

    std::size_t input_size() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols()); }
    std::size_t output_size() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weights.rows()); }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    Matrix forward(const Matrix& x) const {
        Matrix a;
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            Matrix z = layers_[k].weights * (k == 0 ? x : a);
            z.colwise() += layers_[k].bias;
            if (k + 1 < layers_.size()) z = z.cwiseMax(0.0);
            a = std::move(z);
        }
        return a;
    }

    Matrix forward(const Matrix& x, Cache& cache) const {
        const std::size_t n = layers_.size();
        cache.input = &x;
        cache.pre.resize(n);
        cache.hidden.resize(n - 1);
        for (std::size_t k = 0; k < n; ++k) {
            const Matrix& in = k == 0 ? x : cache.hidden[k - 1];
            cache.pre[k].noalias() = layers_[k].weights * in;
            cache.pre[k].colwise() += layers_[k].bias;
            if (k + 1 < n) cache.hidden[k] = cache.pre[k].cwiseMax(0.0);
        }
        return cache.pre.back();
    }

    /// Parameter gradients given dL/d(output) for the batch cached by forward(). `grads` is
    /// resized as needed so callers can reuse its storage.
    void backward(const Cache& cache, const Matrix& grad_output, std::vector<Layer>& grads) const {
        grads.resize(layers_.size());
        Matrix delta = grad_output;
        for (std::size_t k = layers_.size(); k-- > 0;) {
            if (k + 1 < layers_.size()) delta = delta.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
            const Matrix& in = k == 0 ? *cache.input : cache.hidden[k - 1];
            grads[k].weights.resize(layers_[k].weights.rows(), layers_[k].weights.cols());
            grads[k].weights.noalias() = delta * in.transpose();
            grads[k].bias = delta.rowwise().sum();
            if (k > 0) delta = layers_[k].weights.transpose() * delta;
        }
    }

    std::vector<Layer> backward(const Cache& cache, const Matrix& grad_output) const {
        std::vector<Layer> grads;
        backward(cache, grad_output, grads);
        return grads;
    }

    /// Flat parameter view (layer by layer, weights column-major then bias).
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        for (const auto& l : layers_) {
            out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
            out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
        }
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != parameter_count()) throw std::invalid_argument("Mlp::unflatten: size mismatch");
        std::size_t pos = 0;
        for (auto& l : layers_) {
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.weights.size(), l.weights.data());
            pos += static_cast<std::size_t>(l.weights.size());
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.data());
            pos += static_cast<std::size_t>(l.bias.size());
        }
    }

    static std::vector<double> flatten(const std::vector<Layer>& layers) {
        std::vector<double> out;
        for (const auto& l : layers) {
            out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
            out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
        }
        return out;
    }

    bool operator==(const Mlp& o) const {
        if (layers_.size() != o.layers_.size()) return false;
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            if (layers_[k].weights.rows() != o.layers_[k].weights.rows() ||
                layers_[k].weights.cols() != o.layers_[k].weights.cols())
                return false;
            if (layers_[k].weights != o.layers_[k].weights || layers_[k].bias != o.layers_[k].bias) return false;
        }
        return true;
    }

private:
    std::vector<Layer> layers_;
};

/// Adam with bias correction.
class Adam {
public:
    Adam() = default;
    Adam(const Mlp& net, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
        for (const auto& l : net.layers()) {
            m_.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
            v_.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
        }
    }

    void step(Mlp& net, const std::vector<Mlp::Layer>& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        auto& layers = net.layers();
        for (std::size_t k = 0; k < layers.size(); ++k) {
            update(layers[k].weights, m_[k].weights, v_[k].weights, grads[k].weights, c1, c2);
            update(layers[k].bias, m_[k].bias, v_[k].bias, grads[k].bias, c1, c2);
        }
    }

private:
    template <typename P>
    void update(P& param, P& m, P& v, const P& g, double c1, double c2) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }

    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long long t_ = 0;
    std::vector<Mlp::Layer> m_;
    std::vector<Mlp::Layer> v_;
};

}  // namespace vne_admit
