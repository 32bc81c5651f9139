#pragma once

// Single-hidden-layer regression network trained with mini-batch Adam.
// Hidden activation is sigmoid, output is linear; loss is mean squared
// error. Parameters live in one flat vector (w1 | b1 | w2 | b2) so the
// optimizer and the finite-difference tests can treat them uniformly.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rem/core.hpp"

namespace rem {

struct AdamParams {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct MlpParams {
    int hidden_units = 16;
    AdamParams adam;
    int epochs = 200;
    int batch_size = 32;
    std::uint64_t seed = 1;
    VolumeSpec volume;  // extents used to rescale coordinates into [0, 1]
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class MlpNetwork {
public:
    MlpNetwork() = default;
    MlpNetwork(size_t in_dim, size_t hidden)
        : in_dim_(in_dim), hidden_(hidden), params_(in_dim * hidden + 2 * hidden + 1, 0.0) {}

    size_t in_dim() const { return in_dim_; }
    size_t hidden() const { return hidden_; }
    size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    // parameter slices
    size_t w1_off() const { return 0; }                       // in_dim x hidden
    size_t b1_off() const { return in_dim_ * hidden_; }       // hidden
    size_t w2_off() const { return b1_off() + hidden_; }      // hidden
    size_t b2_off() const { return w2_off() + hidden_; }      // 1

    // Glorot uniform for the weight matrices; biases start at zero and
    // the output bias is set separately to the target mean.
    void init_weights(std::mt19937_64& rng) {
        const double lim1 = std::sqrt(6.0 / static_cast<double>(in_dim_ + hidden_));
        const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden_ + 1));
        std::uniform_real_distribution<double> u1(-lim1, lim1), u2(-lim2, lim2);
        double* p = params_.data();
        for (size_t i = 0; i < in_dim_ * hidden_; ++i) p[w1_off() + i] = u1(rng);
        for (size_t h = 0; h < hidden_; ++h) p[b1_off() + h] = 0.0;
        for (size_t h = 0; h < hidden_; ++h) p[w2_off() + h] = u2(rng);
        p[b2_off()] = 0.0;
    }

    double forward(std::span<const double> x) const {
        const double* p = params_.data();
        double y = p[b2_off()];
        for (size_t h = 0; h < hidden_; ++h) {
            double pre = p[b1_off() + h];
            for (size_t i = 0; i < in_dim_; ++i) pre += x[i] * p[w1_off() + i * hidden_ + h];
            y += sigmoid(pre) * p[w2_off() + h];
        }
        return y;
    }

    // Mean squared error over `count` rows stored row-major in `inputs`.
    double batch_loss(const double* inputs, const double* targets, size_t count) const {
        double sum = 0.0;
        for (size_t r = 0; r < count; ++r) {
            const double err = forward({inputs + r * in_dim_, in_dim_}) - targets[r];
            sum += err * err;
        }
        return sum / static_cast<double>(count);
    }

    // Analytic gradient of batch_loss with respect to every parameter.
    void batch_gradient(const double* inputs, const double* targets, size_t count,
                        std::vector<double>& grad) const {
        grad.assign(params_.size(), 0.0);
        const double* p = params_.data();
        std::vector<double> act(hidden_);
        const double inv_count = 1.0 / static_cast<double>(count);
        for (size_t r = 0; r < count; ++r) {
            const double* x = inputs + r * in_dim_;
            double y = p[b2_off()];
            for (size_t h = 0; h < hidden_; ++h) {
                double pre = p[b1_off() + h];
                for (size_t i = 0; i < in_dim_; ++i) pre += x[i] * p[w1_off() + i * hidden_ + h];
                act[h] = sigmoid(pre);
                y += act[h] * p[w2_off() + h];
            }
            const double dy = 2.0 * (y - targets[r]) * inv_count;
            grad[b2_off()] += dy;
            for (size_t h = 0; h < hidden_; ++h) {
                grad[w2_off() + h] += dy * act[h];
                const double dpre = dy * p[w2_off() + h] * act[h] * (1.0 - act[h]);
                grad[b1_off() + h] += dpre;
                for (size_t i = 0; i < in_dim_; ++i)
                    grad[w1_off() + i * hidden_ + h] += dpre * x[i];
            }
        }
    }

private:
    size_t in_dim_ = 0;
    size_t hidden_ = 0;
    std::vector<double> params_;
};

// Bias-corrected Adam over a flat parameter vector.
class AdamOptimizer {
public:
    AdamOptimizer(size_t n, AdamParams p)
        : p_(p), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& weights, const std::vector<double>& grad) {
        ++t_;
        const double bc1 = 1.0 - std::pow(p_.beta1, t_);
        const double bc2 = 1.0 - std::pow(p_.beta2, t_);
        for (size_t i = 0; i < weights.size(); ++i) {
            m_[i] = p_.beta1 * m_[i] + (1.0 - p_.beta1) * grad[i];
            v_[i] = p_.beta2 * v_[i] + (1.0 - p_.beta2) * grad[i] * grad[i];
            const double m_hat = m_[i] / bc1;
            const double v_hat = v_[i] / bc2;
            weights[i] -= p_.learning_rate * m_hat / (std::sqrt(v_hat) + p_.epsilon);
        }
    }

    int steps_taken() const { return t_; }

private:
    AdamParams p_;
    std::vector<double> m_, v_;
    int t_ = 0;
};

struct MlpTrainHistory {
    std::vector<double> epoch_loss;  // full-training-set MSE after each epoch
    size_t best_epoch = 0;
    double best_loss = 0.0;
};

}  // namespace rem
