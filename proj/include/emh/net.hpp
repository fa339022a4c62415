#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emh/features.hpp"
#include "emh/matrix.hpp"

namespace emh {
namespace net {

// Fixed architecture: input -> 30 ReLU -> 15 ReLU -> 5 ReLU -> 1 sigmoid,
// batch normalization on each hidden pre-activation.
inline constexpr std::size_t kHidden[3] = {30, 15, 5};
inline constexpr std::size_t kLayers = 4;

struct Layer {
    Matrix weight;            // out x in
    std::vector<double> bias; // out
    // batch-norm parameters; empty on the output layer
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

struct NetworkParams {
    std::vector<Layer> layers; // size kLayers
    std::size_t input_dim = 0;
};

struct TrainConfig {
    int epochs = 300;
    std::size_t batch_size = 20;
    double learning_rate = 0.00005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7; // ADAM denominator
    bool shuffle_each_epoch = true;
    std::uint64_t seed = 0;
};

inline constexpr double kBnEpsilon = 1e-3;
inline constexpr double kBnMomentum = 0.99;
inline constexpr double kLossClamp = 1e-7;

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

// Everything the backward pass needs from one forward evaluation.
struct LayerTrace {
    Matrix input;        // a^(n-1)
    Matrix z;            // affine output
    Matrix xhat;         // normalized z (hidden layers)
    std::vector<double> batch_mean;
    std::vector<double> batch_var;
    Matrix activation;   // post-activation output
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    std::vector<double> probabilities;
};

enum class Mode { train, infer };

// Glorot-style uniform init on +-sqrt(6/(fan_in+fan_out)); zero biases,
// gamma 1, beta 0, running mean 0 / var 1. Deterministic per seed.
NetworkParams init_network(std::size_t input_dim, std::uint64_t seed);

std::vector<double> relu(const std::vector<double>& z);
std::vector<double> sigmoid(const std::vector<double>& z);

// In train mode hidden layers normalize with batch statistics and update
// the running estimates; in infer mode the running estimates are used and
// nothing mutates.
ForwardTrace forward(NetworkParams& params, const Matrix& batch, Mode mode);

// mean binary cross-entropy, probabilities clamped to
// [kLossClamp, 1 - kLossClamp] before the logs
double bce_loss(const std::vector<double>& p, const std::vector<int>& y);

struct Gradients {
    std::vector<Layer> layers; // same shapes as NetworkParams
};

// Analytic gradients of the mean BCE loss w.r.t. every weight, bias, gamma
// and beta, including the batch-statistics pathway of batch norm. The trace
// must come from a train-mode forward on the same parameters.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const std::vector<int>& y);

struct AdamState {
    std::vector<Layer> m;
    std::vector<Layer> v;
};

AdamState make_adam_state(const NetworkParams& params);

// standard bias-corrected ADAM update, t is the 1-based step index
void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state,
               long t, const TrainConfig& config);

// Full-batch mini-batch training, no early stopping. Per-epoch training
// metrics are batch-weighted running averages (as logged during the epoch);
// validation is an infer-mode pass.
TrainHistory train(NetworkParams& params, const Dataset& train_set,
                   const Dataset& val_set, const TrainConfig& config);

std::vector<double> predict_proba(const NetworkParams& params,
                                  const Matrix& features);

// threshold at 0.5; a tie maps to 1
std::vector<int> predict_signal(const std::vector<double>& p);

struct GradCheckReport {
    int instances = 0;
    long checked = 0;
    long failed = 0;
    double worst_rel = 0.0;
    bool passed() const { return instances > 0 && failed == 0; }
};

// Finite-difference oracle: central differences (h = 1e-5) on random
// (params, batch) instances spanning the given dimension and batch ranges.
// A partial passes when the relative error is <= 1e-4 or the absolute
// error is <= 1e-7.
GradCheckReport gradcheck(int instances, std::uint64_t seed,
                          std::size_t min_dim = 1, std::size_t max_dim = 6,
                          std::size_t min_batch = 2,
                          std::size_t max_batch = 16);

} // namespace net
} // namespace emh
