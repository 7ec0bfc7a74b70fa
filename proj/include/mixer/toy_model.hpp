// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mixer/checkpoint.hpp"

namespace mixer::toy {

inline constexpr int kHiddenDim = 32;
inline constexpr int kBottleneckDim = 8;

/// Frozen random backbone + bottleneck adapter + linear head:
///   h      = tanh(W1 x + b1)
///   h'     = h + U relu(D h + bD) + bU
///   logits = Wh h' + bh
/// All math runs in double; checkpoints are float32.
struct ToyModel {
    int input_dim = 16;
    int num_classes = 2;
    int hidden_dim = kHiddenDim;
    int bottleneck_dim = kBottleneckDim;

    // row-major [rows x cols]
    std::vector<double> w1, b1;          // backbone  [hidden x input], [hidden]
    std::vector<double> down_w, down_b;  // adapter   [bottleneck x hidden], [bottleneck]
    std::vector<double> up_w, up_b;      // adapter   [hidden x bottleneck], [hidden]
    std::vector<double> head_w, head_b;  // head      [classes x hidden], [classes]

    static ToyModel make(int input_dim, int num_classes, std::uint64_t backbone_seed,
                         std::uint64_t trainable_seed);

    /// Backbone weights are frozen after this; identical seed, identical bytes.
    void init_backbone(std::uint64_t seed);
    /// Adapter + head initialization (small adapter so the residual path
    /// starts close to the identity).
    void init_trainable(std::uint64_t seed);
    void zero_adapter();
};

struct ForwardCache {
    std::vector<double> h, zd, a, hp, logits, probs;
};

enum class LossKind {
    SoftmaxCrossEntropy,  // training loss
    SquaredError          // 0.5*||logits - onehot||^2; quadratic, used by gradient checks
};

void forward(const ToyModel& model, const double* x, ForwardCache& cache);

/// Argmax prediction; ties resolve to the lowest class index.
int predict(const ToyModel& model, const double* x);

double loss_from_cache(const ForwardCache& cache, int label, LossKind kind);

struct Gradients {
    std::vector<double> down_w, down_b, up_w, up_b, head_w, head_b, x;

    void resize_for(const ToyModel& model);
    void zero();
};

/// Runs forward + backward for one sample, *adding* parameter gradients into
/// `grads` (callers zero them per batch). Returns the loss. The input
/// gradient is only computed when `want_input_grad` is set.
double backward(const ToyModel& model, const double* x, int label, LossKind kind,
                ForwardCache& cache, Gradients& grads, bool want_input_grad);

/// Max relative error between analytic gradients and central finite
/// differences (step 1e-4) over every adapter/head parameter and, optionally,
/// the input coordinates. Relative error uses max(1, |a|, |b|) in the
/// denominator so near-zero gradients compare absolutely.
double grad_check(const ToyModel& model, const double* x, int label, LossKind kind,
                  bool include_input = true);

/// FGSM: x' = x + eps * sign(dL/dx), sign(0) = 0. Throws on a non-finite
/// gradient.
std::vector<double> fgsm_perturb(const ToyModel& model, const double* x, int label, double eps);

/// Adapter tensors are exactly {adapter.down.weight, adapter.down.bias,
/// adapter.up.weight, adapter.up.bias}; heads and backbones live in their
/// own checkpoints and are never mixed.
AdapterCheckpoint adapter_checkpoint(const ToyModel& model, const std::string& name = "");
AdapterCheckpoint head_checkpoint(const ToyModel& model, const std::string& name = "");
AdapterCheckpoint backbone_checkpoint(const ToyModel& model, const std::string& name = "");

void load_adapter(ToyModel& model, const AdapterCheckpoint& ckpt);
void load_head(ToyModel& model, const AdapterCheckpoint& ckpt);

/// Rebuilds a full model from the three checkpoint files.
ToyModel model_from_checkpoints(const AdapterCheckpoint& backbone,
                                const AdapterCheckpoint& adapter,
                                const AdapterCheckpoint& head);

}  // namespace mixer::toy
