// SPDX-License-Identifier: Apache-2.0
#include "mixer/toy_train.hpp"

#include <cmath>
#include <numeric>

#include "mixer/error.hpp"
#include "mixer/rng.hpp"

namespace mixer::toy {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) {
        throw Error("train config: learning_rate must be >= 0");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw Error("train config: momentum must be in [0, 1)");
    }
    if (epochs < 0 || batch_size < 1) {
        throw Error("train config: epochs must be >= 0 and batch_size >= 1");
    }
}

namespace {

struct Velocity {
    std::vector<double> down_w, down_b, up_w, up_b, head_w, head_b;

    explicit Velocity(const ToyModel& m)
        : down_w(m.down_w.size(), 0.0),
          down_b(m.down_b.size(), 0.0),
          up_w(m.up_w.size(), 0.0),
          up_b(m.up_b.size(), 0.0),
          head_w(m.head_w.size(), 0.0),
          head_b(m.head_b.size(), 0.0) {}
};

void sgd_step(std::vector<double>& param, std::vector<double>& velocity,
              const std::vector<double>& grad, double lr, double mu, double inv_batch) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = mu * velocity[i] + grad[i] * inv_batch;
        param[i] -= lr * velocity[i];
    }
}

}  // namespace

TrainResult train_adapter(const ToyModel& backbone, const DomainDataset& domain,
                          const TrainConfig& cfg) {
    cfg.validate();

    TrainResult result;
    result.model = backbone;
    result.model.num_classes = domain.spec.num_classes;
    result.model.input_dim = domain.spec.input_dim;
    if (static_cast<int>(backbone.w1.size()) !=
        backbone.hidden_dim * domain.spec.input_dim) {
        throw Error("train_adapter: backbone input width does not match the domain");
    }
    result.model.init_trainable(cfg.seed);

    ToyModel& model = result.model;
    Velocity vel(model);
    ForwardCache cache;
    Gradients grads;
    grads.resize_for(model);

    const Split& train = domain.train;
    std::vector<int> order(train.n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5f));

    result.epoch_loss.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int start = 0; start < train.n; start += cfg.batch_size) {
            const int end = std::min(train.n, start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            grads.zero();
            for (int b = start; b < end; ++b) {
                const int i = order[b];
                epoch_loss += backward(model, train.row(i), train.y[i],
                                       LossKind::SoftmaxCrossEntropy, cache, grads, false);
            }
            sgd_step(model.down_w, vel.down_w, grads.down_w, cfg.learning_rate, cfg.momentum,
                     inv_batch);
            sgd_step(model.down_b, vel.down_b, grads.down_b, cfg.learning_rate, cfg.momentum,
                     inv_batch);
            sgd_step(model.up_w, vel.up_w, grads.up_w, cfg.learning_rate, cfg.momentum,
                     inv_batch);
            sgd_step(model.up_b, vel.up_b, grads.up_b, cfg.learning_rate, cfg.momentum,
                     inv_batch);
            sgd_step(model.head_w, vel.head_w, grads.head_w, cfg.learning_rate, cfg.momentum,
                     inv_batch);
            sgd_step(model.head_b, vel.head_b, grads.head_b, cfg.learning_rate, cfg.momentum,
                     inv_batch);
        }
        epoch_loss /= static_cast<double>(train.n);
        if (!std::isfinite(epoch_loss)) {
            throw Error("training diverged at epoch " + std::to_string(epoch) +
                        " (non-finite loss)");
        }
        result.epoch_loss.push_back(epoch_loss);
    }

    result.adapter = adapter_checkpoint(model, domain.spec.id);
    result.head = head_checkpoint(model, domain.spec.id);
    return result;
}

double evaluate(const ToyModel& model, const Split& split, std::optional<double> fgsm_eps) {
    if (split.dim != model.input_dim) {
        throw Error("evaluate: input width mismatch");
    }
    if (split.n == 0) {
        throw Error("evaluate: empty split");
    }
    int correct = 0;
    for (int i = 0; i < split.n; ++i) {
        int predicted;
        if (fgsm_eps) {
            const std::vector<double> adv = fgsm_perturb(model, split.row(i), split.y[i],
                                                         *fgsm_eps);
            predicted = predict(model, adv.data());
        } else {
            predicted = predict(model, split.row(i));
        }
        correct += predicted == split.y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(split.n);
}

}  // namespace mixer::toy
