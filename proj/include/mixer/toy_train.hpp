// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mixer/toy_data.hpp"
#include "mixer/toy_model.hpp"

namespace mixer::toy {

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 200;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    ToyModel model;                  // trained adapter + head on the frozen backbone
    AdapterCheckpoint adapter;       // the four adapter tensors only
    AdapterCheckpoint head;          // stored separately, never mixed
    std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Minimizes softmax cross-entropy with mini-batch momentum SGD over adapter
/// and head parameters only; the backbone stays frozen. Deterministic given
/// cfg.seed (which drives both the trainable init and the batch shuffle).
/// Throws Error naming the epoch if the loss turns non-finite.
TrainResult train_adapter(const ToyModel& backbone, const DomainDataset& domain,
                          const TrainConfig& cfg);

/// Accuracy on a split; with `fgsm_eps` each input is perturbed by FGSM
/// against its true label before prediction.
double evaluate(const ToyModel& model, const Split& split,
                std::optional<double> fgsm_eps = std::nullopt);

}  // namespace mixer::toy
