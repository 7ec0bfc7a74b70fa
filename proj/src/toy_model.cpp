// SPDX-License-Identifier: Apache-2.0
#include "mixer/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <utility>

#include "mixer/error.hpp"
#include "mixer/rng.hpp"

namespace mixer::toy {

namespace {

void fill_normal(std::vector<double>& v, Rng& rng, double scale) {
    for (double& e : v) {
        e = scale * rng.normal();
    }
}

// y += M x  for row-major M [rows x cols]
void matvec_add(const std::vector<double>& m, const double* x, int rows, int cols, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* row = m.data() + static_cast<std::size_t>(r) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) {
            acc += row[c] * x[c];
        }
        y[r] += acc;
    }
}

// y += M^T x  for row-major M [rows x cols]; y has cols entries
void matvec_t_add(const std::vector<double>& m, const double* x, int rows, int cols, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* row = m.data() + static_cast<std::size_t>(r) * cols;
        const double xr = x[r];
        for (int c = 0; c < cols; ++c) {
            y[c] += row[c] * xr;
        }
    }
}

// G += u v^T  for G [rows x cols]
void outer_add(std::vector<double>& g, const double* u, const double* v, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* row = g.data() + static_cast<std::size_t>(r) * cols;
        const double ur = u[r];
        for (int c = 0; c < cols; ++c) {
            row[c] += ur * v[c];
        }
    }
}

std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(v[i]);
    }
    return out;
}

std::vector<double> to_f64(const std::vector<float>& v) {
    return std::vector<double>(v.begin(), v.end());
}

const Tensor& need_tensor(const AdapterCheckpoint& ckpt, const std::string& name,
                          std::vector<std::uint64_t> shape) {
    const auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) {
        throw Error("checkpoint is missing tensor '" + name + "'");
    }
    if (it->second.shape != shape) {
        throw Error("tensor '" + name + "': unexpected shape");
    }
    return it->second;
}

}  // namespace

ToyModel ToyModel::make(int input_dim, int num_classes, std::uint64_t backbone_seed,
                        std::uint64_t trainable_seed) {
    ToyModel m;
    m.input_dim = input_dim;
    m.num_classes = num_classes;
    m.init_backbone(backbone_seed);
    m.init_trainable(trainable_seed);
    return m;
}

void ToyModel::init_backbone(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xb0));
    w1.assign(static_cast<std::size_t>(hidden_dim) * input_dim, 0.0);
    b1.assign(hidden_dim, 0.0);
    const double ws = getenv("CAL_W1") ? atof(getenv("CAL_W1")) : 3.0;
    const double bs = getenv("CAL_B1") ? atof(getenv("CAL_B1")) : 0.5;
    fill_normal(w1, rng, ws / std::sqrt(static_cast<double>(input_dim)));
    fill_normal(b1, rng, bs);
}

void ToyModel::init_trainable(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xad));
    down_w.assign(static_cast<std::size_t>(bottleneck_dim) * hidden_dim, 0.0);
    down_b.assign(bottleneck_dim, 0.0);
    up_w.assign(static_cast<std::size_t>(hidden_dim) * bottleneck_dim, 0.0);
    up_b.assign(hidden_dim, 0.0);
    head_w.assign(static_cast<std::size_t>(num_classes) * hidden_dim, 0.0);
    head_b.assign(num_classes, 0.0);
    const double ds = getenv("CAL_DW") ? atof(getenv("CAL_DW")) : 0.1;
    const double us = getenv("CAL_UW") ? atof(getenv("CAL_UW")) : 0.02;
    fill_normal(down_w, rng, ds);
    fill_normal(up_w, rng, us);
    fill_normal(head_w, rng, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
}

void ToyModel::zero_adapter() {
    std::fill(down_w.begin(), down_w.end(), 0.0);
    std::fill(down_b.begin(), down_b.end(), 0.0);
    std::fill(up_w.begin(), up_w.end(), 0.0);
    std::fill(up_b.begin(), up_b.end(), 0.0);
}

void forward(const ToyModel& model, const double* x, ForwardCache& cache) {
    cache.h.assign(model.hidden_dim, 0.0);
    cache.zd.assign(model.bottleneck_dim, 0.0);
    cache.a.assign(model.bottleneck_dim, 0.0);
    cache.hp.assign(model.hidden_dim, 0.0);
    cache.logits.assign(model.num_classes, 0.0);
    cache.probs.assign(model.num_classes, 0.0);

    // h = tanh(W1 x + b1)
    for (int i = 0; i < model.hidden_dim; ++i) {
        cache.h[i] = model.b1[i];
    }
    matvec_add(model.w1, x, model.hidden_dim, model.input_dim, cache.h.data());
    for (double& v : cache.h) {
        v = std::tanh(v);
    }

    // adapter bottleneck
    for (int i = 0; i < model.bottleneck_dim; ++i) {
        cache.zd[i] = model.down_b[i];
    }
    matvec_add(model.down_w, cache.h.data(), model.bottleneck_dim, model.hidden_dim,
               cache.zd.data());
    for (int i = 0; i < model.bottleneck_dim; ++i) {
        cache.a[i] = cache.zd[i] > 0.0 ? cache.zd[i] : 0.0;
    }

    // residual: h' = h + U a + bU
    for (int i = 0; i < model.hidden_dim; ++i) {
        cache.hp[i] = cache.h[i] + model.up_b[i];
    }
    matvec_add(model.up_w, cache.a.data(), model.hidden_dim, model.bottleneck_dim,
               cache.hp.data());

    // logits
    for (int c = 0; c < model.num_classes; ++c) {
        cache.logits[c] = model.head_b[c];
    }
    matvec_add(model.head_w, cache.hp.data(), model.num_classes, model.hidden_dim,
               cache.logits.data());

    // softmax (stable)
    const double mx = *std::max_element(cache.logits.begin(), cache.logits.end());
    double z = 0.0;
    for (int c = 0; c < model.num_classes; ++c) {
        cache.probs[c] = std::exp(cache.logits[c] - mx);
        z += cache.probs[c];
    }
    for (double& p : cache.probs) {
        p /= z;
    }
}

int predict(const ToyModel& model, const double* x) {
    ForwardCache cache;
    forward(model, x, cache);
    int best = 0;
    for (int c = 1; c < model.num_classes; ++c) {
        if (cache.logits[c] > cache.logits[best]) {
            best = c;
        }
    }
    return best;
}

double loss_from_cache(const ForwardCache& cache, int label, LossKind kind) {
    if (kind == LossKind::SoftmaxCrossEntropy) {
        return -std::log(std::max(cache.probs[label], 1e-300));
    }
    double loss = 0.0;
    for (std::size_t c = 0; c < cache.logits.size(); ++c) {
        const double d = cache.logits[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
        loss += 0.5 * d * d;
    }
    return loss;
}

void Gradients::resize_for(const ToyModel& model) {
    down_w.assign(model.down_w.size(), 0.0);
    down_b.assign(model.down_b.size(), 0.0);
    up_w.assign(model.up_w.size(), 0.0);
    up_b.assign(model.up_b.size(), 0.0);
    head_w.assign(model.head_w.size(), 0.0);
    head_b.assign(model.head_b.size(), 0.0);
    x.assign(model.input_dim, 0.0);
}

void Gradients::zero() {
    auto clear = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
    clear(down_w);
    clear(down_b);
    clear(up_w);
    clear(up_b);
    clear(head_w);
    clear(head_b);
    clear(x);
}

double backward(const ToyModel& model, const double* x, int label, LossKind kind,
                ForwardCache& cache, Gradients& grads, bool want_input_grad) {
    forward(model, x, cache);
    const double loss = loss_from_cache(cache, label, kind);

    std::vector<double> dlogits(model.num_classes);
    for (int c = 0; c < model.num_classes; ++c) {
        const double target = c == label ? 1.0 : 0.0;
        dlogits[c] = kind == LossKind::SoftmaxCrossEntropy ? cache.probs[c] - target
                                                           : cache.logits[c] - target;
    }

    outer_add(grads.head_w, dlogits.data(), cache.hp.data(), model.num_classes, model.hidden_dim);
    for (int c = 0; c < model.num_classes; ++c) {
        grads.head_b[c] += dlogits[c];
    }

    std::vector<double> dhp(model.hidden_dim, 0.0);
    matvec_t_add(model.head_w, dlogits.data(), model.num_classes, model.hidden_dim, dhp.data());

    outer_add(grads.up_w, dhp.data(), cache.a.data(), model.hidden_dim, model.bottleneck_dim);
    for (int i = 0; i < model.hidden_dim; ++i) {
        grads.up_b[i] += dhp[i];
    }

    std::vector<double> dzd(model.bottleneck_dim, 0.0);
    matvec_t_add(model.up_w, dhp.data(), model.hidden_dim, model.bottleneck_dim, dzd.data());
    for (int i = 0; i < model.bottleneck_dim; ++i) {
        dzd[i] = cache.zd[i] > 0.0 ? dzd[i] : 0.0;  // relu'(0) taken as 0
    }

    outer_add(grads.down_w, dzd.data(), cache.h.data(), model.bottleneck_dim, model.hidden_dim);
    for (int i = 0; i < model.bottleneck_dim; ++i) {
        grads.down_b[i] += dzd[i];
    }

    if (want_input_grad) {
        // residual path: h feeds h' directly and through the adapter
        std::vector<double> dh = dhp;
        matvec_t_add(model.down_w, dzd.data(), model.bottleneck_dim, model.hidden_dim, dh.data());
        std::vector<double> dz1(model.hidden_dim);
        for (int i = 0; i < model.hidden_dim; ++i) {
            dz1[i] = dh[i] * (1.0 - cache.h[i] * cache.h[i]);
        }
        matvec_t_add(model.w1, dz1.data(), model.hidden_dim, model.input_dim, grads.x.data());
    }
    return loss;
}

namespace {

double loss_at(const ToyModel& model, const double* x, int label, LossKind kind) {
    ForwardCache cache;
    forward(model, x, cache);
    return loss_from_cache(cache, label, kind);
}

double fd_error(double analytic, const std::function<double(double)>& eval, double at) {
    const double h = 1e-4;
    const double fd = (eval(at + h) - eval(at - h)) / (2.0 * h);
    return std::fabs(analytic - fd) / std::max({1.0, std::fabs(analytic), std::fabs(fd)});
}

}  // namespace

double grad_check(const ToyModel& model, const double* x, int label, LossKind kind,
                  bool include_input) {
    ForwardCache cache;
    Gradients grads;
    grads.resize_for(model);
    backward(model, x, label, kind, cache, grads, include_input);

    ToyModel probe = model;
    std::vector<double> input(x, x + model.input_dim);
    double worst = 0.0;

    const std::pair<std::vector<double>*, std::vector<double>*> params[] = {
        {&probe.down_w, &grads.down_w}, {&probe.down_b, &grads.down_b},
        {&probe.up_w, &grads.up_w},     {&probe.up_b, &grads.up_b},
        {&probe.head_w, &grads.head_w}, {&probe.head_b, &grads.head_b},
    };
    for (const auto& [values, grad] : params) {
        for (std::size_t i = 0; i < values->size(); ++i) {
            const double saved = (*values)[i];
            const double err = fd_error(
                (*grad)[i],
                [&](double v) {
                    (*values)[i] = v;
                    const double loss = loss_at(probe, input.data(), label, kind);
                    (*values)[i] = saved;
                    return loss;
                },
                saved);
            worst = std::max(worst, err);
        }
    }
    if (include_input) {
        for (int i = 0; i < model.input_dim; ++i) {
            const double saved = input[i];
            const double err = fd_error(
                grads.x[i],
                [&](double v) {
                    input[i] = v;
                    const double loss = loss_at(model, input.data(), label, kind);
                    input[i] = saved;
                    return loss;
                },
                saved);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

std::vector<double> fgsm_perturb(const ToyModel& model, const double* x, int label, double eps) {
    if (eps < 0.0) {
        throw Error("fgsm: epsilon must be >= 0");
    }
    ForwardCache cache;
    Gradients grads;
    grads.resize_for(model);
    backward(model, x, label, LossKind::SoftmaxCrossEntropy, cache, grads, true);

    std::vector<double> out(x, x + model.input_dim);
    for (int i = 0; i < model.input_dim; ++i) {
        const double g = grads.x[i];
        if (!std::isfinite(g)) {
            throw Error("fgsm: non-finite input gradient");
        }
        const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
        out[i] += eps * sign;
    }
    return out;
}

AdapterCheckpoint adapter_checkpoint(const ToyModel& model, const std::string& name) {
    AdapterCheckpoint ckpt;
    const auto bd = static_cast<std::uint64_t>(model.bottleneck_dim);
    const auto hd = static_cast<std::uint64_t>(model.hidden_dim);
    ckpt.tensors.emplace("adapter.down.weight", Tensor({bd, hd}, to_f32(model.down_w)));
    ckpt.tensors.emplace("adapter.down.bias", Tensor({bd}, to_f32(model.down_b)));
    ckpt.tensors.emplace("adapter.up.weight", Tensor({hd, bd}, to_f32(model.up_w)));
    ckpt.tensors.emplace("adapter.up.bias", Tensor({hd}, to_f32(model.up_b)));
    if (!name.empty()) {
        ckpt.metadata["name"] = name;
    }
    return ckpt;
}

AdapterCheckpoint head_checkpoint(const ToyModel& model, const std::string& name) {
    AdapterCheckpoint ckpt;
    const auto cd = static_cast<std::uint64_t>(model.num_classes);
    const auto hd = static_cast<std::uint64_t>(model.hidden_dim);
    ckpt.tensors.emplace("head.weight", Tensor({cd, hd}, to_f32(model.head_w)));
    ckpt.tensors.emplace("head.bias", Tensor({cd}, to_f32(model.head_b)));
    if (!name.empty()) {
        ckpt.metadata["name"] = name;
    }
    return ckpt;
}

AdapterCheckpoint backbone_checkpoint(const ToyModel& model, const std::string& name) {
    AdapterCheckpoint ckpt;
    const auto hd = static_cast<std::uint64_t>(model.hidden_dim);
    const auto id = static_cast<std::uint64_t>(model.input_dim);
    ckpt.tensors.emplace("backbone.weight", Tensor({hd, id}, to_f32(model.w1)));
    ckpt.tensors.emplace("backbone.bias", Tensor({hd}, to_f32(model.b1)));
    if (!name.empty()) {
        ckpt.metadata["name"] = name;
    }
    return ckpt;
}

void load_adapter(ToyModel& model, const AdapterCheckpoint& ckpt) {
    const auto hd = static_cast<std::uint64_t>(model.hidden_dim);
    const auto it = ckpt.tensors.find("adapter.down.weight");
    if (it == ckpt.tensors.end()) {
        throw Error("checkpoint is missing tensor 'adapter.down.weight'");
    }
    if (it->second.shape.size() != 2 || it->second.shape[1] != hd) {
        throw Error("tensor 'adapter.down.weight': unexpected shape");
    }
    model.bottleneck_dim = static_cast<int>(it->second.shape[0]);
    const auto bd = static_cast<std::uint64_t>(model.bottleneck_dim);
    model.down_w = to_f64(need_tensor(ckpt, "adapter.down.weight", {bd, hd}).data);
    model.down_b = to_f64(need_tensor(ckpt, "adapter.down.bias", {bd}).data);
    model.up_w = to_f64(need_tensor(ckpt, "adapter.up.weight", {hd, bd}).data);
    model.up_b = to_f64(need_tensor(ckpt, "adapter.up.bias", {hd}).data);
}

void load_head(ToyModel& model, const AdapterCheckpoint& ckpt) {
    const auto hd = static_cast<std::uint64_t>(model.hidden_dim);
    const auto it = ckpt.tensors.find("head.weight");
    if (it == ckpt.tensors.end()) {
        throw Error("checkpoint is missing tensor 'head.weight'");
    }
    if (it->second.shape.size() != 2 || it->second.shape[1] != hd) {
        throw Error("tensor 'head.weight': unexpected shape");
    }
    const auto classes = it->second.shape[0];
    model.num_classes = static_cast<int>(classes);
    model.head_w = to_f64(it->second.data);
    model.head_b = to_f64(need_tensor(ckpt, "head.bias", {classes}).data);
}

ToyModel model_from_checkpoints(const AdapterCheckpoint& backbone,
                                const AdapterCheckpoint& adapter,
                                const AdapterCheckpoint& head) {
    ToyModel model;
    const auto it = backbone.tensors.find("backbone.weight");
    if (it == backbone.tensors.end()) {
        throw Error("checkpoint is missing tensor 'backbone.weight'");
    }
    if (it->second.shape.size() != 2) {
        throw Error("tensor 'backbone.weight': unexpected shape");
    }
    model.hidden_dim = static_cast<int>(it->second.shape[0]);
    model.input_dim = static_cast<int>(it->second.shape[1]);
    model.w1 = to_f64(it->second.data);
    model.b1 = to_f64(
        need_tensor(backbone, "backbone.bias", {it->second.shape[0]}).data);
    load_adapter(model, adapter);
    load_head(model, head);
    return model;
}

}  // namespace mixer::toy
