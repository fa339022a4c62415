#include "emh/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "emh/errors.hpp"
#include "emh/rng.hpp"

namespace emh {
namespace net {

namespace {

std::vector<std::size_t> layer_dims(std::size_t input_dim) {
    return {input_dim, kHidden[0], kHidden[1], kHidden[2], 1};
}

// Z = A * W^T + b   (m x out)
Matrix affine(const Matrix& a, const Matrix& w, const std::vector<double>& b) {
    const std::size_t m = a.rows(), in = a.cols(), out = w.rows();
    if (w.cols() != in)
        throw ShapeError("affine: weight expects " + std::to_string(w.cols()) +
                         " inputs, batch has " + std::to_string(in));
    Matrix z(m, out);
    for (std::size_t i = 0; i < m; ++i) {
        const auto arow = a.row(i);
        for (std::size_t j = 0; j < out; ++j) {
            const auto wrow = w.row(j);
            double acc = b[j];
            for (std::size_t k = 0; k < in; ++k)
                acc += arow[k] * wrow[k];
            z(i, j) = acc;
        }
    }
    return z;
}

double stable_sigmoid(double z) {
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return std::clamp(p, lo, hi);
}

struct BnUpdate {
    std::vector<double> mean;
    std::vector<double> var;
};

ForwardTrace forward_impl(const NetworkParams& params, const Matrix& batch,
                          Mode mode, std::vector<BnUpdate>* updates) {
    if (batch.cols() != params.input_dim)
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                         " features, network expects " +
                         std::to_string(params.input_dim));
    if (mode == Mode::train && batch.rows() < 2)
        throw ValidationError("forward: train mode needs a batch of >= 2 rows");

    ForwardTrace trace;
    trace.layers.resize(kLayers);
    Matrix act = batch;
    const std::size_t m = batch.rows();

    for (std::size_t n = 0; n < kLayers; ++n) {
        const Layer& layer = params.layers[n];
        LayerTrace& lt = trace.layers[n];
        lt.input = act;
        lt.z = affine(act, layer.weight, layer.bias);
        const std::size_t out = layer.weight.rows();

        if (n + 1 < kLayers) {
            // hidden layer: batch norm on the pre-activation, then ReLU
            lt.batch_mean.assign(out, 0.0);
            lt.batch_var.assign(out, 0.0);
            if (mode == Mode::train) {
                for (std::size_t j = 0; j < out; ++j) {
                    double mu = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                        mu += lt.z(i, j);
                    mu /= static_cast<double>(m);
                    double var = 0.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        const double d = lt.z(i, j) - mu;
                        var += d * d;
                    }
                    var /= static_cast<double>(m);
                    lt.batch_mean[j] = mu;
                    lt.batch_var[j] = var;
                }
                if (updates)
                    (*updates)[n] = {lt.batch_mean, lt.batch_var};
            } else {
                lt.batch_mean = layer.running_mean;
                lt.batch_var = layer.running_var;
            }

            lt.xhat = Matrix(m, out);
            act = Matrix(m, out);
            for (std::size_t j = 0; j < out; ++j) {
                const double inv =
                    1.0 / std::sqrt(lt.batch_var[j] + kBnEpsilon);
                for (std::size_t i = 0; i < m; ++i) {
                    const double xh = (lt.z(i, j) - lt.batch_mean[j]) * inv;
                    lt.xhat(i, j) = xh;
                    const double y = layer.gamma[j] * xh + layer.beta[j];
                    act(i, j) = y > 0.0 ? y : 0.0;
                }
            }
        } else {
            act = Matrix(m, 1);
            for (std::size_t i = 0; i < m; ++i)
                act(i, 0) = stable_sigmoid(lt.z(i, 0));
        }
        lt.activation = act;
    }

    trace.probabilities.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        trace.probabilities[i] = act(i, 0);
    return trace;
}

void apply_running_updates(NetworkParams& params,
                           const std::vector<BnUpdate>& updates) {
    for (std::size_t n = 0; n + 1 < kLayers; ++n) {
        Layer& layer = params.layers[n];
        for (std::size_t j = 0; j < layer.running_mean.size(); ++j) {
            layer.running_mean[j] = kBnMomentum * layer.running_mean[j] +
                                    (1.0 - kBnMomentum) * updates[n].mean[j];
            layer.running_var[j] = kBnMomentum * layer.running_var[j] +
                                   (1.0 - kBnMomentum) * updates[n].var[j];
        }
    }
}

Layer zeros_like(const Layer& src) {
    Layer g;
    g.weight = Matrix(src.weight.rows(), src.weight.cols());
    g.bias.assign(src.bias.size(), 0.0);
    g.gamma.assign(src.gamma.size(), 0.0);
    g.beta.assign(src.beta.size(), 0.0);
    return g;
}

double accuracy_of(const std::vector<double>& p, const std::vector<int>& y) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        hit += (p[i] >= 0.5 ? 1 : 0) == y[i];
    return static_cast<double>(hit) / static_cast<double>(p.size());
}

Matrix dataset_matrix(const Dataset& d) { return d.features; }

} // namespace

NetworkParams init_network(std::size_t input_dim, std::uint64_t seed) {
    if (input_dim < 1)
        throw ValidationError("init_network: input_dim must be >= 1");
    const auto dims = layer_dims(input_dim);
    Rng rng(seed);
    NetworkParams params;
    params.input_dim = input_dim;
    params.layers.resize(kLayers);
    for (std::size_t n = 0; n < kLayers; ++n) {
        const std::size_t fan_in = dims[n], fan_out = dims[n + 1];
        Layer& layer = params.layers[n];
        layer.weight = Matrix(fan_out, fan_in);
        const double bound =
            std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t j = 0; j < fan_out; ++j)
            for (std::size_t k = 0; k < fan_in; ++k)
                layer.weight(j, k) = rng.uniform(-bound, bound);
        layer.bias.assign(fan_out, 0.0);
        if (n + 1 < kLayers) {
            layer.gamma.assign(fan_out, 1.0);
            layer.beta.assign(fan_out, 0.0);
            layer.running_mean.assign(fan_out, 0.0);
            layer.running_var.assign(fan_out, 1.0);
        }
    }
    return params;
}

std::vector<double> relu(const std::vector<double>& z) {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = z[i] > 0.0 ? z[i] : 0.0;
    return out;
}

std::vector<double> sigmoid(const std::vector<double>& z) {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = stable_sigmoid(z[i]);
    return out;
}

ForwardTrace forward(NetworkParams& params, const Matrix& batch, Mode mode) {
    if (mode == Mode::infer)
        return forward_impl(params, batch, mode, nullptr);
    std::vector<BnUpdate> updates(kLayers);
    ForwardTrace trace = forward_impl(params, batch, mode, &updates);
    apply_running_updates(params, updates);
    return trace;
}

double bce_loss(const std::vector<double>& p, const std::vector<int>& y) {
    if (p.size() != y.size())
        throw ShapeError("bce_loss: " + std::to_string(p.size()) +
                         " probabilities vs " + std::to_string(y.size()) +
                         " labels");
    if (p.empty())
        throw ShapeError("bce_loss: empty input");
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(p[i], kLossClamp, 1.0 - kLossClamp);
        loss -= y[i] == 1 ? std::log(pc) : std::log(1.0 - pc);
    }
    return loss / static_cast<double>(p.size());
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const std::vector<int>& y) {
    const std::size_t m = trace.probabilities.size();
    if (y.size() != m)
        throw ShapeError("backward: label count mismatch");

    Gradients grads;
    grads.layers.reserve(kLayers);
    for (const auto& layer : params.layers)
        grads.layers.push_back(zeros_like(layer));

    // fused sigmoid + BCE: dL/dz_out = (p - y) / m
    Matrix dz(m, 1);
    for (std::size_t i = 0; i < m; ++i)
        dz(i, 0) = (trace.probabilities[i] - static_cast<double>(y[i])) /
                   static_cast<double>(m);

    for (std::size_t n = kLayers; n-- > 0;) {
        const Layer& layer = params.layers[n];
        const LayerTrace& lt = trace.layers[n];
        Layer& g = grads.layers[n];
        const std::size_t out = layer.weight.rows();
        const std::size_t in = layer.weight.cols();

        // dW = dZ^T * input, db = column sums of dZ
        for (std::size_t j = 0; j < out; ++j) {
            double bsum = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = dz(i, j);
                bsum += d;
                for (std::size_t k = 0; k < in; ++k)
                    g.weight(j, k) += d * lt.input(i, k);
            }
            g.bias[j] = bsum;
        }

        if (n == 0)
            break;

        // dInput = dZ * W
        Matrix dinput(m, in);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < out; ++j) {
                const double d = dz(i, j);
                for (std::size_t k = 0; k < in; ++k)
                    dinput(i, k) += d * layer.weight(j, k);
            }

        // previous layer is hidden: peel ReLU, then batch norm
        const Layer& prev = params.layers[n - 1];
        const LayerTrace& pt = trace.layers[n - 1];
        Layer& pg = grads.layers[n - 1];
        const std::size_t pout = prev.weight.rows();
        Matrix dy(m, pout);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pout; ++j)
                dy(i, j) = pt.activation(i, j) > 0.0 ? dinput(i, j) : 0.0;

        dz = Matrix(m, pout);
        const double md = static_cast<double>(m);
        for (std::size_t j = 0; j < pout; ++j) {
            const double inv = 1.0 / std::sqrt(pt.batch_var[j] + kBnEpsilon);
            double dgamma = 0.0, dbeta = 0.0, dvar = 0.0, sum_dxhat = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double dyi = dy(i, j);
                dgamma += dyi * pt.xhat(i, j);
                dbeta += dyi;
                const double dxhat = dyi * prev.gamma[j];
                sum_dxhat += dxhat;
                dvar += dxhat * (pt.z(i, j) - pt.batch_mean[j]);
            }
            dvar *= -0.5 * inv * inv * inv;
            const double dmean = -inv * sum_dxhat;
            pg.gamma[j] = dgamma;
            pg.beta[j] = dbeta;
            for (std::size_t i = 0; i < m; ++i) {
                const double dxhat = dy(i, j) * prev.gamma[j];
                dz(i, j) = dxhat * inv +
                           dvar * 2.0 * (pt.z(i, j) - pt.batch_mean[j]) / md +
                           dmean / md;
            }
        }
    }
    return grads;
}

AdamState make_adam_state(const NetworkParams& params) {
    AdamState st;
    for (const auto& layer : params.layers) {
        st.m.push_back(zeros_like(layer));
        st.v.push_back(zeros_like(layer));
    }
    return st;
}

namespace {

void adam_update(double& param, double g, double& m, double& v, double c1,
                 double c2, const TrainConfig& cfg) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    param -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
}

} // namespace

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state,
               long t, const TrainConfig& config) {
    if (t < 1)
        throw ValidationError("adam_step: step index starts at 1");
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    for (std::size_t n = 0; n < params.layers.size(); ++n) {
        Layer& layer = params.layers[n];
        const Layer& g = grads.layers[n];
        Layer& m = state.m[n];
        Layer& v = state.v[n];
        for (std::size_t i = 0; i < layer.weight.data().size(); ++i)
            adam_update(layer.weight.data()[i], g.weight.data()[i],
                        m.weight.data()[i], v.weight.data()[i], c1, c2,
                        config);
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            adam_update(layer.bias[i], g.bias[i], m.bias[i], v.bias[i], c1, c2,
                        config);
        for (std::size_t i = 0; i < layer.gamma.size(); ++i) {
            adam_update(layer.gamma[i], g.gamma[i], m.gamma[i], v.gamma[i], c1,
                        c2, config);
            adam_update(layer.beta[i], g.beta[i], m.beta[i], v.beta[i], c1, c2,
                        config);
        }
    }
}

TrainHistory train(NetworkParams& params, const Dataset& train_set,
                   const Dataset& val_set, const TrainConfig& config) {
    if (train_set.rows() == 0 || val_set.rows() == 0)
        throw ValidationError("train: empty dataset");
    if (train_set.features.cols() != params.input_dim)
        throw ShapeError("train: feature dimension mismatch");
    if (config.epochs < 1 || config.batch_size < 1 ||
        !(config.learning_rate > 0.0))
        throw ValidationError("train: bad config");

    const Matrix x_train = dataset_matrix(train_set);
    const Matrix x_val = dataset_matrix(val_set);
    const std::size_t n = x_train.rows();

    Rng shuffle_rng(derive_seed(config.seed, 5, 1));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    AdamState opt = make_adam_state(params);
    long step = 0;
    TrainHistory history;
    history.epochs.reserve(static_cast<std::size_t>(config.epochs));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle_each_epoch)
            shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t hit = 0;
        std::size_t pos = 0;
        while (pos < n) {
            std::size_t take = std::min(config.batch_size, n - pos);
            // a trailing single row cannot carry batch statistics; fold it
            // into the final batch
            if (n - pos - take == 1)
                take += 1;
            Matrix xb(take, x_train.cols());
            std::vector<int> yb(take);
            for (std::size_t i = 0; i < take; ++i) {
                const std::size_t src = order[pos + i];
                for (std::size_t c = 0; c < x_train.cols(); ++c)
                    xb(i, c) = x_train(src, c);
                yb[i] = train_set.target[src];
            }
            pos += take;

            ForwardTrace trace = forward(params, xb, Mode::train);
            loss_sum += bce_loss(trace.probabilities, yb) *
                        static_cast<double>(take);
            for (std::size_t i = 0; i < take; ++i)
                hit += (trace.probabilities[i] >= 0.5 ? 1 : 0) == yb[i];
            Gradients grads = backward(params, trace, yb);
            adam_step(params, grads, opt, ++step, config);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.train_accuracy = static_cast<double>(hit) / static_cast<double>(n);
        const auto val_p = predict_proba(params, x_val);
        stats.val_loss = bce_loss(val_p, val_set.target);
        stats.val_accuracy = accuracy_of(val_p, val_set.target);
        if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
            throw DivergenceError("training diverged at epoch " +
                                      std::to_string(epoch + 1),
                                  epoch + 1);
        history.epochs.push_back(stats);
    }
    return history;
}

std::vector<double> predict_proba(const NetworkParams& params,
                                  const Matrix& features) {
    return forward_impl(params, features, Mode::infer, nullptr).probabilities;
}

std::vector<int> predict_signal(const std::vector<double>& p) {
    std::vector<int> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        out[i] = p[i] >= 0.5 ? 1 : 0;
    return out;
}

namespace {

std::vector<double*> all_params(NetworkParams& params) {
    std::vector<double*> out;
    for (auto& layer : params.layers) {
        for (auto& w : layer.weight.data())
            out.push_back(&w);
        for (auto& b : layer.bias)
            out.push_back(&b);
        for (auto& g : layer.gamma)
            out.push_back(&g);
        for (auto& b : layer.beta)
            out.push_back(&b);
    }
    return out;
}

std::vector<double> flat_grads(const Gradients& grads) {
    std::vector<double> out;
    for (const auto& layer : grads.layers) {
        for (double w : layer.weight.data())
            out.push_back(w);
        for (double b : layer.bias)
            out.push_back(b);
        for (double g : layer.gamma)
            out.push_back(g);
        for (double b : layer.beta)
            out.push_back(b);
    }
    return out;
}

} // namespace

GradCheckReport gradcheck(int instances, std::uint64_t seed,
                          std::size_t min_dim, std::size_t max_dim,
                          std::size_t min_batch, std::size_t max_batch) {
    constexpr double h = 1e-5;
    constexpr double rel_tol = 1e-4;
    constexpr double abs_tol = 1e-7;

    GradCheckReport report;
    Rng rng(seed);
    for (int inst = 0; inst < instances; ++inst) {
        const std::size_t dim =
            min_dim + inst % (max_dim - min_dim + 1);
        const std::size_t m =
            min_batch + rng.below(max_batch - min_batch + 1);
        NetworkParams params =
            init_network(dim, derive_seed(seed, 11, inst));
        Matrix x(m, dim);
        for (auto& v : x.data())
            v = rng.uniform();
        std::vector<int> y(m);
        for (auto& t : y)
            t = rng.uniform() < 0.5 ? 0 : 1;

        ForwardTrace trace = forward_impl(params, x, Mode::train, nullptr);
        const std::vector<double> analytic =
            flat_grads(backward(params, trace, y));

        auto loss_at = [&]() {
            return bce_loss(
                forward_impl(params, x, Mode::train, nullptr).probabilities,
                y);
        };
        const auto refs = all_params(params);
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const double orig = *refs[i];
            *refs[i] = orig + h;
            const double lp = loss_at();
            *refs[i] = orig - h;
            const double lm = loss_at();
            *refs[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double diff = std::abs(analytic[i] - fd);
            const double scale = std::max(std::abs(analytic[i]), std::abs(fd));
            const double rel = scale > 0.0 ? diff / scale : 0.0;
            ++report.checked;
            if (!(diff <= abs_tol || rel <= rel_tol))
                ++report.failed;
            if (diff > abs_tol)
                report.worst_rel = std::max(report.worst_rel, rel);
        }
        ++report.instances;
    }
    return report;
}

} // namespace net
} // namespace emh
