#include "disagree/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace disagree {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
// Keeps predictions strictly inside (0,1) once the logit saturates.
constexpr double kProbFloor = 1e-12;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct LossTerm {
    double value;
    double dlogit;
};

LossTerm loss_term(double z, double target, TrainLoss loss) {
    const double p = sigmoid(z);
    if (loss == TrainLoss::BCE) return {softplus(z) - target * z, p - target};
    const double diff = p - target;
    return {diff * diff, 2.0 * diff * p * (1.0 - p)};
}

// Scratch space for one forward/backward pass through the hidden head.
struct Pass {
    std::vector<double> input_scale;  // per feature entry; 1 without dropout
    std::vector<double> pre;          // hidden pre-activations
};

double forward(const ScorerModel& m, const FeatureVector& x, Pass& pass) {
    const auto p = m.parameters();
    double z = m.bias();
    for (const auto& [k, v] : x.entries) z += p[k] * v;

    const int hidden = m.hidden_size();
    if (hidden == 0) return z;
    const auto h = static_cast<std::size_t>(hidden);
    pass.pre.assign(p.begin() + static_cast<std::ptrdiff_t>(m.hidden_bias_offset()),
                    p.begin() + static_cast<std::ptrdiff_t>(m.hidden_bias_offset() + h));
    const double* w = p.data() + m.hidden_weight_offset();
    for (std::size_t e = 0; e < x.entries.size(); ++e) {
        const auto& [k, v] = x.entries[e];
        const double xv = v * (pass.input_scale.empty() ? 1.0 : pass.input_scale[e]);
        if (xv == 0.0) continue;
        const double* row = w + static_cast<std::size_t>(k) * h;
        for (std::size_t j = 0; j < h; ++j) pass.pre[j] += xv * row[j];
    }
    const double* out = p.data() + m.output_weight_offset();
    for (std::size_t j = 0; j < h; ++j) z += out[j] * std::max(pass.pre[j], 0.0);
    return z;
}

void backward(const ScorerModel& m, const FeatureVector& x, const Pass& pass, double dz, double* grad) {
    for (const auto& [k, v] : x.entries) grad[k] += dz * v;
    grad[m.bias_offset()] += dz;

    const int hidden = m.hidden_size();
    if (hidden == 0) return;
    const auto h = static_cast<std::size_t>(hidden);
    const auto p = m.parameters();
    const double* out = p.data() + m.output_weight_offset();
    double* g_out = grad + m.output_weight_offset();
    double* g_hb = grad + m.hidden_bias_offset();
    double* g_w = grad + m.hidden_weight_offset();

    std::vector<double> dpre(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
        if (pass.pre[j] > 0.0) {
            g_out[j] += dz * pass.pre[j];
            dpre[j] = dz * out[j];
            g_hb[j] += dpre[j];
        }
    }
    for (std::size_t e = 0; e < x.entries.size(); ++e) {
        const auto& [k, v] = x.entries[e];
        const double xv = v * (pass.input_scale.empty() ? 1.0 : pass.input_scale[e]);
        if (xv == 0.0) continue;
        double* row = g_w + static_cast<std::size_t>(k) * h;
        for (std::size_t j = 0; j < h; ++j) row[j] += dpre[j] * xv;
    }
}

bool is_one_of(double v, std::initializer_list<double> allowed) {
    return std::any_of(allowed.begin(), allowed.end(), [v](double a) { return std::abs(v - a) <= 1e-12 * a; });
}

}  // namespace

std::string_view to_string(TrainLoss loss) { return loss == TrainLoss::BCE ? "bce" : "mse"; }

TrainLoss parse_train_loss(std::string_view name) {
    if (name == "bce") return TrainLoss::BCE;
    if (name == "mse") return TrainLoss::MSE;
    throw std::invalid_argument(fmt::format("unknown loss '{}' (bce|mse)", name));
}

std::string describe(const Hyperparams& hp) {
    return fmt::format("hidden={} dropout={} lr={} batch={} epochs={} seed={} bits={} wd={} loss={}",
                       hp.hidden_size ? std::to_string(*hp.hidden_size) : "none", hp.dropout, hp.learning_rate,
                       hp.batch_size, hp.epochs, hp.seed, hp.hash_bits, hp.weight_decay, to_string(hp.loss));
}

std::vector<std::string> off_grid_values(const Hyperparams& hp) {
    std::vector<std::string> out;
    if (hp.hidden_size && !is_one_of(*hp.hidden_size, {32, 64, 128, 256})) {
        out.push_back(fmt::format("hidden_size {} not in {{32,64,128,256}}", *hp.hidden_size));
    }
    if (!is_one_of(hp.dropout, {0.1, 0.3, 0.5})) out.push_back(fmt::format("dropout {} not in {{.1,.3,.5}}", hp.dropout));
    if (!is_one_of(hp.learning_rate, {5e-4, 1e-5, 5e-5, 1e-6})) {
        out.push_back(fmt::format("learning_rate {} not in {{5e-4,1e-5,5e-5,1e-6}}", hp.learning_rate));
    }
    if (hp.batch_size != 8 && hp.batch_size != 16) {
        out.push_back(fmt::format("batch_size {} not in {{8,16}}", hp.batch_size));
    }
    if (hp.epochs < 2 || hp.epochs > 10) out.push_back(fmt::format("epochs {} not in [2,10]", hp.epochs));
    return out;
}

void validate(const Hyperparams& hp, bool allow_off_grid) {
    std::vector<std::string> problems;
    if (hp.hidden_size && *hp.hidden_size <= 0) problems.push_back("hidden_size must be positive");
    if (!(hp.dropout >= 0.0 && hp.dropout < 1.0)) problems.push_back("dropout must be in [0,1)");
    if (!(hp.learning_rate > 0.0 && std::isfinite(hp.learning_rate))) problems.push_back("learning_rate must be > 0");
    if (hp.batch_size <= 0) problems.push_back("batch_size must be positive");
    if (hp.epochs < 0) problems.push_back("epochs must be >= 0");
    if (hp.hash_bits < kMinHashBits || hp.hash_bits > kMaxHashBits) {
        problems.push_back(fmt::format("hash_bits must be in [{},{}]", kMinHashBits, kMaxHashBits));
    }
    if (!(hp.weight_decay >= 0.0)) problems.push_back("weight_decay must be >= 0");
    if (!allow_off_grid) {
        for (auto& p : off_grid_values(hp)) problems.push_back(std::move(p));
    }
    if (!problems.empty()) throw ValidationError("invalid hyperparameters", std::move(problems));
}

HyperparamGrid HyperparamGrid::published() {
    HyperparamGrid g;
    g.hidden_sizes = {32, 64, 128, 256};
    g.dropouts = {0.1, 0.3, 0.5};
    g.learning_rates = {5e-4, 1e-5, 5e-5, 1e-6};
    g.batch_sizes = {8, 16};
    g.epochs = {2, 3, 4};
    return g;
}

std::vector<Hyperparams> expand(const HyperparamGrid& grid) {
    std::vector<Hyperparams> out;
    for (const auto& hidden : grid.hidden_sizes)
        for (double dropout : grid.dropouts)
            for (double lr : grid.learning_rates)
                for (int batch : grid.batch_sizes)
                    for (int epochs : grid.epochs) {
                        Hyperparams hp = grid.base;
                        hp.hidden_size = hidden;
                        hp.dropout = dropout;
                        hp.learning_rate = lr;
                        hp.batch_size = batch;
                        hp.epochs = epochs;
                        out.push_back(hp);
                    }
    return out;
}

ScorerModel::ScorerModel(int hash_bits, std::optional<int> hidden_size)
    : bits_(hash_bits), hidden_(hidden_size.value_or(0)) {
    if (hash_bits < kMinHashBits || hash_bits > kMaxHashBits) {
        throw std::invalid_argument(fmt::format("hash bits {} outside [{}, {}]", hash_bits, kMinHashBits, kMaxHashBits));
    }
    if (hidden_ < 0) throw std::invalid_argument("hidden size must be positive");
    const auto h = static_cast<std::size_t>(hidden_);
    if (input_dim() * h > kMaxHiddenParameters) {
        throw std::invalid_argument(fmt::format(
            "hidden layer of {}x{} exceeds {} weights; lower hash_bits", input_dim(), h, kMaxHiddenParameters));
    }
    params_.assign(input_dim() + 1 + input_dim() * h + 2 * h, 0.0);
}

bool ScorerModel::decays(std::size_t i) const noexcept {
    if (i == bias_offset()) return false;
    return !(i >= hidden_bias_offset() && i < output_weight_offset());
}

double ScorerModel::logit(const FeatureVector& x) const {
    if (x.bits != bits_) {
        throw std::invalid_argument(fmt::format("feature bits {} do not match model bits {}", x.bits, bits_));
    }
    Pass pass;
    return forward(*this, x, pass);
}

double ScorerModel::predict(const FeatureVector& x) const {
    return std::clamp(sigmoid(logit(x)), kProbFloor, 1.0 - kProbFloor);
}

bool ScorerModel::all_finite() const noexcept {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

double predict(const ScorerModel& model, std::string_view text) {
    return model.predict(featurize(text, model.hash_bits()));
}

double loss_and_gradient(const ScorerModel& model, std::span<const FeatureVector> xs, std::span<const double> targets,
                         TrainLoss loss, std::vector<double>* gradient) {
    if (xs.size() != targets.size() || xs.empty()) {
        throw std::invalid_argument("loss_and_gradient: need equally many (non-zero) inputs and targets");
    }
    if (gradient) gradient->assign(model.parameters().size(), 0.0);
    Pass pass;
    double total = 0.0;
    const double scale = 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double z = forward(model, xs[i], pass);
        const LossTerm term = loss_term(z, targets[i], loss);
        total += term.value;
        if (gradient) backward(model, xs[i], pass, term.dlogit * scale, gradient->data());
    }
    return total * scale;
}

ScorerModel train(std::span<const Example> examples, const Hyperparams& hp) {
    if (examples.empty()) throw std::invalid_argument("train: no examples");
    validate(hp, /*allow_off_grid=*/true);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!(examples[i].target >= 0.0 && examples[i].target <= 1.0)) {
            throw std::invalid_argument(fmt::format("train: target {} of example {} outside [0,1]", examples[i].target, i));
        }
    }

    std::vector<FeatureVector> xs;
    xs.reserve(examples.size());
    for (const auto& ex : examples) xs.push_back(featurize(ex.text, hp.hash_bits));

    ScorerModel model(hp.hash_bits, hp.hidden_size);
    std::mt19937_64 rng(hp.seed);
    auto params = model.parameters();

    if (model.hidden_size() > 0) {
        const double out_scale = 1.0 / std::sqrt(static_cast<double>(model.hidden_size()));
        for (std::size_t i = model.hidden_weight_offset(); i < model.hidden_bias_offset(); ++i) {
            params[i] = 0.2 * uniform01(rng) - 0.1;
        }
        for (std::size_t i = model.output_weight_offset(); i < params.size(); ++i) {
            params[i] = out_scale * (2.0 * uniform01(rng) - 1.0);
        }
    }

    const std::size_t n_params = params.size();
    std::vector<double> grad(n_params), m1(n_params, 0.0), m2(n_params, 0.0);
    std::vector<bool> decay(n_params);
    for (std::size_t i = 0; i < n_params; ++i) decay[i] = model.decays(i);

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(hp.batch_size);
    const double keep = 1.0 - hp.dropout;
    Pass pass;
    std::uint64_t step = 0;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(start + batch, order.size());
            const double scale = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;

            for (std::size_t b = start; b < end; ++b) {
                const FeatureVector& x = xs[order[b]];
                pass.input_scale.clear();
                if (model.hidden_size() > 0 && hp.dropout > 0.0) {
                    pass.input_scale.resize(x.entries.size());
                    for (auto& s : pass.input_scale) s = uniform01(rng) < keep ? 1.0 / keep : 0.0;
                }
                const double z = forward(model, x, pass);
                const LossTerm term = loss_term(z, examples[order[b]].target, hp.loss);
                batch_loss += term.value;
                backward(model, x, pass, term.dlogit * scale, grad.data());
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainingError(fmt::format("non-finite loss at epoch {}, step {} ({})", epoch + 1, step + 1,
                                                describe(hp)));
            }

            ++step;
            const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
            const double lr = hp.learning_rate;
            const double shrink = 1.0 - lr * hp.weight_decay;
            for (std::size_t i = 0; i < n_params; ++i) {
                const double g = grad[i];
                // Exact no-op for coordinates that have never seen a gradient.
                if (g == 0.0 && m1[i] == 0.0 && m2[i] == 0.0 && (params[i] == 0.0 || !decay[i])) continue;
                m1[i] = kAdamBeta1 * m1[i] + (1.0 - kAdamBeta1) * g;
                m2[i] = kAdamBeta2 * m2[i] + (1.0 - kAdamBeta2) * g * g;
                if (decay[i]) params[i] *= shrink;
                params[i] -= lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + kAdamEps);
            }
        }
    }
    if (!model.all_finite()) throw TrainingError("training produced non-finite parameters (" + describe(hp) + ")");
    return model;
}

}  // namespace disagree
