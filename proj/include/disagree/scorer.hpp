#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disagree/error.hpp"
#include "disagree/features.hpp"

namespace disagree {

/// Loss minimised by the trainer. Both act on the logistic output, so soft
/// targets stay meaningful and predictions stay inside (0,1).
enum class TrainLoss { BCE, MSE };

std::string_view to_string(TrainLoss loss);
TrainLoss parse_train_loss(std::string_view name);

struct Hyperparams {
    std::optional<int> hidden_size;  // none: purely linear scorer
    double dropout = 0.1;
    double learning_rate = 5e-4;
    int batch_size = 8;
    int epochs = 3;
    std::uint64_t seed = 0;

    // Native-scorer settings outside the tuned grid.
    int hash_bits = kDefaultHashBits;
    double weight_decay = 0.01;
    TrainLoss loss = TrainLoss::BCE;

    bool operator==(const Hyperparams&) const = default;
};

std::string describe(const Hyperparams& hp);

/// Lists every value of `hp` that falls outside the tuning grid
/// (hidden {32,64,128,256} or none, dropout {.1,.3,.5},
/// lr {5e-4,1e-5,5e-5,1e-6}, batch {8,16}, epochs [2,10]).
std::vector<std::string> off_grid_values(const Hyperparams& hp);

/// Throws ValidationError when values are unusable, or off-grid and
/// `allow_off_grid` is false.
void validate(const Hyperparams& hp, bool allow_off_grid);

struct HyperparamGrid {
    std::vector<std::optional<int>> hidden_sizes{std::nullopt};
    std::vector<double> dropouts{0.1};
    std::vector<double> learning_rates{5e-4};
    std::vector<int> batch_sizes{8};
    std::vector<int> epochs{3};
    Hyperparams base;  // seed, hash bits, weight decay, loss

    /// The full published grid with epochs 2..4.
    static HyperparamGrid published();
};

/// Cartesian product in a fixed order (hidden, dropout, lr, batch, epochs).
std::vector<Hyperparams> expand(const HyperparamGrid& grid);

/// Training example: text with a target in [0,1] (hard labels are 0/1).
struct Example {
    std::string text;
    double target = 0.0;
};

class TrainingError : public PipelineError {
public:
    using PipelineError::PipelineError;
};

/// Hashed-feature logistic scorer with an optional one-hidden-layer head:
///   logit = bias + w·x + v·relu(W·x + b)
/// Parameters live in one flat vector laid out as [w | bias | W | b | v],
/// W stored feature-major (row k holds the hidden_size weights of feature k).
class ScorerModel {
public:
    ScorerModel() = default;
    /// All-zero parameters; predicts 0.5 everywhere.
    ScorerModel(int hash_bits, std::optional<int> hidden_size);

    int hash_bits() const noexcept { return bits_; }
    std::size_t input_dim() const noexcept { return std::size_t{1} << bits_; }
    int hidden_size() const noexcept { return hidden_; }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    std::span<const double> linear_weights() const noexcept { return {params_.data(), input_dim()}; }
    double bias() const noexcept { return params_[bias_offset()]; }
    void set_bias(double b) noexcept { params_[bias_offset()] = b; }

    std::size_t bias_offset() const noexcept { return input_dim(); }
    std::size_t hidden_weight_offset() const noexcept { return input_dim() + 1; }
    std::size_t hidden_bias_offset() const noexcept {
        return hidden_weight_offset() + input_dim() * static_cast<std::size_t>(hidden_);
    }
    std::size_t output_weight_offset() const noexcept { return hidden_bias_offset() + static_cast<std::size_t>(hidden_); }
    /// Whether decoupled weight decay applies to parameter `i` (not biases).
    bool decays(std::size_t i) const noexcept;

    double logit(const FeatureVector& x) const;
    /// Logistic output in (0,1); dropout never applies here.
    double predict(const FeatureVector& x) const;
    bool all_finite() const noexcept;

    bool operator==(const ScorerModel&) const = default;

private:
    int bits_ = kDefaultHashBits;
    int hidden_ = 0;
    std::vector<double> params_;
};

/// Largest input_dim * hidden_size the trainer accepts.
inline constexpr std::size_t kMaxHiddenParameters = std::size_t{1} << 23;

/// Mini-batch AdamW (beta 0.9/0.999, eps 1e-8) on the chosen loss.
/// Deterministic in (examples, hp): same inputs give bit-identical models.
/// Throws std::invalid_argument on empty input or targets outside [0,1] and
/// TrainingError when the loss stops being finite.
ScorerModel train(std::span<const Example> examples, const Hyperparams& hp);

double predict(const ScorerModel& model, std::string_view text);

/// Mean loss over `xs` in evaluation mode. When `gradient` is given it is
/// resized to the parameter count and receives d(loss)/d(parameters).
double loss_and_gradient(const ScorerModel& model, std::span<const FeatureVector> xs,
                         std::span<const double> targets, TrainLoss loss, std::vector<double>* gradient);

}  // namespace disagree
