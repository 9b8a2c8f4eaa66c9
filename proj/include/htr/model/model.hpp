#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "htr/core/rng.hpp"
#include "htr/nn/layers.hpp"
#include "htr/nn/lstm.hpp"
#include "htr/nn/residual.hpp"

namespace htr::model {

enum class Family { cnn, crnn };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

/// Architecture description. The three named presets are the CNN-only model, its
/// widened variant, and the CRNN; all share the same backbone topology.
struct ModelSpec {
  Family family = Family::cnn;
  std::array<std::size_t, 3> channels{64, 128, 256};
  std::array<std::size_t, 3> blocks{2, 2, 4};
  std::size_t lstm_layers = 0;
  std::size_t lstm_hidden = 0;
  std::size_t vocab_size = 0;  // characters; the classifier has vocab_size + 1 outputs (blank last)
  nn::ColumnPoolMode column_pool = nn::ColumnPoolMode::mean;
  std::size_t input_height = 110;

  static ModelSpec cnn(std::size_t vocab_size);
  static ModelSpec cnn_expand(std::size_t vocab_size);
  static ModelSpec crnn(std::size_t vocab_size);
  /// Preset by name: "cnn", "cnn-expand" or "crnn".
  static ModelSpec preset(std::string_view name, std::size_t vocab_size);

  std::size_t classes() const { return vocab_size + 1; }
  std::uint32_t blank() const { return static_cast<std::uint32_t>(vocab_size); }

  /// Structural checks (family/LSTM consistency, positive extents); throws ConfigError.
  void validate() const;
  /// True when widths and recurrent sizes are exactly those of the published models.
  bool is_reference_configuration() const;

  /// Stable one-line key=value form; round-trips through parse().
  std::string serialize() const;
  static ModelSpec parse(std::string_view text);

  bool operator==(const ModelSpec&) const = default;
};

/// Frames produced for an input of the given padded width: stride-2 stem (7x7, pad 3)
/// followed by two 2x2 max-pools.
std::size_t output_frames(std::size_t width);

template <typename T>
class Model {
 public:
  /// Builds the topology and initializes every parameter from `rng`.
  Model(const ModelSpec& spec, RngStream& rng);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// images: B x 1 x H x W with H == spec.input_height. Returns B x T x (V + 1) logits.
  Tensor<T> forward(const Tensor<T>& images, nn::Mode mode);
  /// Accumulates parameter gradients for the most recent forward().
  void backward(const Tensor<T>& grad_logits);

  nn::ParamRegistry<T>& params() { return registry_; }
  const nn::ParamRegistry<T>& params() const { return registry_; }
  const ModelSpec& spec() const { return spec_; }
  std::size_t count_params() const { return registry_.count(); }

 private:
  ModelSpec spec_;
  nn::ParamRegistry<T> registry_;
  std::unique_ptr<nn::Conv2d<T>> stem_conv_;
  std::unique_ptr<nn::BatchNorm2d<T>> stem_bn_;
  nn::ReLU<T> stem_relu_;
  std::array<std::vector<nn::ResidualBlock<T>>, 3> stages_;
  std::array<nn::MaxPool2d<T>, 2> pools_;
  nn::ColumnPool<T> column_pool_;
  std::unique_ptr<nn::BiLstmStack<T>> rnn_;
  std::unique_ptr<nn::Linear<T>> head_;
};

template <typename T>
std::size_t count_params(const nn::ParamRegistry<T>& registry) {
  return registry.count();
}

/// Closed-form trainable parameter count for a spec, without building the model.
std::size_t expected_param_count(const ModelSpec& spec);

}  // namespace htr::model
