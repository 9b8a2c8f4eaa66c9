#include "htr/model/model.hpp"

#include <charconv>
#include <sstream>

#include "htr/core/errors.hpp"

namespace htr::model {

std::string_view to_string(Family f) { return f == Family::cnn ? "cnn" : "crnn"; }

Family family_from_string(std::string_view s) {
  if (s == "cnn") return Family::cnn;
  if (s == "crnn") return Family::crnn;
  throw ConfigError("unknown model family '" + std::string(s) + "'");
}

ModelSpec ModelSpec::cnn(std::size_t vocab_size) {
  ModelSpec s;
  s.vocab_size = vocab_size;
  return s;
}

ModelSpec ModelSpec::cnn_expand(std::size_t vocab_size) {
  ModelSpec s = cnn(vocab_size);
  s.channels = {86, 172, 344};
  return s;
}

ModelSpec ModelSpec::crnn(std::size_t vocab_size) {
  ModelSpec s = cnn(vocab_size);
  s.family = Family::crnn;
  s.lstm_layers = 3;
  s.lstm_hidden = 256;
  return s;
}

ModelSpec ModelSpec::preset(std::string_view name, std::size_t vocab_size) {
  if (name == "cnn") return cnn(vocab_size);
  if (name == "cnn-expand") return cnn_expand(vocab_size);
  if (name == "crnn") return crnn(vocab_size);
  throw ConfigError("unknown model preset '" + std::string(name) + "' (expected cnn, cnn-expand, crnn)");
}

void ModelSpec::validate() const {
  if (vocab_size == 0) throw ConfigError("model spec: vocabulary is empty");
  for (auto c : channels) {
    if (c == 0) throw ConfigError("model spec: channel widths must be positive");
  }
  for (auto b : blocks) {
    if (b == 0) throw ConfigError("model spec: every stage needs at least one block");
  }
  if (family == Family::cnn && (lstm_layers != 0 || lstm_hidden != 0)) {
    throw ConfigError("model spec: cnn family cannot have recurrent layers");
  }
  if (family == Family::crnn && (lstm_layers == 0 || lstm_hidden == 0)) {
    throw ConfigError("model spec: crnn family needs at least one LSTM layer with hidden > 0");
  }
  if (input_height < 16) throw ConfigError("model spec: input height too small");
}

bool ModelSpec::is_reference_configuration() const {
  const bool widths = channels == std::array<std::size_t, 3>{64, 128, 256} ||
                      channels == std::array<std::size_t, 3>{86, 172, 344};
  const bool rnn = family == Family::cnn ? lstm_layers == 0 : (lstm_layers == 3 && lstm_hidden == 256);
  return widths && rnn && input_height == 110;
}

std::string ModelSpec::serialize() const {
  std::ostringstream os;
  os << "family=" << to_string(family) << " channels=" << channels[0] << ',' << channels[1] << ','
     << channels[2] << " blocks=" << blocks[0] << ',' << blocks[1] << ',' << blocks[2]
     << " lstm_layers=" << lstm_layers << " lstm_hidden=" << lstm_hidden << " vocab=" << vocab_size
     << " column_pool=" << (column_pool == nn::ColumnPoolMode::mean ? "mean" : "max")
     << " input_height=" << input_height;
  return os.str();
}

namespace {

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("model spec: bad integer '" + std::string(s) + "'");
  }
  return v;
}

std::array<std::size_t, 3> parse_triple(std::string_view s) {
  std::array<std::size_t, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto comma = s.find(',');
    if ((i < 2) == (comma == std::string_view::npos)) throw ConfigError("model spec: expected a,b,c");
    out[i] = parse_size(s.substr(0, comma));
    if (comma != std::string_view::npos) s.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

ModelSpec ModelSpec::parse(std::string_view text) {
  ModelSpec s;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("model spec: expected key=value, got '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string_view val = std::string_view(tok).substr(eq + 1);
    if (key == "family") s.family = family_from_string(val);
    else if (key == "channels") s.channels = parse_triple(val);
    else if (key == "blocks") s.blocks = parse_triple(val);
    else if (key == "lstm_layers") s.lstm_layers = parse_size(val);
    else if (key == "lstm_hidden") s.lstm_hidden = parse_size(val);
    else if (key == "vocab") s.vocab_size = parse_size(val);
    else if (key == "column_pool") {
      if (val == "mean") s.column_pool = nn::ColumnPoolMode::mean;
      else if (val == "max") s.column_pool = nn::ColumnPoolMode::max;
      else throw ConfigError("model spec: column_pool must be mean or max");
    } else if (key == "input_height") s.input_height = parse_size(val);
    else throw ConfigError("model spec: unknown key '" + key + "'");
  }
  return s;
}

std::size_t output_frames(std::size_t width) {
  if (width < 7) throw ShapeError("input width " + std::to_string(width) + " too small");
  const std::size_t stem = (width + 2 * 3 - 7) / 2 + 1;
  return stem / 2 / 2;
}

std::size_t expected_param_count(const ModelSpec& spec) {
  spec.validate();
  const auto [c1, c2, c3] = spec.channels;
  std::size_t total = 49 * c1 + 2 * c1;  // stem conv (no bias) + batch norm
  std::size_t in = c1;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t out = spec.channels[s];
    for (std::size_t b = 0; b < spec.blocks[s]; ++b) {
      total += 9 * in * out + 2 * out + 9 * out * out + 2 * out;
      if (in != out) total += in * out + 2 * out;
      in = out;
    }
  }
  std::size_t features = c3;
  if (spec.family == Family::crnn) {
    total += nn::bilstm_stack_param_count(c3, spec.lstm_hidden, spec.lstm_layers);
    features = 2 * spec.lstm_hidden;
  }
  total += features * spec.classes() + spec.classes();
  (void)c2;
  return total;
}

template <typename T>
Model<T>::Model(const ModelSpec& spec, RngStream& rng) : spec_(spec) {
  spec_.validate();
  const auto [c1, c2, c3] = spec_.channels;
  (void)c2;
  stem_conv_ = std::make_unique<nn::Conv2d<T>>(registry_, "stem.conv", 1, c1, 7,
                                               nn::ConvGeometry{2, 2, 3, 3}, false);
  stem_bn_ = std::make_unique<nn::BatchNorm2d<T>>(registry_, "stem.bn", c1);
  std::size_t in = c1;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t out = spec_.channels[s];
    auto& stage = stages_[s];
    stage.reserve(spec_.blocks[s]);
    for (std::size_t b = 0; b < spec_.blocks[s]; ++b) {
      stage.emplace_back(registry_, "stage" + std::to_string(s + 1) + ".block" + std::to_string(b),
                         in, out, 1);
      in = out;
    }
  }
  column_pool_ = nn::ColumnPool<T>(spec_.column_pool);
  std::size_t features = c3;
  if (spec_.family == Family::crnn) {
    rnn_ = std::make_unique<nn::BiLstmStack<T>>(registry_, "rnn", c3, spec_.lstm_hidden,
                                                spec_.lstm_layers);
    features = rnn_->output_size();
  }
  head_ = std::make_unique<nn::Linear<T>>(registry_, "head", features, spec_.classes());

  stem_conv_->reset_parameters(rng);
  stem_bn_->reset_parameters();
  for (auto& stage : stages_) {
    for (auto& block : stage) block.reset_parameters(rng);
  }
  if (rnn_) rnn_->reset_parameters(rng);
  head_->reset_parameters(rng);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& images, nn::Mode mode) {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != spec_.input_height) {
    throw ShapeError("model expects B x 1 x " + std::to_string(spec_.input_height) +
                     " x W images, got " + shape_str(images.shape()));
  }
  Tensor<T> h = stem_relu_.forward(stem_bn_->forward(stem_conv_->forward(images), mode));
  for (std::size_t s = 0; s < 3; ++s) {
    for (auto& block : stages_[s]) h = block.forward(h, mode);
    if (s < 2) h = pools_[s].forward(h);
  }
  Tensor<T> seq = column_pool_.forward(h);
  if (rnn_) seq = rnn_->forward(seq);
  return head_->forward(seq);
}

template <typename T>
void Model<T>::backward(const Tensor<T>& grad_logits) {
  Tensor<T> g = head_->backward(grad_logits);
  if (rnn_) g = rnn_->backward(g);
  g = column_pool_.backward(g);
  for (std::size_t s = 3; s-- > 0;) {
    if (s < 2) g = pools_[s].backward(g);
    for (auto it = stages_[s].rbegin(); it != stages_[s].rend(); ++it) g = it->backward(g);
  }
  g = stem_bn_->backward(stem_relu_.backward(std::move(g)));
  stem_conv_->backward(g, /*need_grad_x=*/false);
}

template class Model<float>;
template class Model<double>;

}  // namespace htr::model
