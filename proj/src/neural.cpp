#include "uavcov/neural.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace uavcov {

namespace {

constexpr std::array<char, 8> kMagic = {'U', 'A', 'V', 'M', 'L', 'P', '\0', '\1'};

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::linear:
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the post-activation value `y`.
void activation_backward(Eigen::MatrixXd& grad, const Eigen::MatrixXd& y, Activation act) {
  switch (act) {
    case Activation::relu:
      grad = (y.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::tanh:
      grad.array() *= 1.0 - y.array().square();
      break;
    case Activation::linear:
      break;
  }
}

void check_same_shapes(const MlpParams& a, const MlpParams& b) {
  if (a.layer_sizes != b.layer_sizes) {
    throw std::invalid_argument("network shapes differ");
  }
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("truncated network checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::uint8_t activation_tag(Activation a) { return static_cast<std::uint8_t>(a); }

Activation activation_from_tag(int tag) {
  if (tag < 0 || tag > 2) throw std::runtime_error("bad activation tag in checkpoint");
  return static_cast<Activation>(tag);
}

}  // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

void MlpParams::validate() const {
  if (layer_sizes.size() < 2 || weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw std::invalid_argument("network layer count mismatch");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (static_cast<std::size_t>(weights[l].rows()) != layer_sizes[l + 1] ||
        static_cast<std::size_t>(weights[l].cols()) != layer_sizes[l] ||
        static_cast<std::size_t>(biases[l].size()) != layer_sizes[l + 1]) {
      throw std::invalid_argument("network layer shape mismatch");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw std::invalid_argument("non-finite network parameter");
    }
  }
}

MlpGradients MlpGradients::zeros_like(const MlpParams& params) {
  MlpGradients g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  return g;
}

void MlpGradients::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

bool MlpGradients::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

AdamState AdamState::for_params(const MlpParams& params, double learning_rate) {
  AdamState s;
  s.first_moment = MlpGradients::zeros_like(params);
  s.second_moment = MlpGradients::zeros_like(params);
  s.learning_rate = learning_rate;
  return s;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& input, ForwardCache* cache) {
  if (static_cast<std::size_t>(input.rows()) != params.input_size()) {
    throw std::invalid_argument("network input has " + std::to_string(input.rows()) + " rows, expected " +
                                std::to_string(params.input_size()));
  }
  if (cache != nullptr) {
    cache->activations.resize(params.num_layers() + 1);
    cache->activations[0] = input;
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Eigen::MatrixXd z(params.weights[l].rows(), a.cols());
    z.noalias() = params.weights[l] * a;
    z.colwise() += params.biases[l];
    apply_activation(z, l + 1 == params.num_layers() ? params.output : params.hidden);
    a = std::move(z);
    if (cache != nullptr) cache->activations[l + 1] = a;
  }
  return a;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input, ForwardCache* cache) {
  Eigen::MatrixXd out = forward(params, Eigen::MatrixXd(input), cache);
  return out.col(0);
}

Eigen::MatrixXd backward(const MlpParams& params, const ForwardCache& cache,
                         const Eigen::MatrixXd& output_gradient, MlpGradients* grads,
                         bool input_gradient) {
  const std::size_t layers = params.num_layers();
  if (cache.activations.size() != layers + 1) {
    throw std::invalid_argument("forward cache does not match network");
  }
  if (output_gradient.rows() != cache.activations.back().rows() ||
      output_gradient.cols() != cache.activations.back().cols()) {
    throw std::invalid_argument("output gradient shape mismatch");
  }
  if (grads != nullptr && grads->weights.size() != layers) {
    *grads = MlpGradients::zeros_like(params);
  }
  Eigen::MatrixXd delta = output_gradient;
  for (std::size_t l = layers; l-- > 0;) {
    activation_backward(delta, cache.activations[l + 1], l + 1 == layers ? params.output : params.hidden);
    if (grads != nullptr) {
      grads->weights[l].noalias() += delta * cache.activations[l].transpose();
      grads->biases[l] += delta.rowwise().sum();
    }
    if (l == 0 && !input_gradient) return {};
    Eigen::MatrixXd prev(params.weights[l].cols(), delta.cols());
    prev.noalias() = params.weights[l].transpose() * delta;
    delta = std::move(prev);
  }
  return delta;
}

void adam_step(MlpParams& params, const MlpGradients& grads, AdamState& state) {
  if (grads.weights.size() != params.num_layers() || grads.biases.size() != params.num_layers()) {
    throw std::invalid_argument("gradient shape mismatch");
  }
  if (!grads.all_finite()) {
    throw std::domain_error("non-finite gradient passed to Adam (step " +
                            std::to_string(state.step_count) + ")");
  }
  if (state.first_moment.weights.size() != params.num_layers()) {
    state.first_moment = MlpGradients::zeros_like(params);
    state.second_moment = MlpGradients::zeros_like(params);
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double lr = state.learning_rate;
  const double eps = state.epsilon;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    update(params.weights[l], grads.weights[l], state.first_moment.weights[l], state.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l]);
  }
}

void soft_update(MlpParams& target, const MlpParams& online, double tau) {
  check_same_shapes(target, online);
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("tau must lie in [0, 1]");
  }
  if (tau == 0.0) return;
  if (tau == 1.0) {
    target.weights = online.weights;
    target.biases = online.biases;
    return;
  }
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

MlpParams init_params(RandomStream& rng, const std::vector<std::size_t>& layer_sizes,
                      Activation output_activation) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("a network needs at least input and output sizes");
  }
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.output = output_activation;
  const std::size_t layers = layer_sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto rows = static_cast<Eigen::Index>(layer_sizes[l + 1]);
    const auto cols = static_cast<Eigen::Index>(layer_sizes[l]);
    const bool last = l + 1 == layers;
    const double bound = last ? 3e-3 : std::sqrt(6.0 / static_cast<double>(layer_sizes[l]));
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    if (last) {
      for (Eigen::Index r = 0; r < rows; ++r) b(r) = rng.uniform(-3e-3, 3e-3);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

void save_params(std::ostream& out, const MlpParams& params) {
  params.validate();
  out.write(kMagic.data(), kMagic.size());
  write_u64(out, params.layer_sizes.size());
  for (std::size_t s : params.layer_sizes) write_u64(out, s);
  const char tags[2] = {static_cast<char>(activation_tag(params.hidden)),
                        static_cast<char>(activation_tag(params.output))};
  out.write(tags, 2);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) write_f64(out, w(r, c));
    }
    for (Eigen::Index r = 0; r < params.biases[l].size(); ++r) write_f64(out, params.biases[l](r));
  }
  if (!out) throw std::runtime_error("failed to write network checkpoint");
}

MlpParams load_params(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a network checkpoint");
  const std::uint64_t count = read_u64(in);
  if (count < 2 || count > 64) throw std::runtime_error("implausible layer count in checkpoint");
  MlpParams p;
  for (std::uint64_t i = 0; i < count; ++i) p.layer_sizes.push_back(read_u64(in));
  char tags[2];
  in.read(tags, 2);
  if (!in) throw std::runtime_error("truncated network checkpoint");
  p.hidden = activation_from_tag(static_cast<unsigned char>(tags[0]));
  p.output = activation_from_tag(static_cast<unsigned char>(tags[1]));
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    Eigen::MatrixXd w(static_cast<Eigen::Index>(p.layer_sizes[l + 1]), static_cast<Eigen::Index>(p.layer_sizes[l]));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = read_f64(in);
    }
    Eigen::VectorXd b(w.rows());
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = read_f64(in);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  p.validate();
  return p;
}

}  // namespace uavcov
