#include "cryoplan/qnet.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cryoplan/rng.hpp"

namespace cryoplan {

namespace {

constexpr std::array<char, 4> kMagic{'C', 'P', 'Q', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T take(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError("network container truncated");
  }
  return value;
}

template <class Stored, class Scalar, class Dest>
void read_block(std::istream& in, Dest& dest) {
  for (Eigen::Index i = 0; i < dest.size(); ++i) dest.data()[i] = static_cast<Scalar>(take<Stored>(in));
}

}  // namespace

std::vector<int> qnet_sizes(int input_dim) {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), kQnetHidden.begin(), kQnetHidden.end());
  sizes.push_back(1);
  return sizes;
}

template <class Scalar>
Mlp<Scalar>::Mlp(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)), seed_(seed) {
  if (sizes_.size() < 2) throw ShapeError("network needs at least an input and an output layer");
  for (int s : sizes_) {
    if (s < 1) throw ShapeError("layer sizes must be positive");
  }
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / in);
    Layer layer{Matrix(out, in), Vector::Zero(out)};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
    }
    layers_.push_back(std::move(layer));
  }
}

template <class Scalar>
Mlp<Scalar> Mlp<Scalar>::zeros(std::vector<int> sizes) {
  Mlp net(std::move(sizes), 0);
  for (auto& layer : net.layers_) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return net;
}

template <class Scalar>
std::size_t Mlp<Scalar>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

template <class Scalar>
void Mlp<Scalar>::check_input(const Eigen::Ref<const Matrix>& x) const {
  if (x.cols() != input_dim()) {
    throw ShapeError("input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(input_dim()));
  }
}

template <class Scalar>
typename Mlp<Scalar>::Vector Mlp<Scalar>::forward(const Eigen::Ref<const Matrix>& x) const {
  check_input(x);
  Matrix a = x;
  Matrix z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    z.resize(a.rows(), layer.weight.rows());
    z.noalias() = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < layers_.size()) {
      a = z.cwiseMax(Scalar(0));
    }
  }
  return z.col(0);
}

template <class Scalar>
typename Mlp<Scalar>::Vector Mlp<Scalar>::forward(const Eigen::Ref<const Matrix>& x, Workspace& ws) const {
  check_input(x);
  const std::size_t n_layers = layers_.size();
  ws.pre.resize(n_layers);
  ws.post.resize(n_layers + 1);
  ws.post[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = layers_[l];
    ws.pre[l].resize(x.rows(), layer.weight.rows());
    ws.pre[l].noalias() = ws.post[l] * layer.weight.transpose();
    ws.pre[l].rowwise() += layer.bias.transpose();
    if (l + 1 < n_layers) {
      ws.post[l + 1] = ws.pre[l].cwiseMax(Scalar(0));
    } else {
      ws.post[l + 1] = ws.pre[l];
    }
  }
  return ws.post.back().col(0);
}

template <class Scalar>
typename Mlp<Scalar>::Gradients Mlp<Scalar>::backward(const Workspace& ws,
                                                     const Eigen::Ref<const Vector>& dloss_dout) const {
  const std::size_t n_layers = layers_.size();
  if (ws.post.size() != n_layers + 1 || ws.post[0].rows() != dloss_dout.size()) {
    throw ShapeError("backward: workspace does not match loss gradient");
  }
  Gradients grads(n_layers);
  Matrix delta = dloss_dout;  // n x 1
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto& layer = layers_[li];
    grads[li].weight.noalias() = delta.transpose() * ws.post[li];
    grads[li].bias = delta.colwise().sum().transpose();
    if (li == 0) break;
    Matrix upstream = delta * layer.weight;
    delta = upstream.cwiseProduct((ws.pre[li - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
  }
  return grads;
}

template <class Scalar>
typename Mlp<Scalar>::Gradients Mlp<Scalar>::zero_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    g.push_back(Layer{Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

template <class Scalar>
bool Mlp<Scalar>::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

template <class Scalar>
template <class To>
Mlp<To> Mlp<Scalar>::cast() const {
  Mlp<To> out;
  out.sizes_ = sizes_;
  out.seed_ = seed_;
  for (const auto& l : layers_) {
    out.layers_.push_back(typename Mlp<To>::Layer{l.weight.template cast<To>(), l.bias.template cast<To>()});
  }
  return out;
}

template <class Scalar>
void Mlp<Scalar>::write(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, sizeof(Scalar));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(sizes_.size()));
  for (int s : sizes_) put<std::int32_t>(out, s);
  put<std::uint64_t>(out, seed_);
  for (const auto& l : layers_) {
    out.write(reinterpret_cast<const char*>(l.weight.data()), static_cast<std::streamsize>(l.weight.size() * sizeof(Scalar)));
    out.write(reinterpret_cast<const char*>(l.bias.data()), static_cast<std::streamsize>(l.bias.size() * sizeof(Scalar)));
  }
}

template <class Scalar>
Mlp<Scalar> Mlp<Scalar>::read(std::istream& in, std::optional<int> expected_input_dim) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw FormatError("network container truncated");
  if (magic != kMagic) throw FormatError("not a network container (bad magic)");
  const auto version = take<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw FormatError("network container version " + std::to_string(version) + ", expected " +
                      std::to_string(kFormatVersion));
  }
  const auto scalar_bytes = take<std::uint32_t>(in);
  if (scalar_bytes != 4 && scalar_bytes != 8) throw FormatError("unsupported scalar width");
  const auto n_sizes = take<std::uint32_t>(in);
  if (n_sizes < 2 || n_sizes > 64) throw FormatError("implausible layer count");
  Mlp net;
  for (std::uint32_t i = 0; i < n_sizes; ++i) {
    const auto s = take<std::int32_t>(in);
    if (s < 1 || s > (1 << 20)) throw FormatError("implausible layer size");
    net.sizes_.push_back(s);
  }
  net.seed_ = take<std::uint64_t>(in);
  if (expected_input_dim && *expected_input_dim != net.input_dim()) {
    throw ShapeError("stored network has input dim " + std::to_string(net.input_dim()) +
                     ", configuration expects " + std::to_string(*expected_input_dim));
  }
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    Layer layer{Matrix(net.sizes_[l + 1], net.sizes_[l]), Vector(net.sizes_[l + 1])};
    if (scalar_bytes == 4) {
      read_block<float, Scalar>(in, layer.weight);
      read_block<float, Scalar>(in, layer.bias);
    } else {
      read_block<double, Scalar>(in, layer.weight);
      read_block<double, Scalar>(in, layer.bias);
    }
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

template <class Scalar>
void Mlp<Scalar>::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write(out);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

template <class Scalar>
Mlp<Scalar> Mlp<Scalar>::load(const std::filesystem::path& path, std::optional<int> expected_input_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read(in, expected_input_dim);
}

template <class Scalar>
MseResult<Scalar> mse_loss(const typename Mlp<Scalar>::Vector& q, const typename Mlp<Scalar>::Vector& y) {
  if (q.size() != y.size() || q.size() == 0) throw ShapeError("mse_loss: size mismatch or empty batch");
  const auto n = static_cast<Scalar>(q.size());
  typename Mlp<Scalar>::Vector diff = q - y;
  return {diff.squaredNorm() / n, diff * (Scalar(2) / n)};
}

template <class Scalar>
AdamState<Scalar>::AdamState(const Mlp<Scalar>& net, double learning_rate)
    : lr(learning_rate), m(net.zero_gradients()), v(net.zero_gradients()) {}

template <class Scalar>
void adam_step(Mlp<Scalar>& net, const typename Mlp<Scalar>::Gradients& grads, AdamState<Scalar>& st) {
  auto& layers = net.layers();
  if (grads.size() != layers.size() || st.m.size() != layers.size()) {
    throw ShapeError("adam_step: gradient / state shape mismatch");
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const auto b1 = static_cast<Scalar>(st.beta1);
  const auto b2 = static_cast<Scalar>(st.beta2);
  const auto step_size = static_cast<Scalar>(st.lr / c1);
  const auto inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
  const auto eps = static_cast<Scalar>(st.eps);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    if (param.size() != g.size()) throw ShapeError("adam_step: parameter / gradient size mismatch");
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    param.array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_c2 + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads[l].weight, st.m[l].weight, st.v[l].weight);
    update(layers[l].bias, grads[l].bias, st.m[l].bias, st.v[l].bias);
  }
}

template class Mlp<float>;
template class Mlp<double>;
template Mlp<double> Mlp<float>::cast<double>() const;
template Mlp<float> Mlp<double>::cast<float>() const;
template Mlp<float> Mlp<float>::cast<float>() const;
template Mlp<double> Mlp<double>::cast<double>() const;
template MseResult<float> mse_loss<float>(const Mlp<float>::Vector&, const Mlp<float>::Vector&);
template MseResult<double> mse_loss<double>(const Mlp<double>::Vector&, const Mlp<double>::Vector&);
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(Mlp<float>&, const Mlp<float>::Gradients&, AdamState<float>&);
template void adam_step<double>(Mlp<double>&, const Mlp<double>::Gradients&, AdamState<double>&);

}  // namespace cryoplan
