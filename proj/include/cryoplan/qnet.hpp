#pragma once

// Dense ReLU network with a single linear output, trained by backprop + Adam.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cryoplan/errors.hpp"

namespace cryoplan {

// Hidden widths of the Q-network.
inline const std::vector<int> kQnetHidden{128, 256, 128};

std::vector<int> qnet_sizes(int input_dim);

template <class Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
  };

  // Activations of the last forward pass, kept for backward.
  struct Workspace {
    std::vector<Matrix> pre;   // per layer, n x out
    std::vector<Matrix> post;  // post[0] = input, post[l + 1] = relu(pre[l])
  };

  using Gradients = std::vector<Layer>;

  Mlp() = default;

  // He-style uniform fan-in initialization, zero biases.
  Mlp(std::vector<int> sizes, std::uint64_t seed);

  static Mlp zeros(std::vector<int> sizes);

  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int input_dim() const noexcept { return sizes_.front(); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t parameter_count() const noexcept;

  // Rows of `x` are inputs; returns one output per row.
  Vector forward(const Eigen::Ref<const Matrix>& x) const;
  Vector forward(const Eigen::Ref<const Matrix>& x, Workspace& ws) const;

  // Gradient of sum_i dloss_dout[i] * out_i w.r.t. every parameter, using the
  // activations stored by the preceding forward(x, ws).
  Gradients backward(const Workspace& ws, const Eigen::Ref<const Vector>& dloss_dout) const;

  Gradients zero_gradients() const;
  bool all_finite() const;

  template <class To>
  Mlp<To> cast() const;

  void write(std::ostream& out) const;
  // Throws FormatError on truncation or version mismatch, ShapeError if
  // `expected_input_dim` is given and differs.
  static Mlp read(std::istream& in, std::optional<int> expected_input_dim = std::nullopt);

  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path, std::optional<int> expected_input_dim = std::nullopt);

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.sizes_ != b.sizes_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
      if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) return false;
    }
    return true;
  }

 private:
  template <class>
  friend class Mlp;

  void check_input(const Eigen::Ref<const Matrix>& x) const;

  std::vector<int> sizes_;
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
};

// Mean squared error 1/n sum (q - y)^2 and its gradient 2 (q - y) / n.
template <class Scalar>
struct MseResult {
  Scalar loss;
  typename Mlp<Scalar>::Vector grad;
};

template <class Scalar>
MseResult<Scalar> mse_loss(const typename Mlp<Scalar>::Vector& q, const typename Mlp<Scalar>::Vector& y);

template <class Scalar>
struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  typename Mlp<Scalar>::Gradients m;
  typename Mlp<Scalar>::Gradients v;

  explicit AdamState(const Mlp<Scalar>& net, double learning_rate = 0.01);
};

// Bias-corrected Adam update in place.
template <class Scalar>
void adam_step(Mlp<Scalar>& net, const typename Mlp<Scalar>::Gradients& grads, AdamState<Scalar>& st);

extern template class Mlp<float>;
extern template class Mlp<double>;

}  // namespace cryoplan
