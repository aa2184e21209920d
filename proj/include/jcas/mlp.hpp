#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jcas/rng.hpp"

namespace jcas {

/// Dense real matrix, row-major; rows are batch entries.
struct RealMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  RealMat() = default;
  RealMat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

/// Output nonlinearity of a network.
///   linear:           raw outputs
///   sigmoid_offset:   sigma(s + tau) with a per-row offset
///   scaled_tanh:      (pi/2) * tanh(s), bounded angle estimate
///   power_normalized: whole output batch scaled to unit mean row power
///                     (modulator alphabet, precoder weights)
enum class Head { linear, sigmoid_offset, scaled_tanh, power_normalized };

Head head_from_string(const std::string& s);
std::string head_to_string(Head h);

/// Forward intermediates for one batch; consumed by exactly one backward pass.
struct Tape {
  RealMat input;
  std::vector<RealMat> post;  // post-activation per layer; last entry = raw head input
  RealMat head_out;
  std::vector<double> offsets;   // sigmoid_offset rows
  double power_scale = 1.0;      // power_normalized: 1/sqrt(mean row power)
  std::uint64_t net_stamp = 0;
  mutable bool consumed = false;
};

struct MlpGrads {
  std::vector<RealMat> w;
  std::vector<std::vector<double>> b;

  void scale(double s);
  void add(const MlpGrads& other, double s = 1.0);
};

/// Fully connected network, ELU hidden activations.
struct Mlp {
  std::vector<std::size_t> sizes;  // input, hidden..., output
  std::vector<RealMat> w;          // [l]: sizes[l] x sizes[l+1]
  std::vector<std::vector<double>> b;
  Head head = Head::linear;
  std::uint64_t stamp = 0;  // bumped on every parameter update

  std::size_t input_dim() const { return sizes.front(); }
  std::size_t output_dim() const { return sizes.back(); }
  std::size_t param_count() const;
  MlpGrads zero_grads() const;
  std::uint64_t param_hash() const;

  // flat parameter access for gradient checks
  double get_param(std::size_t flat_index) const;
  void set_param(std::size_t flat_index, double value);
};

/// Weights uniform with fan-in variance scaling, biases zero.
Mlp mlp_init(const std::vector<std::size_t>& sizes, Head head, RngStream& rng);

/// Runs the batch through the net. `offsets` is required (one per row) for
/// the sigmoid_offset head and ignored otherwise.
Tape mlp_forward(const Mlp& net, RealMat batch, std::span<const double> offsets = {});

/// Reverse pass. `head_out_grads` holds dL/d(head output). Returns parameter
/// gradients; optionally writes dL/d(input) for upstream chaining. A tape can
/// be consumed once and must match the current parameters.
MlpGrads mlp_backward(const Mlp& net, const Tape& tape, const RealMat& head_out_grads,
                      RealMat* input_grads = nullptr);

/// Reverse pass with gradients given w.r.t. the raw (pre-head) outputs.
/// Lets losses fuse the head nonlinearity (sigmoid + cross-entropy) where
/// the chained form would lose precision at saturation.
MlpGrads mlp_backward_raw(const Mlp& net, const Tape& tape, const RealMat& raw_out_grads,
                          RealMat* input_grads = nullptr);

struct AdamState {
  std::vector<RealMat> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  std::uint64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState adam_init(const Mlp& net, double lr);

/// Standard Adam update with bias correction; parameters change in place.
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state);

double elu(double x);
double elu_deriv_from_output(double post);  // ELU'(x) recovered from ELU(x)
double sigmoid(double x);

}  // namespace jcas
