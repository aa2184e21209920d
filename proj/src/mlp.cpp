#include "jcas/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace jcas {

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_deriv_from_output(double post) { return post > 0.0 ? 1.0 : post + 1.0; }
double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Head head_from_string(const std::string& s) {
  if (s == "linear") return Head::linear;
  if (s == "sigmoid_offset") return Head::sigmoid_offset;
  if (s == "scaled_tanh") return Head::scaled_tanh;
  if (s == "power_normalized") return Head::power_normalized;
  throw std::invalid_argument("unknown head tag: " + s);
}

std::string head_to_string(Head h) {
  switch (h) {
    case Head::linear: return "linear";
    case Head::sigmoid_offset: return "sigmoid_offset";
    case Head::scaled_tanh: return "scaled_tanh";
    case Head::power_normalized: return "power_normalized";
  }
  throw std::logic_error("head_to_string: bad enum");
}

void MlpGrads::scale(double s) {
  for (auto& m : w)
    for (auto& x : m.a) x *= s;
  for (auto& v : b)
    for (auto& x : v) x *= s;
}

void MlpGrads::add(const MlpGrads& other, double s) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (std::size_t i = 0; i < w[l].a.size(); ++i) w[l].a[i] += s * other.w[l].a[i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += s * other.b[l][i];
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  g.w.reserve(w.size());
  g.b.reserve(b.size());
  for (std::size_t l = 0; l < w.size(); ++l) {
    g.w.emplace_back(w[l].rows, w[l].cols);
    g.b.emplace_back(b[l].size(), 0.0);
  }
  return g;
}

std::uint64_t Mlp::param_hash() const {
  // FNV-1a over raw parameter bytes
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto absorb = [&h](const double* p, std::size_t n) {
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  };
  for (const auto& m : w) absorb(m.a.data(), m.a.size());
  for (const auto& v : b) absorb(v.data(), v.size());
  return h;
}

double Mlp::get_param(std::size_t flat_index) const {
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (flat_index < w[l].a.size()) return w[l].a[flat_index];
    flat_index -= w[l].a.size();
    if (flat_index < b[l].size()) return b[l][flat_index];
    flat_index -= b[l].size();
  }
  throw std::out_of_range("Mlp::get_param");
}

void Mlp::set_param(std::size_t flat_index, double value) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (flat_index < w[l].a.size()) {
      w[l].a[flat_index] = value;
      ++stamp;
      return;
    }
    flat_index -= w[l].a.size();
    if (flat_index < b[l].size()) {
      b[l][flat_index] = value;
      ++stamp;
      return;
    }
    flat_index -= b[l].size();
  }
  throw std::out_of_range("Mlp::set_param");
}

Mlp mlp_init(const std::vector<std::size_t>& sizes, Head head, RngStream& rng) {
  if (sizes.size() < 3) throw std::invalid_argument("mlp_init: need at least one hidden layer");
  for (auto s : sizes)
    if (s == 0) throw std::invalid_argument("mlp_init: zero-width layer");
  Mlp net;
  net.sizes = sizes;
  net.head = head;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    RealMat wl(sizes[l], sizes[l + 1]);
    const double lim = std::sqrt(3.0 / static_cast<double>(sizes[l]));  // Var = 1/fan_in
    for (auto& x : wl.a) x = rng.uniform(-lim, lim);
    net.w.push_back(std::move(wl));
    net.b.emplace_back(sizes[l + 1], 0.0);
  }
  return net;
}

Tape mlp_forward(const Mlp& net, RealMat batch, std::span<const double> offsets) {
  if (batch.cols != net.input_dim())
    throw std::invalid_argument("mlp_forward: batch width does not match input layer");
  Tape tape;
  tape.net_stamp = net.stamp;
  tape.input = std::move(batch);

  const RealMat* cur = &tape.input;
  const std::size_t n_layers = net.w.size();
  tape.post.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const RealMat& w = net.w[l];
    RealMat out(cur->rows, w.cols);
    for (std::size_t r = 0; r < out.rows; ++r) {
      double* orow = &out.a[r * out.cols];
      for (std::size_t c = 0; c < out.cols; ++c) orow[c] = net.b[l][c];
      const double* irow = &cur->a[r * cur->cols];
      for (std::size_t i = 0; i < w.rows; ++i) {
        const double xi = irow[i];
        if (xi == 0.0) continue;
        const double* wrow = &w.a[i * w.cols];
        for (std::size_t c = 0; c < out.cols; ++c) orow[c] += xi * wrow[c];
      }
    }
    const bool hidden = (l + 1 < n_layers);
    if (hidden)
      for (auto& x : out.a) x = elu(x);
    tape.post.push_back(std::move(out));
    cur = &tape.post.back();
  }

  const RealMat& raw = tape.post.back();
  tape.head_out = raw;
  switch (net.head) {
    case Head::linear:
      break;
    case Head::sigmoid_offset: {
      if (offsets.size() != raw.rows)
        throw std::invalid_argument("mlp_forward: sigmoid_offset head needs one offset per row");
      tape.offsets.assign(offsets.begin(), offsets.end());
      for (std::size_t r = 0; r < raw.rows; ++r)
        for (std::size_t c = 0; c < raw.cols; ++c)
          tape.head_out(r, c) = sigmoid(raw(r, c) + tape.offsets[r]);
      break;
    }
    case Head::scaled_tanh:
      for (auto& x : tape.head_out.a) x = 0.5 * M_PI * std::tanh(x);
      break;
    case Head::power_normalized: {
      double p = 0.0;
      for (double x : raw.a) p += x * x;
      p /= static_cast<double>(raw.rows);
      const double scale = p > 0.0 ? 1.0 / std::sqrt(p) : 0.0;
      tape.power_scale = scale;
      for (auto& x : tape.head_out.a) x *= scale;
      break;
    }
  }
  return tape;
}

namespace {

MlpGrads backward_from_delta(const Mlp& net, const Tape& tape, RealMat delta,
                             RealMat* input_grads);

}  // namespace

MlpGrads mlp_backward(const Mlp& net, const Tape& tape, const RealMat& head_out_grads,
                      RealMat* input_grads) {
  if (tape.net_stamp != net.stamp)
    throw std::logic_error("mlp_backward: tape is stale (parameters changed since forward)");
  if (tape.consumed) throw std::logic_error("mlp_backward: tape already consumed");
  tape.consumed = true;
  if (head_out_grads.rows != tape.head_out.rows || head_out_grads.cols != tape.head_out.cols)
    throw std::logic_error("mlp_backward: gradient shape mismatch");

  const RealMat& raw = tape.post.back();

  // head output grads -> raw output grads
  RealMat delta(raw.rows, raw.cols);
  switch (net.head) {
    case Head::linear:
      delta = head_out_grads;
      break;
    case Head::sigmoid_offset:
      for (std::size_t i = 0; i < delta.a.size(); ++i) {
        const double p = tape.head_out.a[i];
        delta.a[i] = head_out_grads.a[i] * p * (1.0 - p);
      }
      break;
    case Head::scaled_tanh:
      for (std::size_t i = 0; i < delta.a.size(); ++i) {
        const double t = tape.head_out.a[i] / (0.5 * M_PI);
        delta.a[i] = head_out_grads.a[i] * 0.5 * M_PI * (1.0 - t * t);
      }
      break;
    case Head::power_normalized: {
      // x = u * s, s = 1/sqrt(mean_r sum_c u^2); dL/du = s*(g - u * <g,u> / (B*p))
      const double s = tape.power_scale;
      const double batch = static_cast<double>(raw.rows);
      double dot = 0.0;
      for (std::size_t i = 0; i < raw.a.size(); ++i) dot += head_out_grads.a[i] * raw.a[i];
      double p = 0.0;
      for (double x : raw.a) p += x * x;
      p /= batch;
      const double coef = p > 0.0 ? dot / (batch * p) : 0.0;
      for (std::size_t i = 0; i < raw.a.size(); ++i)
        delta.a[i] = s * (head_out_grads.a[i] - raw.a[i] * coef);
      break;
    }
  }
  return backward_from_delta(net, tape, std::move(delta), input_grads);
}

MlpGrads mlp_backward_raw(const Mlp& net, const Tape& tape, const RealMat& raw_out_grads,
                          RealMat* input_grads) {
  if (tape.net_stamp != net.stamp)
    throw std::logic_error("mlp_backward_raw: tape is stale (parameters changed since forward)");
  if (tape.consumed) throw std::logic_error("mlp_backward_raw: tape already consumed");
  tape.consumed = true;
  const RealMat& raw = tape.post.back();
  if (raw_out_grads.rows != raw.rows || raw_out_grads.cols != raw.cols)
    throw std::logic_error("mlp_backward_raw: gradient shape mismatch");
  return backward_from_delta(net, tape, raw_out_grads, input_grads);
}

namespace {

MlpGrads backward_from_delta(const Mlp& net, const Tape& tape, RealMat delta,
                             RealMat* input_grads) {
  MlpGrads grads = net.zero_grads();
  const std::size_t n_layers = net.w.size();
  for (std::size_t l = n_layers; l-- > 0;) {
    const RealMat& inp = (l == 0) ? tape.input : tape.post[l - 1];
    // bias grads
    for (std::size_t r = 0; r < delta.rows; ++r)
      for (std::size_t c = 0; c < delta.cols; ++c) grads.b[l][c] += delta(r, c);
    // weight grads: inp^T * delta
    RealMat& gw = grads.w[l];
    for (std::size_t r = 0; r < delta.rows; ++r) {
      const double* irow = &inp.a[r * inp.cols];
      const double* drow = &delta.a[r * delta.cols];
      for (std::size_t i = 0; i < inp.cols; ++i) {
        const double xi = irow[i];
        if (xi == 0.0) continue;
        double* grow = &gw.a[i * gw.cols];
        for (std::size_t c = 0; c < delta.cols; ++c) grow[c] += xi * drow[c];
      }
    }
    if (l == 0 && input_grads == nullptr) break;
    // delta for the previous layer: (delta * W^T) .* act'
    RealMat prev(delta.rows, net.w[l].rows);
    const RealMat& w = net.w[l];
    for (std::size_t r = 0; r < delta.rows; ++r) {
      const double* drow = &delta.a[r * delta.cols];
      double* prow = &prev.a[r * prev.cols];
      for (std::size_t i = 0; i < w.rows; ++i) {
        const double* wrow = &w.a[i * w.cols];
        double s = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) s += drow[c] * wrow[c];
        prow[i] = s;
      }
    }
    if (l == 0) {
      *input_grads = std::move(prev);
      break;
    }
    const RealMat& act = tape.post[l - 1];
    for (std::size_t i = 0; i < prev.a.size(); ++i) prev.a[i] *= elu_deriv_from_output(act.a[i]);
    delta = std::move(prev);
  }
  return grads;
}

}  // namespace

AdamState adam_init(const Mlp& net, double lr) {
  AdamState st;
  st.lr = lr;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    st.m_w.emplace_back(net.w[l].rows, net.w[l].cols);
    st.v_w.emplace_back(net.w[l].rows, net.w[l].cols);
    st.m_b.emplace_back(net.b[l].size(), 0.0);
    st.v_b.emplace_back(net.b[l].size(), 0.0);
  }
  return st;
}

void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state) {
  if (grads.w.size() != net.w.size()) throw std::logic_error("adam_step: gradient layout mismatch");
  for (std::size_t l = 0; l < net.w.size(); ++l)
    if (grads.w[l].a.size() != net.w[l].a.size() || grads.b[l].size() != net.b[l].size())
      throw std::logic_error("adam_step: gradient shape mismatch");

  state.step += 1;
  const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto update = [&](double& p, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double mhat = m / b1t;
    const double vhat = v / b2t;
    p -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  };
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    for (std::size_t i = 0; i < net.w[l].a.size(); ++i)
      update(net.w[l].a[i], grads.w[l].a[i], state.m_w[l].a[i], state.v_w[l].a[i]);
    for (std::size_t i = 0; i < net.b[l].size(); ++i)
      update(net.b[l][i], grads.b[l][i], state.m_b[l][i], state.v_b[l][i]);
  }
  ++net.stamp;
}

}  // namespace jcas
