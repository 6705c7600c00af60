#include "activetrack/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "activetrack/errors.hpp"

namespace activetrack {

int NetConfig::actor_outputs() const {
  return action_space == ActionSpace::kContinuous2 ? 2 : action_count(action_space);
}

void NetConfig::validate() const {
  auto bad = [](const std::string& what) { throw ShapeMismatch(what); };
  if (in_width <= 0 || in_height <= 0 || in_channels <= 0) bad("input dimensions must be positive");
  for (const ConvSpec* c : {&conv1, &conv2}) {
    if (c->filters <= 0 || c->kernel <= 0 || c->stride <= 0) bad("conv sizes must be positive");
  }
  if (in_width < conv1.kernel || in_height < conv1.kernel) bad("input smaller than conv1 kernel");
  if (conv1_width() < conv2.kernel || conv1_height() < conv2.kernel)
    bad("conv1 output smaller than conv2 kernel");
  if (fc <= 0 || lstm <= 0) bad("fc and lstm sizes must be positive");
}

// ---------------------------------------------------------------------------
// Parameter container

NetworkParams::NetworkParams(const NetConfig& config) : config_(config) {
  config_.validate();
  auto add = [&](std::string name, std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    blocks_.push_back({std::move(name), std::move(shape), data_.size(), n});
    data_.resize(data_.size() + n, 0.0);
  };
  const auto& c = config_;
  add("conv1.weight", {c.conv1.filters, c.in_channels, c.conv1.kernel, c.conv1.kernel});
  add("conv1.bias", {c.conv1.filters});
  add("conv2.weight", {c.conv2.filters, c.conv1.filters, c.conv2.kernel, c.conv2.kernel});
  add("conv2.bias", {c.conv2.filters});
  add("fc.weight", {c.fc, c.flat_size()});
  add("fc.bias", {c.fc});
  add("lstm.weight_ih", {4 * c.lstm, c.fc});
  add("lstm.weight_hh", {4 * c.lstm, c.lstm});
  add("lstm.bias", {4 * c.lstm});
  if (c.action_space == ActionSpace::kContinuous2) {
    add("actor_mean.weight", {2, c.lstm});
    add("actor_mean.bias", {2});
    add("actor_std.weight", {2, c.lstm});
    add("actor_std.bias", {2});
  } else {
    add("actor.weight", {c.actor_outputs(), c.lstm});
    add("actor.bias", {c.actor_outputs()});
  }
  add("critic.weight", {1, c.lstm});
  add("critic.bias", {1});
}

const TensorInfo& NetworkParams::info(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw ShapeMismatch("no parameter block named " + name);
}

std::span<double> NetworkParams::block(const std::string& name) {
  const auto& i = info(name);
  return {data_.data() + i.offset, i.size};
}

std::span<const double> NetworkParams::block(const std::string& name) const {
  const auto& i = info(name);
  return {data_.data() + i.offset, i.size};
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z = *this;
  std::fill(z.data_.begin(), z.data_.end(), 0.0);
  return z;
}

bool NetworkParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t NetworkParams::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(data_.data());
  for (size_t i = 0; i < data_.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

NetworkParams init_params(const NetConfig& config, std::uint64_t seed) {
  NetworkParams p(config);
  std::mt19937_64 rng(seed);
  auto uniform_fill = [&](std::span<double> w, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : w) v = u(rng);
  };
  const auto& c = config;
  const int fan1 = c.in_channels * c.conv1.kernel * c.conv1.kernel;
  const int fan2 = c.conv1.filters * c.conv2.kernel * c.conv2.kernel;
  uniform_fill(p.block("conv1.weight"), std::sqrt(6.0 / fan1));
  uniform_fill(p.block("conv2.weight"), std::sqrt(6.0 / fan2));
  uniform_fill(p.block("fc.weight"), std::sqrt(6.0 / c.flat_size()));
  uniform_fill(p.block("lstm.weight_ih"), 1.0 / std::sqrt(static_cast<double>(c.fc)));

  // Orthogonal rows per gate block of the recurrent matrix.
  auto whh = p.block("lstm.weight_hh");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int H = c.lstm;
  for (int gate = 0; gate < 4; ++gate) {
    double* m = whh.data() + static_cast<size_t>(gate) * H * H;
    for (int i = 0; i < H * H; ++i) m[i] = gauss(rng);
    for (int r = 0; r < H; ++r) {
      double* row = m + static_cast<size_t>(r) * H;
      for (int q = 0; q < r; ++q) {
        const double* prev = m + static_cast<size_t>(q) * H;
        double d = 0.0;
        for (int k = 0; k < H; ++k) d += row[k] * prev[k];
        for (int k = 0; k < H; ++k) row[k] -= d * prev[k];
      }
      double n = 0.0;
      for (int k = 0; k < H; ++k) n += row[k] * row[k];
      n = std::sqrt(n);
      for (int k = 0; k < H; ++k) row[k] /= n;
    }
  }

  auto scaled_rows = [&](std::span<double> w, int rows, double scale) {
    for (auto& v : w) v = gauss(rng);
    const int cols = static_cast<int>(w.size()) / rows;
    for (int r = 0; r < rows; ++r) {
      double n = 0.0;
      for (int k = 0; k < cols; ++k) n += w[r * cols + k] * w[r * cols + k];
      n = std::sqrt(n);
      for (int k = 0; k < cols; ++k) w[r * cols + k] *= scale / n;
    }
  };
  if (c.action_space == ActionSpace::kContinuous2) {
    scaled_rows(p.block("actor_mean.weight"), 2, 0.01);
    scaled_rows(p.block("actor_std.weight"), 2, 0.01);
  } else {
    scaled_rows(p.block("actor.weight"), c.actor_outputs(), 0.01);
  }
  scaled_rows(p.block("critic.weight"), 1, 1.0);
  return p;
}

// ---------------------------------------------------------------------------
// Layer kernels

namespace {

struct Weights {
  const double* c1w;
  const double* c1b;
  const double* c2w;
  const double* c2b;
  const double* fcw;
  const double* fcb;
  const double* wih;
  const double* whh;
  const double* lb;
  const double* aw;   // actor (or mean) weights
  const double* ab;
  const double* sw;   // std weights, continuous only
  const double* sb;
  const double* cw;
  const double* cb;
};

template <class P>
auto weight_view(P& params) {
  auto ptr = [&](const char* name) { return params.block(name).data(); };
  const bool cont = params.config().action_space == ActionSpace::kContinuous2;
  using Ptr = decltype(ptr("conv1.weight"));
  struct View {
    Ptr c1w, c1b, c2w, c2b, fcw, fcb, wih, whh, lb, aw, ab, sw, sb, cw, cb;
  };
  return View{ptr("conv1.weight"), ptr("conv1.bias"), ptr("conv2.weight"), ptr("conv2.bias"),
              ptr("fc.weight"),    ptr("fc.bias"),    ptr("lstm.weight_ih"), ptr("lstm.weight_hh"),
              ptr("lstm.bias"),
              cont ? ptr("actor_mean.weight") : ptr("actor.weight"),
              cont ? ptr("actor_mean.bias") : ptr("actor.bias"),
              cont ? ptr("actor_std.weight") : nullptr, cont ? ptr("actor_std.bias") : nullptr,
              ptr("critic.weight"), ptr("critic.bias")};
}

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gather_patch(const double* in, int C, int Hin, int Win, int k, int y0, int x0, double* patch) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      const double* row = in + (static_cast<size_t>(c) * Hin + y0 + ky) * Win + x0;
      std::memcpy(patch, row, sizeof(double) * k);
      patch += k;
    }
  }
}

void scatter_patch(const double* patch, int C, int Hin, int Win, int k, int y0, int x0, double* out) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      double* row = out + (static_cast<size_t>(c) * Hin + y0 + ky) * Win + x0;
      for (int kx = 0; kx < k; ++kx) row[kx] += *patch++;
    }
  }
}

void conv_forward(const double* in, int C, int Hin, int Win, const double* w, const double* b,
                  int F, int k, int s, double* out) {
  const int Ho = (Hin - k) / s + 1, Wo = (Win - k) / s + 1;
  const int P = C * k * k;
  std::vector<double> patch(P);
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      gather_patch(in, C, Hin, Win, k, oy * s, ox * s, patch.data());
      for (int f = 0; f < F; ++f)
        out[(static_cast<size_t>(f) * Ho + oy) * Wo + ox] = b[f] + dot(w + static_cast<size_t>(f) * P, patch.data(), P);
    }
  }
}

// Accumulates dW, db (when non-null) and din (when non-null) from dout.
void conv_backward(const double* in, int C, int Hin, int Win, const double* w, int F, int k, int s,
                   const double* dout, double* dw, double* db, double* din) {
  const int Ho = (Hin - k) / s + 1, Wo = (Win - k) / s + 1;
  const int P = C * k * k;
  std::vector<double> patch(P), dpatch(P);
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      bool any = false;
      for (int f = 0; f < F && !any; ++f) any = dout[(static_cast<size_t>(f) * Ho + oy) * Wo + ox] != 0.0;
      if (!any) continue;
      if (dw) gather_patch(in, C, Hin, Win, k, oy * s, ox * s, patch.data());
      if (din) std::fill(dpatch.begin(), dpatch.end(), 0.0);
      for (int f = 0; f < F; ++f) {
        const double g = dout[(static_cast<size_t>(f) * Ho + oy) * Wo + ox];
        if (g == 0.0) continue;
        if (db) db[f] += g;
        if (dw) {
          double* dwf = dw + static_cast<size_t>(f) * P;
          for (int j = 0; j < P; ++j) dwf[j] += g * patch[j];
        }
        if (din) {
          const double* wf = w + static_cast<size_t>(f) * P;
          for (int j = 0; j < P; ++j) dpatch[j] += g * wf[j];
        }
      }
      if (din) scatter_patch(dpatch.data(), C, Hin, Win, k, oy * s, ox * s, din);
    }
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

void relu(const std::vector<double>& z, std::vector<double>& a) {
  a.resize(z.size());
  for (size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void check_rec(const NetConfig& c, const RecurrentState& rec) {
  if (rec.h.size() != static_cast<size_t>(c.lstm) || rec.c.size() != static_cast<size_t>(c.lstm))
    throw ShapeMismatch("recurrent state size does not match the LSTM width");
}

}  // namespace

std::vector<double> to_input(const NetConfig& c, std::span<const float> rgb) {
  const size_t n = static_cast<size_t>(c.in_width) * c.in_height * c.in_channels;
  if (rgb.size() != n)
    throw ShapeMismatch("observation has " + std::to_string(rgb.size()) + " values, network expects " +
                        std::to_string(n));
  std::vector<double> x(n);
  const size_t plane = static_cast<size_t>(c.in_width) * c.in_height;
  for (size_t p = 0; p < plane; ++p)
    for (int ch = 0; ch < c.in_channels; ++ch) x[ch * plane + p] = rgb[p * c.in_channels + ch];
  return x;
}

void forward_cached(const NetworkParams& params, std::vector<double> input,
                    const RecurrentState& rec, StepCache& k) {
  const NetConfig& c = params.config();
  check_rec(c, rec);
  if (input.size() != static_cast<size_t>(c.in_width) * c.in_height * c.in_channels)
    throw ShapeMismatch("input size does not match the network");
  const auto w = weight_view(params);
  k.input = std::move(input);

  const int H1 = c.conv1_height(), W1 = c.conv1_width();
  k.z1.assign(static_cast<size_t>(c.conv1.filters) * H1 * W1, 0.0);
  conv_forward(k.input.data(), c.in_channels, c.in_height, c.in_width, w.c1w, w.c1b, c.conv1.filters,
               c.conv1.kernel, c.conv1.stride, k.z1.data());
  relu(k.z1, k.a1);

  k.z2.assign(static_cast<size_t>(c.flat_size()), 0.0);
  conv_forward(k.a1.data(), c.conv1.filters, H1, W1, w.c2w, w.c2b, c.conv2.filters, c.conv2.kernel,
               c.conv2.stride, k.z2.data());
  relu(k.z2, k.a2);

  const int flat = c.flat_size();
  k.z3.resize(c.fc);
  for (int o = 0; o < c.fc; ++o) k.z3[o] = w.fcb[o] + dot(w.fcw + static_cast<size_t>(o) * flat, k.a2.data(), flat);
  relu(k.z3, k.a3);

  const int H = c.lstm;
  k.h_prev = rec.h;
  k.c_prev = rec.c;
  k.gates.resize(4 * static_cast<size_t>(H));
  for (int r = 0; r < 4 * H; ++r) {
    k.gates[r] = w.lb[r] + dot(w.wih + static_cast<size_t>(r) * c.fc, k.a3.data(), c.fc) +
                 dot(w.whh + static_cast<size_t>(r) * H, rec.h.data(), H);
  }
  for (int j = 0; j < H; ++j) {
    k.gates[j] = sigmoid(k.gates[j]);
    k.gates[H + j] = sigmoid(k.gates[H + j]);
    k.gates[2 * H + j] = std::tanh(k.gates[2 * H + j]);
    k.gates[3 * H + j] = sigmoid(k.gates[3 * H + j]);
  }
  k.c.resize(H);
  k.tanh_c.resize(H);
  k.h.resize(H);
  for (int j = 0; j < H; ++j) {
    k.c[j] = k.gates[H + j] * rec.c[j] + k.gates[j] * k.gates[2 * H + j];
    k.tanh_c[j] = std::tanh(k.c[j]);
    k.h[j] = k.gates[3 * H + j] * k.tanh_c[j];
  }

  PolicyOutput& out = k.out;
  out.space = c.action_space;
  out.value = w.cb[0] + dot(w.cw, k.h.data(), H);
  if (c.action_space == ActionSpace::kContinuous2) {
    k.std_pre.resize(2);
    for (int d = 0; d < 2; ++d) {
      out.mean[d] = w.ab[d] + dot(w.aw + static_cast<size_t>(d) * H, k.h.data(), H);
      k.std_pre[d] = w.sb[d] + dot(w.sw + static_cast<size_t>(d) * H, k.h.data(), H);
      out.std[d] = softplus(k.std_pre[d]) + kMinStd;
    }
    out.logits.clear();
    out.probs.clear();
  } else {
    const int K = c.actor_outputs();
    out.logits.resize(K);
    for (int a = 0; a < K; ++a) out.logits[a] = w.ab[a] + dot(w.aw + static_cast<size_t>(a) * H, k.h.data(), H);
    const double m = *std::max_element(out.logits.begin(), out.logits.end());
    double sum = 0.0;
    for (double l : out.logits) sum += std::exp(l - m);
    const double lse = m + std::log(sum);
    out.probs.resize(K);
    for (int a = 0; a < K; ++a) out.probs[a] = std::exp(out.logits[a] - lse);
  }
  out.next = {k.h, k.c};
}

PolicyOutput forward(const NetworkParams& params, std::span<const float> rgb_hwc,
                     const RecurrentState& rec) {
  StepCache cache;
  forward_cached(params, to_input(params.config(), rgb_hwc), rec, cache);
  return std::move(cache.out);
}

namespace {

double log_softmax_at(const std::vector<double>& logits, int a) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return logits[a] - m - std::log(sum);
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

}  // namespace

double log_prob(const PolicyOutput& p, const Action& a) {
  if (p.space == ActionSpace::kContinuous2) {
    const double v[2] = {a.linear, a.angular};
    double lp = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double u = (v[d] - p.mean[d]) / p.std[d];
      lp += -0.5 * u * u - std::log(p.std[d]) - kHalfLog2Pi;
    }
    return lp;
  }
  return log_softmax_at(p.logits, a.index);
}

double entropy(const PolicyOutput& p) {
  if (p.space == ActionSpace::kContinuous2) {
    double h = 0.0;
    for (int d = 0; d < 2; ++d) h += 0.5 + kHalfLog2Pi + std::log(p.std[d]);
    return h;
  }
  double h = 0.0;
  for (size_t a = 0; a < p.logits.size(); ++a) {
    if (p.probs[a] > 0.0) h -= p.probs[a] * log_softmax_at(p.logits, static_cast<int>(a));
  }
  return h;
}

namespace {

// Backprop of one step below the heads. `dh` is the total gradient reaching
// h_t, `dc` the gradient reaching c_t from step t+1. On return they hold the
// gradients for h_{t-1} and c_{t-1}. Parameter gradients go into `grads`
// when non-null; the input gradient into `dinput` when non-null.
void trunk_backward(const NetworkParams& params, const StepCache& k, std::vector<double>& dh,
                    std::vector<double>& dc, NetworkParams* grads, std::vector<double>* dinput) {
  const NetConfig& c = params.config();
  const auto w = weight_view(params);
  const int H = c.lstm;
  std::vector<double> dz(4 * static_cast<size_t>(H));
  std::vector<double> dc_prev(H);
  for (int j = 0; j < H; ++j) {
    const double i = k.gates[j], f = k.gates[H + j], g = k.gates[2 * H + j], o = k.gates[3 * H + j];
    const double tc = k.tanh_c[j];
    const double d_o = dh[j] * tc;
    const double dcell = dc[j] + dh[j] * o * (1.0 - tc * tc);
    dz[j] = dcell * g * i * (1.0 - i);
    dz[H + j] = dcell * k.c_prev[j] * f * (1.0 - f);
    dz[2 * H + j] = dcell * i * (1.0 - g * g);
    dz[3 * H + j] = d_o * o * (1.0 - o);
    dc_prev[j] = dcell * f;
  }
  std::vector<double> dx(c.fc, 0.0);
  std::vector<double> dh_prev(H, 0.0);
  for (int r = 0; r < 4 * H; ++r) {
    const double g = dz[r];
    if (g == 0.0) continue;
    const double* wi = w.wih + static_cast<size_t>(r) * c.fc;
    const double* wh = w.whh + static_cast<size_t>(r) * H;
    for (int q = 0; q < c.fc; ++q) dx[q] += g * wi[q];
    for (int q = 0; q < H; ++q) dh_prev[q] += g * wh[q];
  }
  if (grads) {
    auto gw = weight_view(*grads);
    double* gwih = const_cast<double*>(gw.wih);
    double* gwhh = const_cast<double*>(gw.whh);
    double* glb = const_cast<double*>(gw.lb);
    for (int r = 0; r < 4 * H; ++r) {
      const double g = dz[r];
      if (g == 0.0) continue;
      glb[r] += g;
      double* gi = gwih + static_cast<size_t>(r) * c.fc;
      double* gh = gwhh + static_cast<size_t>(r) * H;
      for (int q = 0; q < c.fc; ++q) gi[q] += g * k.a3[q];
      for (int q = 0; q < H; ++q) gh[q] += g * k.h_prev[q];
    }
  }
  dh = std::move(dh_prev);
  dc = std::move(dc_prev);

  // fc
  const int flat = c.flat_size();
  std::vector<double> da2(flat, 0.0);
  for (int o = 0; o < c.fc; ++o) {
    const double g = k.z3[o] > 0.0 ? dx[o] : 0.0;
    if (g == 0.0) continue;
    const double* row = w.fcw + static_cast<size_t>(o) * flat;
    for (int q = 0; q < flat; ++q) da2[q] += g * row[q];
    if (grads) {
      auto gw = weight_view(*grads);
      const_cast<double*>(gw.fcb)[o] += g;
      double* grow = const_cast<double*>(gw.fcw) + static_cast<size_t>(o) * flat;
      for (int q = 0; q < flat; ++q) grow[q] += g * k.a2[q];
    }
  }
  for (int q = 0; q < flat; ++q)
    if (!(k.z2[q] > 0.0)) da2[q] = 0.0;

  // conv2
  const int H1 = c.conv1_height(), W1 = c.conv1_width();
  std::vector<double> da1(k.a1.size(), 0.0);
  double* gc2w = nullptr;
  double* gc2b = nullptr;
  double* gc1w = nullptr;
  double* gc1b = nullptr;
  if (grads) {
    auto gw = weight_view(*grads);
    gc2w = const_cast<double*>(gw.c2w);
    gc2b = const_cast<double*>(gw.c2b);
    gc1w = const_cast<double*>(gw.c1w);
    gc1b = const_cast<double*>(gw.c1b);
  }
  conv_backward(k.a1.data(), c.conv1.filters, H1, W1, w.c2w, c.conv2.filters, c.conv2.kernel,
                c.conv2.stride, da2.data(), gc2w, gc2b, da1.data());
  for (size_t q = 0; q < da1.size(); ++q)
    if (!(k.z1[q] > 0.0)) da1[q] = 0.0;

  // conv1
  if (dinput) dinput->assign(k.input.size(), 0.0);
  conv_backward(k.input.data(), c.in_channels, c.in_height, c.in_width, w.c1w, c.conv1.filters,
                c.conv1.kernel, c.conv1.stride, da1.data(), gc1w, gc1b,
                dinput ? dinput->data() : nullptr);
}

// Gradient of the per-step loss w.r.t. the head outputs, pushed into dh and
// the head parameter gradients. Returns the step's loss components.
LossBreakdown head_backward(const NetworkParams& params, const StepCache& k, const Action& action,
                            const StepTarget& t, std::vector<double>& dh, NetworkParams& grads) {
  const NetConfig& c = params.config();
  const auto w = weight_view(params);
  auto gw = weight_view(grads);
  const int H = c.lstm;
  const PolicyOutput& out = k.out;
  LossBreakdown L;

  // critic
  const double dv = -t.value_weight * (t.value_target - out.value);
  L.value = 0.5 * t.value_weight * (t.value_target - out.value) * (t.value_target - out.value);
  const_cast<double*>(gw.cb)[0] += dv;
  for (int j = 0; j < H; ++j) {
    const_cast<double*>(gw.cw)[j] += dv * k.h[j];
    dh[j] += dv * w.cw[j];
  }

  const double logp = log_prob(out, action);
  const double ent = entropy(out);
  L.policy = -t.advantage * logp;
  L.entropy = ent;
  L.total = L.policy - t.entropy_weight * ent + L.value;

  if (c.action_space == ActionSpace::kContinuous2) {
    const double v[2] = {action.linear, action.angular};
    for (int d = 0; d < 2; ++d) {
      const double sigma = out.std[d];
      const double u = (v[d] - out.mean[d]) / sigma;
      const double dmean = -t.advantage * u / sigma;
      const double dsigma = -t.advantage * (u * u - 1.0) / sigma - t.entropy_weight / sigma;
      const double dpre = dsigma * sigmoid(k.std_pre[d]);
      const_cast<double*>(gw.ab)[d] += dmean;
      const_cast<double*>(gw.sb)[d] += dpre;
      double* gaw = const_cast<double*>(gw.aw) + static_cast<size_t>(d) * H;
      double* gsw = const_cast<double*>(gw.sw) + static_cast<size_t>(d) * H;
      const double* aw = w.aw + static_cast<size_t>(d) * H;
      const double* sw = w.sw + static_cast<size_t>(d) * H;
      for (int j = 0; j < H; ++j) {
        gaw[j] += dmean * k.h[j];
        gsw[j] += dpre * k.h[j];
        dh[j] += dmean * aw[j] + dpre * sw[j];
      }
    }
  } else {
    const int K = c.actor_outputs();
    for (int a = 0; a < K; ++a) {
      const double pa = out.probs[a];
      const double la = log_softmax_at(out.logits, a);
      const double indicator = a == action.index ? 1.0 : 0.0;
      const double dlogit = -t.advantage * (indicator - pa) + t.entropy_weight * pa * (la + ent);
      if (dlogit == 0.0) continue;
      const_cast<double*>(gw.ab)[a] += dlogit;
      double* gaw = const_cast<double*>(gw.aw) + static_cast<size_t>(a) * H;
      const double* aw = w.aw + static_cast<size_t>(a) * H;
      for (int j = 0; j < H; ++j) {
        gaw[j] += dlogit * k.h[j];
        dh[j] += dlogit * aw[j];
      }
    }
  }
  return L;
}

}  // namespace

NetworkParams backward_from_cache(const NetworkParams& params, const std::vector<StepCache>& caches,
                                  const std::vector<Action>& actions,
                                  const std::vector<StepTarget>& targets, LossBreakdown* loss) {
  if (caches.empty()) throw ShapeMismatch("rollout must contain at least one step");
  if (caches.size() != actions.size() || caches.size() != targets.size())
    throw ShapeMismatch("rollout caches, actions and targets must align");
  NetworkParams grads = params.zeros_like();
  const int H = params.config().lstm;
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
  LossBreakdown total;
  for (size_t t = caches.size(); t-- > 0;) {
    std::vector<double> dh = dh_next;
    const LossBreakdown step = head_backward(params, caches[t], actions[t], targets[t], dh, grads);
    total.policy += step.policy;
    total.entropy += step.entropy;
    total.value += step.value;
    total.total += step.total;
    trunk_backward(params, caches[t], dh, dc_next, &grads, nullptr);
    dh_next = std::move(dh);
  }
  if (!std::isfinite(total.total)) throw NonFiniteLoss("rollout loss is not finite");
  if (!grads.all_finite()) throw NonFiniteLoss("gradient is not finite");
  if (loss) *loss = total;
  return grads;
}

NetworkParams backward(const NetworkParams& params, const std::vector<RolloutStep>& rollout,
                       const RecurrentState& rec, LossBreakdown* loss) {
  if (rollout.empty()) throw ShapeMismatch("rollout must contain at least one step");
  std::vector<StepCache> caches(rollout.size());
  std::vector<Action> actions;
  std::vector<StepTarget> targets;
  RecurrentState state = rec;
  for (size_t t = 0; t < rollout.size(); ++t) {
    forward_cached(params, to_input(params.config(), rollout[t].rgb), state, caches[t]);
    state = caches[t].out.next;
    actions.push_back(rollout[t].action);
    targets.push_back(rollout[t].target);
  }
  return backward_from_cache(params, caches, actions, targets, loss);
}

LossBreakdown rollout_loss(const NetworkParams& params, const std::vector<RolloutStep>& rollout,
                           const RecurrentState& rec) {
  LossBreakdown total;
  RecurrentState state = rec;
  for (const auto& step : rollout) {
    const PolicyOutput out = forward(params, step.rgb, state);
    const double logp = log_prob(out, step.action);
    const double ent = entropy(out);
    const double err = step.target.value_target - out.value;
    const double value = 0.5 * step.target.value_weight * err * err;
    total.policy += -step.target.advantage * logp;
    total.entropy += ent;
    total.value += value;
    total.total += -step.target.advantage * logp - step.target.entropy_weight * ent + value;
    state = out.next;
  }
  return total;
}

Action sample_action(const PolicyOutput& policy, std::mt19937_64& rng) {
  if (policy.space == ActionSpace::kContinuous2) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double lin = policy.mean[0] + policy.std[0] * gauss(rng);
    const double ang = policy.mean[1] + policy.std[1] * gauss(rng);
    return Action::continuous(std::clamp(lin, -1.0, 1.0), std::clamp(ang, -1.0, 1.0));
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  int last = 0;
  for (size_t a = 0; a < policy.probs.size(); ++a) {
    if (policy.probs[a] <= 0.0) continue;
    last = static_cast<int>(a);
    cum += policy.probs[a];
    if (u < cum) return Action::discrete(policy.space, static_cast<int>(a));
  }
  return Action::discrete(policy.space, last);
}

Action greedy_action(const PolicyOutput& policy) {
  if (policy.space == ActionSpace::kContinuous2) {
    return Action::continuous(std::clamp(policy.mean[0], -1.0, 1.0),
                              std::clamp(policy.mean[1], -1.0, 1.0));
  }
  const auto it = std::max_element(policy.probs.begin(), policy.probs.end());
  return Action::discrete(policy.space, static_cast<int>(it - policy.probs.begin()));
}

std::vector<double> saliency(const NetworkParams& params, std::span<const float> rgb_hwc,
                             const RecurrentState& rec, const Action& action) {
  const NetConfig& c = params.config();
  check_action(action);
  if (action.space != c.action_space) throw ShapeMismatch("action space differs from the network's");
  StepCache k;
  forward_cached(params, to_input(c, rgb_hwc), rec, k);
  const auto w = weight_view(params);
  const int H = c.lstm;
  std::vector<double> dh(H, 0.0), dc(H, 0.0);
  if (c.action_space == ActionSpace::kContinuous2) {
    const double v[2] = {action.linear, action.angular};
    for (int d = 0; d < 2; ++d) {
      const double sigma = k.out.std[d];
      const double u = (v[d] - k.out.mean[d]) / sigma;
      const double dmean = u / sigma;
      const double dpre = (u * u - 1.0) / sigma * sigmoid(k.std_pre[d]);
      for (int j = 0; j < H; ++j)
        dh[j] += dmean * w.aw[static_cast<size_t>(d) * H + j] + dpre * w.sw[static_cast<size_t>(d) * H + j];
    }
  } else {
    for (int j = 0; j < H; ++j) dh[j] = w.aw[static_cast<size_t>(action.index) * H + j];
  }
  std::vector<double> dinput;
  trunk_backward(params, k, dh, dc, nullptr, &dinput);

  const size_t plane = static_cast<size_t>(c.in_width) * c.in_height;
  std::vector<double> map(plane, 0.0);
  for (int ch = 0; ch < c.in_channels; ++ch)
    for (size_t p = 0; p < plane; ++p) map[p] = std::max(map[p], std::abs(dinput[ch * plane + p]));
  const double peak = *std::max_element(map.begin(), map.end());
  if (peak > 0.0)
    for (auto& v : map) v /= peak;
  return map;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string net_config_to_json(const NetConfig& c) {
  nlohmann::json j = {
      {"in_width", c.in_width},
      {"in_height", c.in_height},
      {"in_channels", c.in_channels},
      {"conv1", {{"filters", c.conv1.filters}, {"kernel", c.conv1.kernel}, {"stride", c.conv1.stride}}},
      {"conv2", {{"filters", c.conv2.filters}, {"kernel", c.conv2.kernel}, {"stride", c.conv2.stride}}},
      {"fc", c.fc},
      {"lstm", c.lstm},
      {"action_space", std::string(to_string(c.action_space))}};
  return j.dump();
}

NetConfig net_config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NetConfig c;
    c.in_width = j.at("in_width").get<int>();
    c.in_height = j.at("in_height").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
    auto conv = [](const nlohmann::json& v) {
      return ConvSpec{v.at("filters").get<int>(), v.at("kernel").get<int>(), v.at("stride").get<int>()};
    };
    c.conv1 = conv(j.at("conv1"));
    c.conv2 = conv(j.at("conv2"));
    c.fc = j.at("fc").get<int>();
    c.lstm = j.at("lstm").get<int>();
    c.action_space = action_space_from_string(j.at("action_space").get<std::string>());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed network config: ") + e.what());
  }
}

namespace {

constexpr char kMagic[8] = {'A', 'T', 'R', 'K', 'C', 'K', 'P', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > bytes.size()) throw FormatError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const NetworkParams& params) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, kCheckpointVersion);
  const std::string cfg = net_config_to_json(params.config());
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.insert(out.end(), cfg.begin(), cfg.end());
  put_u32(out, static_cast<std::uint32_t>(params.blocks().size()));
  for (const auto& b : params.blocks()) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
    for (int d : b.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (size_t i = 0; i < b.size; ++i) {
      const float f = static_cast<float>(params.data()[b.offset + i]);
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

NetworkParams deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  if (r.str(8) != std::string(kMagic, 8)) throw FormatError("not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const NetConfig cfg = net_config_from_json(r.str(r.u32()));
  NetworkParams params(cfg);
  const std::uint32_t count = r.u32();
  if (count != params.blocks().size()) throw FormatError("checkpoint tensor count mismatch");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.str(r.u32());
    const auto& info = params.info(name);
    const std::uint32_t rank = r.u32();
    if (rank != info.shape.size()) throw FormatError("rank mismatch for " + name);
    for (std::uint32_t d = 0; d < rank; ++d)
      if (r.u32() != static_cast<std::uint32_t>(info.shape[d])) throw FormatError("shape mismatch for " + name);
    for (size_t i = 0; i < info.size; ++i)
      params.data()[info.offset + i] = static_cast<double>(std::bit_cast<float>(r.u32()));
  }
  if (r.pos != bytes.size()) throw FormatError("trailing bytes after checkpoint");
  return params;
}

void save_checkpoint(const NetworkParams& params, const std::string& path) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace activetrack
