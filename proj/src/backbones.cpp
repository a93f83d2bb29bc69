// Copyright 2026 The FRP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "frp/backbones.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <variant>

#include "nn_ops.hpp"

namespace frp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(BackboneKind kind) {
  return kind == BackboneKind::kTinyTae ? "tiny_tae" : "tiny_rnn";
}

BackboneKind backbone_kind_from_string(const std::string& name) {
  if (name == "tiny_tae") return BackboneKind::kTinyTae;
  if (name == "tiny_rnn") return BackboneKind::kTinyRnn;
  throw ValidationError("unknown backbone kind '" + name + "'");
}

void BackboneConfig::validate() const {
  if (in_channels < 1 || num_classes < 2) {
    throw ValidationError("backbone: in_channels must be >= 1 and num_classes >= 2");
  }
  if (decoder_width < 1) throw ValidationError("backbone: decoder_width must be positive");
  if (kind == BackboneKind::kTinyTae) {
    if (widths.size() != 3) throw ValidationError("backbone: tiny_tae needs 3 encoder widths");
    if (heads < 1 || key_dim < 1) throw ValidationError("backbone: heads and key_dim must be positive");
    for (int w : widths) {
      if (w < 1) throw ValidationError("backbone: widths must be positive");
      if (w % heads != 0) throw ValidationError("backbone: every width must be divisible by heads");
    }
  } else {
    if (widths.empty() || widths[0] < 1) throw ValidationError("backbone: tiny_rnn needs widths[0] >= 1");
    if (hidden < 1) throw ValidationError("backbone: hidden must be positive");
    if (rnn_kernel < 1 || rnn_kernel % 2 == 0) throw ValidationError("backbone: rnn_kernel must be odd");
  }
}

int BackboneConfig::fused_channels() const {
  return kind == BackboneKind::kTinyTae ? widths[2] : hidden;
}

std::pair<int, int> BackboneConfig::fused_size(int H, int W) const {
  if (kind == BackboneKind::kTinyTae) return {H / 4, W / 4};
  return {H, W};
}

json to_json(const BackboneConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},      {"in_channels", cfg.in_channels},
          {"num_classes", cfg.num_classes},   {"widths", cfg.widths},
          {"decoder_width", cfg.decoder_width}, {"heads", cfg.heads},
          {"key_dim", cfg.key_dim},           {"hidden", cfg.hidden},
          {"rnn_kernel", cfg.rnn_kernel}};
}

BackboneConfig backbone_config_from_json(const json& j) {
  BackboneConfig cfg;
  cfg.kind = backbone_kind_from_string(j.value("kind", std::string("tiny_tae")));
  cfg.in_channels = j.value("in_channels", cfg.in_channels);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.widths = j.value("widths", cfg.widths);
  cfg.decoder_width = j.value("decoder_width", cfg.decoder_width);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.key_dim = j.value("key_dim", cfg.key_dim);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.rnn_kernel = j.value("rnn_kernel", cfg.rnn_kernel);
  return cfg;
}

ParamTensor& Model::param(const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p;
  throw ValidationError("model has no parameter '" + name + "'");
}

const ParamTensor& Model::param(const std::string& name) const {
  return const_cast<Model*>(this)->param(name);
}

size_t Model::num_parameters() const {
  size_t n = 0;
  for (const auto& p : params) n += p.values.size();
  return n;
}

namespace {

enum class Init { kZero, kHe, kFanIn, kUnit };

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  Init init;
};

size_t count(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

// Parameter order is part of the checkpoint format.
std::vector<ParamSpec> layout(const BackboneConfig& c) {
  const int C = c.in_channels, K = c.num_classes, dw = c.decoder_width;
  if (c.kind == BackboneKind::kTinyTae) {
    const int c1 = c.widths[0], c2 = c.widths[1], c3 = c.widths[2];
    const int hk = c.heads * c.key_dim;
    return {{"enc1.weight", {c1, C, 1, 1}, Init::kHe},
            {"enc1.bias", {c1}, Init::kZero},
            {"enc2.weight", {c2, c1, 2, 2}, Init::kHe},
            {"enc2.bias", {c2}, Init::kZero},
            {"enc3.weight", {c3, c2, 2, 2}, Init::kHe},
            {"enc3.bias", {c3}, Init::kZero},
            {"attn.key.weight", {hk, c3}, Init::kFanIn},
            {"attn.key.bias", {hk}, Init::kZero},
            {"attn.query", {c.heads, c.key_dim}, Init::kUnit},
            {"dec2.weight", {dw, c3 + c2, 3, 3}, Init::kHe},
            {"dec2.bias", {dw}, Init::kZero},
            {"dec1.weight", {dw, dw + c1, 1, 1}, Init::kHe},
            {"dec1.bias", {dw}, Init::kZero},
            {"head.weight", {K, dw, 1, 1}, Init::kFanIn},
            {"head.bias", {K}, Init::kZero}};
  }
  const int c1 = c.widths[0], hd = c.hidden, k = c.rnn_kernel;
  return {{"enc1.weight", {c1, C, 1, 1}, Init::kHe},
          {"enc1.bias", {c1}, Init::kZero},
          {"gru.input.weight", {3 * hd, c1, 1, 1}, Init::kFanIn},
          {"gru.input.bias", {3 * hd}, Init::kZero},
          {"gru.hidden.weight", {3 * hd, hd, k, k}, Init::kFanIn},
          {"gru.hidden.bias", {3 * hd}, Init::kZero},
          {"dec.weight", {dw, hd, 3, 3}, Init::kHe},
          {"dec.bias", {dw}, Init::kZero},
          {"head.weight", {K, dw, 1, 1}, Init::kFanIn},
          {"head.bias", {K}, Init::kZero}};
}

}  // namespace

Model build_backbone(const BackboneConfig& cfg, uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  m.seed = seed;
  Rng rng(seed);
  for (const auto& spec : layout(cfg)) {
    ParamTensor p{spec.name, spec.shape, std::vector<float>(count(spec.shape), 0.0f)};
    const size_t fan_in = spec.shape.size() > 1 ? p.values.size() / spec.shape[0] : 1;
    double bound = 0.0;
    switch (spec.init) {
      case Init::kZero: bound = 0.0; break;
      case Init::kHe: bound = std::sqrt(6.0 / fan_in); break;
      case Init::kFanIn: bound = 1.0 / std::sqrt(static_cast<double>(fan_in)); break;
      case Init::kUnit: bound = 1.0; break;
    }
    if (bound > 0.0) {
      for (auto& v : p.values) v = static_cast<float>(uniform(rng, -bound, bound));
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

std::vector<double> day_of_year_encoding(int day, int dims) {
  std::vector<double> pe(dims);
  for (int i = 0; i < dims; ++i) {
    const double angle = 2.0 * std::numbers::pi * (i / 2 + 1) * day / 366.0;
    pe[i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

std::vector<uint8_t> ModelOutputs::predict() const {
  const size_t P = static_cast<size_t>(height) * width;
  std::vector<uint8_t> out(P);
  for (size_t p = 0; p < P; ++p) {
    int best = 0;
    for (int k = 1; k < num_classes; ++k) {
      if (probs[k * P + p] > probs[best * P + p]) best = k;
    }
    out[p] = static_cast<uint8_t>(best);
  }
  return out;
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  for (const auto& p : model.params) g.emplace_back(p.values.size(), 0.0);
  return g;
}

// ---------------------------------------------------------------------------
// Engines

namespace {

template <typename Real>
using Buf = std::vector<Real>;

template <typename Real>
struct TaeTrace {
  int T = 0, H = 0, W = 0;
  Buf<Real> x, a1, a2, a3, enc_in, keys, attn, fused, cat2, d2, cat1, d1;
};

template <typename Real>
struct RnnTrace {
  int T = 0, H = 0, W = 0;
  Buf<Real> x, e, z, r, n, gh_n, h;  // h holds T + 1 states, h[0] = 0
  Buf<Real> d;
};

enum TaeParam { kEnc1W, kEnc1B, kEnc2W, kEnc2B, kEnc3W, kEnc3B, kKeyW, kKeyB, kQuery,
                kDec2W, kDec2B, kDec1W, kDec1B, kHeadW, kHeadB };
enum RnnParam { kREnc1W, kREnc1B, kGruXW, kGruXB, kGruHW, kGruHB, kRDecW, kRDecB, kRHeadW, kRHeadB };

void softmax_classes(const std::vector<double>& logits, int K, size_t P, std::vector<double>& probs) {
  probs.assign(logits.size(), 0.0);
  for (size_t p = 0; p < P; ++p) {
    double mx = logits[p];
    for (int k = 1; k < K; ++k) mx = std::max(mx, logits[k * P + p]);
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      probs[k * P + p] = std::exp(logits[k * P + p] - mx);
      sum += probs[k * P + p];
    }
    for (int k = 0; k < K; ++k) probs[k * P + p] /= sum;
  }
}

template <typename Real>
class Engine {
 public:
  Engine(const Model& model) : cfg_(model.config) {
    for (const auto& p : model.params) w_.emplace_back(p.values.begin(), p.values.end());
  }

  const BackboneConfig& config() const { return cfg_; }

  ModelOutputs forward(const SITSample& s, TaeTrace<Real>* tr) const;
  ModelOutputs forward(const SITSample& s, RnnTrace<Real>* tr) const;
  void backward(const TaeTrace<Real>& t, std::span<const double> g_fused, std::span<const double> g_logits,
                Gradients& grads) const;
  void backward(const RnnTrace<Real>& t, std::span<const double> g_fused, std::span<const double> g_logits,
                Gradients& grads) const;

 private:
  void check(const SITSample& s) const {
    if (s.C != cfg_.in_channels) {
      throw ValidationError("forward: sample has " + std::to_string(s.C) + " channels, model expects " +
                            std::to_string(cfg_.in_channels));
    }
    if (s.T < 1 || s.T > 366) throw ValidationError("forward: T must lie in [1, 366]");
    if (s.values.size() != static_cast<size_t>(s.T) * s.frame_size()) {
      throw ValidationError("forward: malformed sample");
    }
    if (cfg_.kind == BackboneKind::kTinyTae && (s.H % 4 != 0 || s.W % 4 != 0 || s.H < 4 || s.W < 4)) {
      throw ValidationError("forward: tiny_tae needs H and W divisible by 4");
    }
  }

  const Real* w(int i) const { return w_[i].data(); }

  BackboneConfig cfg_;
  std::vector<Buf<Real>> w_;
};

template <typename Real>
ModelOutputs finish(const BackboneConfig& cfg, const Buf<Real>& fused, int fh, int fw, const Buf<Real>& logits,
                    int H, int W) {
  ModelOutputs out;
  out.feature_channels = cfg.fused_channels();
  out.feature_height = fh;
  out.feature_width = fw;
  out.fused_feature.assign(fused.begin(), fused.end());
  out.num_classes = cfg.num_classes;
  out.height = H;
  out.width = W;
  out.logits.assign(logits.begin(), logits.end());
  softmax_classes(out.logits, cfg.num_classes, static_cast<size_t>(H) * W, out.probs);
  return out;
}

// tiny_tae ------------------------------------------------------------------

template <typename Real>
ModelOutputs Engine<Real>::forward(const SITSample& s, TaeTrace<Real>* tr) const {
  check(s);
  TaeTrace<Real> local;
  TaeTrace<Real>& t = tr ? *tr : local;
  const int T = s.T, C = s.C, H = s.H, W = s.W;
  const int c1 = cfg_.widths[0], c2 = cfg_.widths[1], c3 = cfg_.widths[2];
  const int dw = cfg_.decoder_width, K = cfg_.num_classes, nh = cfg_.heads, dk = cfg_.key_dim;
  const int H2 = H / 2, W2 = W / 2, H3 = H / 4, W3 = W / 4;
  const size_t P1 = static_cast<size_t>(H) * W, P2 = static_cast<size_t>(H2) * W2,
               P3 = static_cast<size_t>(H3) * W3;
  t.T = T;
  t.H = H;
  t.W = W;
  t.x.assign(s.values.begin(), s.values.end());
  t.a1.assign(T * c1 * P1, 0);
  t.a2.assign(T * c2 * P2, 0);
  t.a3.assign(T * c3 * P3, 0);

  const nn::ConvShape s1{C, c1, 1, 1, 0, H, W};
  const nn::ConvShape s2{c1, c2, 2, 2, 0, H, W};
  const nn::ConvShape s3{c2, c3, 2, 2, 0, H2, W2};
  for (int f = 0; f < T; ++f) {
    Real* a1 = &t.a1[f * c1 * P1];
    Real* a2 = &t.a2[f * c2 * P2];
    Real* a3 = &t.a3[f * c3 * P3];
    nn::conv2d_forward(s1, &t.x[f * C * P1], w(kEnc1W), w(kEnc1B), a1);
    nn::relu_inplace(a1, c1 * P1);
    nn::conv2d_forward(s2, a1, w(kEnc2W), w(kEnc2B), a2);
    nn::relu_inplace(a2, c2 * P2);
    nn::conv2d_forward(s3, a2, w(kEnc3W), w(kEnc3B), a3);
    nn::relu_inplace(a3, c3 * P3);
  }

  // Keys from deepest features plus the date encoding.
  const int hk = nh * dk;
  t.enc_in.assign(T * c3 * P3, 0);
  t.keys.assign(T * hk * P3, 0);
  for (int f = 0; f < T; ++f) {
    const auto pe = day_of_year_encoding(s.dates[f], c3);
    for (int c = 0; c < c3; ++c) {
      const Real* src = &t.a3[(f * c3 + c) * P3];
      Real* dst = &t.enc_in[(f * c3 + c) * P3];
      for (size_t p = 0; p < P3; ++p) dst[p] = src[p] + static_cast<Real>(pe[c]);
    }
    for (int j = 0; j < hk; ++j) {
      Real* key = &t.keys[(f * hk + j) * P3];
      std::fill(key, key + P3, w(kKeyB)[j]);
      for (int c = 0; c < c3; ++c) {
        const Real wv = w(kKeyW)[j * c3 + c];
        const Real* src = &t.enc_in[(f * c3 + c) * P3];
        for (size_t p = 0; p < P3; ++p) key[p] += wv * src[p];
      }
    }
  }
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));
  t.attn.assign(nh * T * P3, 0);
  for (int h = 0; h < nh; ++h) {
    Real* a = &t.attn[h * T * P3];
    for (int f = 0; f < T; ++f) {
      for (int j = 0; j < dk; ++j) {
        const Real q = w(kQuery)[h * dk + j] * scale;
        const Real* key = &t.keys[(f * hk + h * dk + j) * P3];
        for (size_t p = 0; p < P3; ++p) a[f * P3 + p] += q * key[p];
      }
    }
    for (size_t p = 0; p < P3; ++p) {
      Real mx = a[p];
      for (int f = 1; f < T; ++f) mx = std::max(mx, a[f * P3 + p]);
      Real sum = 0;
      for (int f = 0; f < T; ++f) {
        a[f * P3 + p] = std::exp(a[f * P3 + p] - mx);
        sum += a[f * P3 + p];
      }
      for (int f = 0; f < T; ++f) a[f * P3 + p] /= sum;
    }
  }

  // Temporal pooling of a [T][ch][h][w] stack with the attention of its
  // group, upsampled from the deepest level by `factor`.
  auto pool = [&](const Buf<Real>& stack, int ch, int h, int wd, int factor, Real* out) {
    const int group = ch / nh;
    const size_t P = static_cast<size_t>(h) * wd;
    std::fill(out, out + ch * P, Real(0));
    for (int f = 0; f < T; ++f) {
      for (int c = 0; c < ch; ++c) {
        const Real* a = &t.attn[((c / group) * T + f) * P3];
        const Real* src = &stack[(f * ch + c) * P];
        Real* dst = out + c * P;
        for (int y = 0; y < h; ++y) {
          const Real* arow = a + (y / factor) * W3;
          for (int x = 0; x < wd; ++x) dst[y * wd + x] += arow[x / factor] * src[y * wd + x];
        }
      }
    }
  };

  t.fused.assign(c3 * P3, 0);
  pool(t.a3, c3, H3, W3, 1, t.fused.data());
  t.cat2.assign((c3 + c2) * P2, 0);
  nn::upsample_forward(t.fused.data(), c3, H3, W3, 2, t.cat2.data());
  pool(t.a2, c2, H2, W2, 2, &t.cat2[c3 * P2]);
  t.d2.assign(dw * P2, 0);
  nn::conv2d_forward(nn::ConvShape{c3 + c2, dw, 3, 1, 1, H2, W2}, t.cat2.data(), w(kDec2W), w(kDec2B), t.d2.data());
  nn::relu_inplace(t.d2.data(), t.d2.size());
  t.cat1.assign((dw + c1) * P1, 0);
  nn::upsample_forward(t.d2.data(), dw, H2, W2, 2, t.cat1.data());
  pool(t.a1, c1, H, W, 4, &t.cat1[dw * P1]);
  t.d1.assign(dw * P1, 0);
  nn::conv2d_forward(nn::ConvShape{dw + c1, dw, 1, 1, 0, H, W}, t.cat1.data(), w(kDec1W), w(kDec1B), t.d1.data());
  nn::relu_inplace(t.d1.data(), t.d1.size());
  Buf<Real> logits(K * P1);
  nn::conv2d_forward(nn::ConvShape{dw, K, 1, 1, 0, H, W}, t.d1.data(), w(kHeadW), w(kHeadB), logits.data());

  ModelOutputs out = finish<Real>(cfg_, t.fused, H3, W3, logits, H, W);
  out.attention.assign(t.attn.begin(), t.attn.end());
  return out;
}

template <typename Real>
void Engine<Real>::backward(const TaeTrace<Real>& t, std::span<const double> g_fused_ext,
                            std::span<const double> g_logits, Gradients& grads) const {
  const int T = t.T, H = t.H, W = t.W, C = cfg_.in_channels;
  const int c1 = cfg_.widths[0], c2 = cfg_.widths[1], c3 = cfg_.widths[2];
  const int dw = cfg_.decoder_width, K = cfg_.num_classes, nh = cfg_.heads, dk = cfg_.key_dim;
  const int H2 = H / 2, W2 = W / 2, H3 = H / 4, W3 = W / 4;
  const size_t P1 = static_cast<size_t>(H) * W, P2 = static_cast<size_t>(H2) * W2,
               P3 = static_cast<size_t>(H3) * W3;
  const int hk = nh * dk;
  if (g_logits.size() != K * P1 || (!g_fused_ext.empty() && g_fused_ext.size() != c3 * P3)) {
    throw ValidationError("backward: gradient shapes do not match the trace");
  }
  std::vector<Buf<Real>> g;
  for (const auto& p : w_) g.emplace_back(p.size(), Real(0));

  Buf<Real> gl(g_logits.begin(), g_logits.end());
  Buf<Real> g_d1(dw * P1, 0);
  nn::conv2d_backward(nn::ConvShape{dw, K, 1, 1, 0, H, W}, t.d1.data(), w(kHeadW), gl.data(), g_d1.data(),
                      g[kHeadW].data(), g[kHeadB].data());
  nn::relu_backward(t.d1.data(), g_d1.data(), g_d1.size());
  Buf<Real> g_cat1((dw + c1) * P1, 0);
  nn::conv2d_backward(nn::ConvShape{dw + c1, dw, 1, 1, 0, H, W}, t.cat1.data(), w(kDec1W), g_d1.data(),
                      g_cat1.data(), g[kDec1W].data(), g[kDec1B].data());
  Buf<Real> g_d2(dw * P2, 0);
  nn::upsample_backward(g_cat1.data(), dw, H2, W2, 2, g_d2.data());
  nn::relu_backward(t.d2.data(), g_d2.data(), g_d2.size());
  Buf<Real> g_cat2((c3 + c2) * P2, 0);
  nn::conv2d_backward(nn::ConvShape{c3 + c2, dw, 3, 1, 1, H2, W2}, t.cat2.data(), w(kDec2W), g_d2.data(),
                      g_cat2.data(), g[kDec2W].data(), g[kDec2B].data());
  Buf<Real> g_fused(c3 * P3, 0);
  nn::upsample_backward(g_cat2.data(), c3, H3, W3, 2, g_fused.data());
  for (size_t i = 0; i < g_fused_ext.size(); ++i) g_fused[i] += static_cast<Real>(g_fused_ext[i]);

  Buf<Real> g_a1(t.a1.size(), 0), g_a2(t.a2.size(), 0), g_a3(t.a3.size(), 0);
  Buf<Real> g_attn(t.attn.size(), 0);
  auto pool_backward = [&](const Buf<Real>& stack, int ch, int h, int wd, int factor, const Real* g_out,
                           Buf<Real>& g_stack) {
    const int group = ch / nh;
    const size_t P = static_cast<size_t>(h) * wd;
    for (int f = 0; f < T; ++f) {
      for (int c = 0; c < ch; ++c) {
        const size_t aoff = ((c / group) * T + f) * P3;
        const Real* a = &t.attn[aoff];
        Real* ga = &g_attn[aoff];
        const Real* src = &stack[(f * ch + c) * P];
        Real* gsrc = &g_stack[(f * ch + c) * P];
        const Real* go = g_out + c * P;
        for (int y = 0; y < h; ++y) {
          const int ay = (y / factor) * W3;
          for (int x = 0; x < wd; ++x) {
            const size_t i = y * wd + x;
            gsrc[i] += a[ay + x / factor] * go[i];
            ga[ay + x / factor] += go[i] * src[i];
          }
        }
      }
    }
  };
  pool_backward(t.a3, c3, H3, W3, 1, g_fused.data(), g_a3);
  pool_backward(t.a2, c2, H2, W2, 2, &g_cat2[c3 * P2], g_a2);
  pool_backward(t.a1, c1, H, W, 4, &g_cat1[dw * P1], g_a1);

  // Softmax over time, then scores -> keys and query.
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dk));
  Buf<Real> g_keys(t.keys.size(), 0);
  for (int h = 0; h < nh; ++h) {
    const Real* a = &t.attn[h * T * P3];
    Real* ga = &g_attn[h * T * P3];
    for (size_t p = 0; p < P3; ++p) {
      Real dot = 0;
      for (int f = 0; f < T; ++f) dot += a[f * P3 + p] * ga[f * P3 + p];
      for (int f = 0; f < T; ++f) ga[f * P3 + p] = a[f * P3 + p] * (ga[f * P3 + p] - dot);
    }
    for (int f = 0; f < T; ++f) {
      for (int j = 0; j < dk; ++j) {
        const Real q = w(kQuery)[h * dk + j] * scale;
        const Real* key = &t.keys[(f * hk + h * dk + j) * P3];
        Real* gkey = &g_keys[(f * hk + h * dk + j) * P3];
        Real acc = 0;
        for (size_t p = 0; p < P3; ++p) {
          acc += ga[f * P3 + p] * key[p];
          gkey[p] += ga[f * P3 + p] * q;
        }
        g[kQuery][h * dk + j] += acc * scale;
      }
    }
  }
  for (int f = 0; f < T; ++f) {
    for (int j = 0; j < hk; ++j) {
      const Real* gkey = &g_keys[(f * hk + j) * P3];
      Real bacc = 0;
      for (size_t p = 0; p < P3; ++p) bacc += gkey[p];
      g[kKeyB][j] += bacc;
      for (int c = 0; c < c3; ++c) {
        const Real wv = w(kKeyW)[j * c3 + c];
        const Real* src = &t.enc_in[(f * c3 + c) * P3];
        Real* gsrc = &g_a3[(f * c3 + c) * P3];
        Real acc = 0;
        for (size_t p = 0; p < P3; ++p) {
          acc += gkey[p] * src[p];
          gsrc[p] += wv * gkey[p];
        }
        g[kKeyW][j * c3 + c] += acc;
      }
    }
  }

  const nn::ConvShape s1{C, c1, 1, 1, 0, H, W};
  const nn::ConvShape s2{c1, c2, 2, 2, 0, H, W};
  const nn::ConvShape s3{c2, c3, 2, 2, 0, H2, W2};
  for (int f = 0; f < T; ++f) {
    Real* ga3 = &g_a3[f * c3 * P3];
    Real* ga2 = &g_a2[f * c2 * P2];
    Real* ga1 = &g_a1[f * c1 * P1];
    nn::relu_backward(&t.a3[f * c3 * P3], ga3, c3 * P3);
    nn::conv2d_backward(s3, &t.a2[f * c2 * P2], w(kEnc3W), ga3, ga2, g[kEnc3W].data(), g[kEnc3B].data());
    nn::relu_backward(&t.a2[f * c2 * P2], ga2, c2 * P2);
    nn::conv2d_backward(s2, &t.a1[f * c1 * P1], w(kEnc2W), ga2, ga1, g[kEnc2W].data(), g[kEnc2B].data());
    nn::relu_backward(&t.a1[f * c1 * P1], ga1, c1 * P1);
    nn::conv2d_backward<Real>(s1, &t.x[f * C * P1], w(kEnc1W), ga1, nullptr, g[kEnc1W].data(),
                              g[kEnc1B].data());
  }

  for (size_t i = 0; i < g.size(); ++i)
    for (size_t j = 0; j < g[i].size(); ++j) grads[i][j] += static_cast<double>(g[i][j]);
}

// tiny_rnn ------------------------------------------------------------------

template <typename Real>
ModelOutputs Engine<Real>::forward(const SITSample& s, RnnTrace<Real>* tr) const {
  check(s);
  RnnTrace<Real> local;
  RnnTrace<Real>& t = tr ? *tr : local;
  const int T = s.T, C = s.C, H = s.H, W = s.W;
  const int c1 = cfg_.widths[0], hd = cfg_.hidden, k = cfg_.rnn_kernel;
  const int dw = cfg_.decoder_width, K = cfg_.num_classes;
  const size_t P = static_cast<size_t>(H) * W;
  t.T = T;
  t.H = H;
  t.W = W;
  t.x.assign(s.values.begin(), s.values.end());
  t.e.assign(T * c1 * P, 0);
  t.z.assign(T * hd * P, 0);
  t.r.assign(T * hd * P, 0);
  t.n.assign(T * hd * P, 0);
  t.gh_n.assign(T * hd * P, 0);
  t.h.assign((T + 1) * hd * P, 0);

  const nn::ConvShape se{C, c1, 1, 1, 0, H, W};
  const nn::ConvShape sx{c1, 3 * hd, 1, 1, 0, H, W};
  const nn::ConvShape sh{hd, 3 * hd, k, 1, k / 2, H, W};
  Buf<Real> gx(3 * hd * P), gh(3 * hd * P);
  for (int f = 0; f < T; ++f) {
    Real* e = &t.e[f * c1 * P];
    nn::conv2d_forward(se, &t.x[f * C * P], w(kREnc1W), w(kREnc1B), e);
    nn::relu_inplace(e, c1 * P);
    nn::conv2d_forward(sx, e, w(kGruXW), w(kGruXB), gx.data());
    const Real* hprev = &t.h[f * hd * P];
    nn::conv2d_forward(sh, hprev, w(kGruHW), w(kGruHB), gh.data());
    Real* hnext = &t.h[(f + 1) * hd * P];
    const size_t off = f * hd * P;
    for (size_t i = 0; i < hd * P; ++i) {
      const Real z = nn::sigmoid(gx[i] + gh[i]);
      const Real r = nn::sigmoid(gx[hd * P + i] + gh[hd * P + i]);
      const Real n = std::tanh(gx[2 * hd * P + i] + r * gh[2 * hd * P + i]);
      t.z[off + i] = z;
      t.r[off + i] = r;
      t.n[off + i] = n;
      t.gh_n[off + i] = gh[2 * hd * P + i];
      hnext[i] = (Real(1) - z) * n + z * hprev[i];
    }
  }
  Buf<Real> fused(t.h.begin() + T * hd * P, t.h.end());
  t.d.assign(dw * P, 0);
  nn::conv2d_forward(nn::ConvShape{hd, dw, 3, 1, 1, H, W}, fused.data(), w(kRDecW), w(kRDecB), t.d.data());
  nn::relu_inplace(t.d.data(), t.d.size());
  Buf<Real> logits(K * P);
  nn::conv2d_forward(nn::ConvShape{dw, K, 1, 1, 0, H, W}, t.d.data(), w(kRHeadW), w(kRHeadB), logits.data());
  return finish<Real>(cfg_, fused, H, W, logits, H, W);
}

template <typename Real>
void Engine<Real>::backward(const RnnTrace<Real>& t, std::span<const double> g_fused_ext,
                            std::span<const double> g_logits, Gradients& grads) const {
  const int T = t.T, H = t.H, W = t.W, C = cfg_.in_channels;
  const int c1 = cfg_.widths[0], hd = cfg_.hidden, k = cfg_.rnn_kernel;
  const int dw = cfg_.decoder_width, K = cfg_.num_classes;
  const size_t P = static_cast<size_t>(H) * W;
  if (g_logits.size() != K * P || (!g_fused_ext.empty() && g_fused_ext.size() != hd * P)) {
    throw ValidationError("backward: gradient shapes do not match the trace");
  }
  std::vector<Buf<Real>> g;
  for (const auto& p : w_) g.emplace_back(p.size(), Real(0));

  Buf<Real> gl(g_logits.begin(), g_logits.end());
  Buf<Real> g_d(dw * P, 0);
  nn::conv2d_backward(nn::ConvShape{dw, K, 1, 1, 0, H, W}, t.d.data(), w(kRHeadW), gl.data(), g_d.data(),
                      g[kRHeadW].data(), g[kRHeadB].data());
  nn::relu_backward(t.d.data(), g_d.data(), g_d.size());
  Buf<Real> g_h(hd * P, 0);
  nn::conv2d_backward(nn::ConvShape{hd, dw, 3, 1, 1, H, W}, &t.h[T * hd * P], w(kRDecW), g_d.data(), g_h.data(),
                      g[kRDecW].data(), g[kRDecB].data());
  for (size_t i = 0; i < g_fused_ext.size(); ++i) g_h[i] += static_cast<Real>(g_fused_ext[i]);

  const nn::ConvShape se{C, c1, 1, 1, 0, H, W};
  const nn::ConvShape sx{c1, 3 * hd, 1, 1, 0, H, W};
  const nn::ConvShape sh{hd, 3 * hd, k, 1, k / 2, H, W};
  Buf<Real> g_gx(3 * hd * P), g_gh(3 * hd * P), g_hprev(hd * P), g_e(c1 * P);
  for (int f = T - 1; f >= 0; --f) {
    const size_t off = f * hd * P;
    const Real* hprev = &t.h[f * hd * P];
    for (size_t i = 0; i < hd * P; ++i) {
      const Real z = t.z[off + i], r = t.r[off + i], n = t.n[off + i];
      const Real gh = g_h[i];
      const Real g_pre_n = gh * (Real(1) - z) * (Real(1) - n * n);
      const Real g_pre_z = gh * (hprev[i] - n) * z * (Real(1) - z);
      const Real g_pre_r = g_pre_n * t.gh_n[off + i] * r * (Real(1) - r);
      g_gx[i] = g_pre_z;
      g_gx[hd * P + i] = g_pre_r;
      g_gx[2 * hd * P + i] = g_pre_n;
      g_gh[i] = g_pre_z;
      g_gh[hd * P + i] = g_pre_r;
      g_gh[2 * hd * P + i] = g_pre_n * r;
      g_hprev[i] = gh * z;
    }
    nn::conv2d_backward(sh, hprev, w(kGruHW), g_gh.data(), g_hprev.data(), g[kGruHW].data(), g[kGruHB].data());
    std::fill(g_e.begin(), g_e.end(), Real(0));
    const Real* e = &t.e[f * c1 * P];
    nn::conv2d_backward(sx, e, w(kGruXW), g_gx.data(), g_e.data(), g[kGruXW].data(), g[kGruXB].data());
    nn::relu_backward(e, g_e.data(), g_e.size());
    nn::conv2d_backward<Real>(se, &t.x[f * C * P], w(kREnc1W), g_e.data(), nullptr, g[kREnc1W].data(),
                              g[kREnc1B].data());
    g_h.swap(g_hprev);
  }

  for (size_t i = 0; i < g.size(); ++i)
    for (size_t j = 0; j < g[i].size(); ++j) grads[i][j] += static_cast<double>(g[i][j]);
}

using AnyTrace = std::variant<std::monostate, TaeTrace<float>, TaeTrace<double>, RnnTrace<float>, RnnTrace<double>>;
using AnyEngine = std::variant<Engine<float>, Engine<double>>;

}  // namespace

struct Trace::Impl {
  AnyTrace data;
};

Trace::Trace() : impl(std::make_unique<Impl>()) {}
Trace::~Trace() = default;
Trace::Trace(Trace&&) noexcept = default;
Trace& Trace::operator=(Trace&&) noexcept = default;

struct Network::Impl {
  AnyEngine engine;
};

Network::Network(const Model& model, Precision precision) {
  model.config.validate();
  if (precision == Precision::kFloat) {
    impl_ = std::make_unique<Impl>(Impl{Engine<float>(model)});
  } else {
    impl_ = std::make_unique<Impl>(Impl{Engine<double>(model)});
  }
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

const BackboneConfig& Network::config() const {
  return std::visit([](const auto& e) -> const BackboneConfig& { return e.config(); }, impl_->engine);
}

ModelOutputs Network::forward(const SITSample& sample, Trace* trace) const {
  return std::visit(
      [&](const auto& engine) -> ModelOutputs {
        using Real = std::decay_t<decltype(engine)>;
        using R = std::conditional_t<std::is_same_v<Real, Engine<float>>, float, double>;
        if (engine.config().kind == BackboneKind::kTinyTae) {
          if (!trace) return engine.forward(sample, static_cast<TaeTrace<R>*>(nullptr));
          auto& t = trace->impl->data.template emplace<TaeTrace<R>>();
          return engine.forward(sample, &t);
        }
        if (!trace) return engine.forward(sample, static_cast<RnnTrace<R>*>(nullptr));
        auto& t = trace->impl->data.template emplace<RnnTrace<R>>();
        return engine.forward(sample, &t);
      },
      impl_->engine);
}

void Network::backward(const Trace& trace, std::span<const double> grad_fused, std::span<const double> grad_logits,
                       Gradients& grads) const {
  std::visit(
      [&](const auto& engine) {
        using Real = std::decay_t<decltype(engine)>;
        using R = std::conditional_t<std::is_same_v<Real, Engine<float>>, float, double>;
        if (engine.config().kind == BackboneKind::kTinyTae) {
          const auto* t = std::get_if<TaeTrace<R>>(&trace.impl->data);
          if (!t) throw ValidationError("backward: trace was not produced by this network");
          engine.backward(*t, grad_fused, grad_logits, grads);
        } else {
          const auto* t = std::get_if<RnnTrace<R>>(&trace.impl->data);
          if (!t) throw ValidationError("backward: trace was not produced by this network");
          engine.backward(*t, grad_fused, grad_logits, grads);
        }
      },
      impl_->engine);
}

ModelOutputs forward(const Model& model, const SITSample& sample) {
  return Network(model).forward(sample);
}

// ---------------------------------------------------------------------------
// Persistence

void save_model(const Model& model, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  json params = json::array();
  std::vector<float> flat;
  for (const auto& p : model.params) {
    params.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", flat.size()}});
    flat.insert(flat.end(), p.values.begin(), p.values.end());
  }
  const json manifest = {{"schema", 1},
                         {"format", "frp-model"},
                         {"config", to_json(model.config)},
                         {"seed", model.seed},
                         {"num_values", flat.size()},
                         {"params", params}};
  write_f32_file(directory / "params.bin", flat);
  write_text_file(directory / "model.json", manifest.dump(2) + "\n");
}

Model load_model(const fs::path& directory) {
  const fs::path path = directory / "model.json";
  if (!fs::exists(path)) throw FormatError("missing model manifest: " + path.string());
  Model m;
  try {
    const json manifest = json::parse(read_text_file(path));
    if (manifest.at("schema").get<int>() != 1 || manifest.at("format").get<std::string>() != "frp-model") {
      throw FormatError("unsupported model checkpoint version");
    }
    m.config = backbone_config_from_json(manifest.at("config"));
    m.seed = manifest.at("seed").get<uint64_t>();
    const auto flat = read_f32_file(directory / "params.bin");
    if (flat.size() != manifest.at("num_values").get<size_t>()) {
      throw FormatError("params.bin holds " + std::to_string(flat.size()) + " values, manifest declares " +
                        std::to_string(manifest.at("num_values").get<size_t>()));
    }
    const auto expected = layout(m.config);
    const auto& entries = manifest.at("params");
    if (entries.size() != expected.size()) throw FormatError("checkpoint parameter list does not match config");
    for (size_t i = 0; i < expected.size(); ++i) {
      ParamTensor p;
      p.name = entries[i].at("name").get<std::string>();
      p.shape = entries[i].at("shape").get<std::vector<int>>();
      if (p.name != expected[i].name || p.shape != expected[i].shape) {
        throw FormatError("checkpoint parameter '" + p.name + "' does not match the architecture");
      }
      const size_t off = entries[i].at("offset").get<size_t>();
      const size_t n = count(p.shape);
      if (off + n > flat.size()) throw FormatError("checkpoint payload truncated");
      p.values.assign(flat.begin() + off, flat.begin() + off + n);
      m.params.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed model manifest: " + std::string(e.what()));
  } catch (const ValidationError& e) {
    throw FormatError("invalid model config in checkpoint: " + std::string(e.what()));
  }
  return m;
}

Model load_model(const fs::path& directory, const BackboneConfig& expected) {
  Model m = load_model(directory);
  if (!(m.config == expected)) {
    throw FormatError("checkpoint architecture " + to_json(m.config).dump() + " differs from expected " +
                      to_json(expected).dump());
  }
  return m;
}

}  // namespace frp
