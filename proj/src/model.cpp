#include "hma/model.hpp"

#include <cmath>

namespace hma {
namespace {

struct SpecBuilder {
  std::vector<ParamSpec> out;

  void norm(const std::string& p, int64_t c) {
    out.push_back({p + ".weight", {c}, Init::kOnes});
    out.push_back({p + ".bias", {c}, Init::kZeros});
  }
  void linear(const std::string& p, int64_t din, int64_t dout) {
    out.push_back({p + ".weight", {din, dout}, Init::kTruncNormal});
    out.push_back({p + ".bias", {dout}, Init::kZeros});
  }
  void conv(const std::string& p, int64_t cout, int64_t cin, int64_t k) {
    out.push_back({p + ".weight", {cout, cin, k, k}, Init::kConvUniform});
    out.push_back({p + ".bias", {cout}, Init::kZeros});
  }
  void attention(const std::string& p, int64_t c, int heads, int64_t extent) {
    for (const char* name : {"q", "k", "v"}) linear(p + "." + name, c, c);
    linear(p + ".proj", c, c);
    out.push_back({p + ".bias_table", {bias_table_rows(extent, extent), heads}, Init::kTruncNormal});
  }
  void mlp(const std::string& p, int64_t c, int64_t hidden) {
    linear(p + ".fc1", c, hidden);
    linear(p + ".fc2", hidden, c);
  }
};

}  // namespace

std::vector<ParamSpec> param_specs(const HmaConfig& cfg) {
  validate(cfg);
  const int64_t c = cfg.channels, e = cfg.expanded_channels(), se = cfg.se_channels(), hid = cfg.mlp_hidden();
  SpecBuilder b;
  b.conv("shallow", c, cfg.in_channels, 3);
  for (int i = 0; i < cfg.n_rhtb; ++i) {
    const std::string r = "body." + std::to_string(i);
    for (int j = 0; j < cfg.n_fab; ++j) {
      const std::string f = r + ".fab." + std::to_string(j);
      b.norm(f + ".fused.norm", c);
      b.conv(f + ".fused.expand", e, c, 3);
      b.linear(f + ".fused.se.reduce", e, se);
      b.linear(f + ".fused.se.expand", se, e);
      b.linear(f + ".fused.project", e, c);
      for (int k = 0; k < 2; ++k) {
        const std::string s = f + ".stl." + std::to_string(k);
        b.norm(s + ".norm1", c);
        b.attention(s + ".attn", c, cfg.heads_fab, cfg.window);
        b.norm(s + ".norm2", c);
        b.mlp(s + ".mlp", c, hid);
      }
    }
    const std::string g = r + ".gab";
    b.attention(g + ".mal.win1", c / 4, cfg.heads_gab_win, cfg.window);
    b.attention(g + ".mal.win2", c / 4, cfg.heads_gab_win, cfg.window);
    for (const char* name : {"q", "k", "v"}) b.linear(g + ".mal.grid." + name, c / 2, c / 2);
    b.linear(g + ".mal.grid.g", c, c / 2);
    b.linear(g + ".mal.grid.proj", c / 2, c / 2);
    b.out.push_back({g + ".mal.grid.bias_table",
                     {bias_table_rows(cfg.grid_extent(), cfg.grid_extent()), cfg.heads_gab_grid},
                     Init::kTruncNormal});
    b.linear(g + ".mal.proj", c, c);
    b.norm(g + ".mal.norm", c);
    b.mlp(g + ".mlp", c, hid);
    b.norm(g + ".norm", c);
    b.conv(r + ".conv", c, c, 3);
  }
  b.conv("body_conv", c, c, 3);
  b.conv("recon.conv_before", c, c, 3);
  if (cfg.scale == 3) {
    b.conv("recon.up.0", 9 * c, c, 3);
  } else {
    for (int k = 0; (1 << (k + 1)) <= cfg.scale; ++k) b.conv("recon.up." + std::to_string(k), 4 * c, c, 3);
  }
  b.conv("recon.conv_last", cfg.in_channels, c, 3);
  return b.out;
}

template <typename T>
Tensor<T> init_tensor(const ParamSpec& spec, Rng& rng) {
  std::vector<T> v(static_cast<size_t>(numel(spec.shape)));
  switch (spec.init) {
    case Init::kTruncNormal:
      for (auto& x : v) x = static_cast<T>(rng.trunc_normal(0.02));
      break;
    case Init::kConvUniform: {
      const double fan_in = static_cast<double>(spec.shape[1] * spec.shape[2] * spec.shape[3]);
      const double bound = 1.0 / std::sqrt(fan_in);
      for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
      break;
    }
    case Init::kZeros:
      break;
    case Init::kOnes:
      std::fill(v.begin(), v.end(), T(1));
      break;
  }
  return Tensor<T>(spec.shape, std::move(v));
}

void check_input_geometry(const HmaConfig& cfg, int64_t h, int64_t w) {
  const int64_t m = cfg.pad_multiple();
  if (h % m != 0 || w % m != 0) {
    throw ShapeError("input " + std::to_string(h) + " x " + std::to_string(w) + " must be divisible by " +
                     std::to_string(m) + "; pad to " + std::to_string((h + m - 1) / m * m) + " x " +
                     std::to_string((w + m - 1) / m * m) + " or use tiled inference");
  }
  if (h > cfg.img_size || w > cfg.img_size) {
    throw ShapeError("input " + std::to_string(h) + " x " + std::to_string(w) + " exceeds img_size " +
                     std::to_string(cfg.img_size) + " covered by the grid bias table; use tiled inference");
  }
}

template <typename T>
Var<T> layer_norm(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  return ag::layer_norm(x, s.p(prefix + ".weight"), s.p(prefix + ".bias"));
}

template <typename T>
Var<T> linear(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  return ag::linear(x, s.p(prefix + ".weight"), std::optional<Var<T>>(s.p(prefix + ".bias")));
}

template <typename T>
Var<T> conv3x3(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  return ag::conv2d(x, s.p(prefix + ".weight"), std::optional<Var<T>>(s.p(prefix + ".bias")), 1, 1,
                    s.cfg.conv_padding);
}

template <typename T>
AttentionVars<T> attention_vars(const Scope<T>& s, const std::string& prefix, int heads) {
  AttentionVars<T> a;
  a.wq = s.p(prefix + ".q.weight");
  a.bq = s.p(prefix + ".q.bias");
  a.wk = s.p(prefix + ".k.weight");
  a.bk = s.p(prefix + ".k.bias");
  a.wv = s.p(prefix + ".v.weight");
  a.bv = s.p(prefix + ".v.bias");
  a.wo = s.p(prefix + ".proj.weight");
  a.bo = s.p(prefix + ".proj.bias");
  a.table = s.p(prefix + ".bias_table");
  a.heads = heads;
  return a;
}

namespace {

template <typename T>
Var<T> mlp(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  return linear(s, prefix + ".fc2", ag::gelu(linear(s, prefix + ".fc1", x)));
}

template <typename T>
Capture<T> prefixed(const Scope<T>& s, const std::string& prefix) {
  if (!s.capture || !*s.capture) return {};
  const Capture<T>* inner = s.capture;
  return [inner, prefix](const std::string& tag, const Var<T>& v) { (*inner)(prefix + "." + tag, v); };
}

/// (S)W-MSA over a token map: partition, attend, reverse.
template <typename T>
Var<T> window_attention(const Scope<T>& s, const std::string& prefix, const Var<T>& x, int heads, bool shifted) {
  const int64_t h = x.dim(1), w = x.dim(2);
  const int m = s.cfg.window;
  const WindowSpec spec{m, shifted ? m / 2 : 0};
  AttentionVars<T> p = attention_vars(s, prefix, heads);
  Var<T> bias = gather_bias(p.table, heads, m, m, m, m);
  Tensor<T> mask;
  if (spec.shift > 0) mask = shift_mask<T>(spec, h, w);
  const Capture<T> cap = prefixed(s, prefix);
  Var<T> y = msa(window_partition(x, spec), p, bias, spec.shift > 0 ? &mask : nullptr, &cap);
  return window_reverse(y, spec, h, w);
}

}  // namespace

template <typename T>
Var<T> fused_conv_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Var<T> y = ag::nhwc_to_nchw(layer_norm(s, prefix + ".norm", x));
  y = ag::gelu(conv3x3(s, prefix + ".expand", y));
  const int64_t e = y.dim(1);
  y = ag::reshape(ag::nchw_to_nhwc(y), Shape{n, h * w, e});
  Var<T> gate = ag::mean_axis(y, 1);
  gate = ag::gelu(linear(s, prefix + ".se.reduce", gate));
  gate = ag::sigmoid(linear(s, prefix + ".se.expand", gate));
  y = linear(s, prefix + ".project", ag::mul(y, gate));
  return ag::add(ag::reshape(y, Shape{n, h, w, c}), x);
}

template <typename T>
Var<T> stl_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x, bool shifted) {
  Var<T> f = ag::add(window_attention(s, prefix + ".attn", layer_norm(s, prefix + ".norm1", x), s.cfg.heads_fab,
                                      shifted),
                     x);
  return ag::add(mlp(s, prefix + ".mlp", layer_norm(s, prefix + ".norm2", f)), f);
}

template <typename T>
Var<T> fab_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  Var<T> y = fused_conv_forward(s, prefix + ".fused", x);
  y = stl_forward(s, prefix + ".stl.0", y, false);
  return stl_forward(s, prefix + ".stl.1", y, true);
}

template <typename T>
Var<T> mal_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  const HmaConfig& cfg = s.cfg;
  const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int k = cfg.grid_interval;
  const GridSpec grid = make_grid_spec(k, h, w);
  Var<T> f_g = ag::slice_lastdim(x, 0, c / 2);
  Var<T> f_w1 = ag::slice_lastdim(x, c / 2, c / 2 + c / 4);
  Var<T> f_w2 = ag::slice_lastdim(x, c / 2 + c / 4, c);

  Var<T> x_w1 = window_attention(s, prefix + ".win1", f_w1, cfg.heads_gab_win, false);
  Var<T> x_w2 = window_attention(s, prefix + ".win2", f_w2, cfg.heads_gab_win, true);

  const std::string gp = prefix + ".grid";
  const Shape groups{n * k * k, grid.group_h * grid.group_w, c / 2};
  Var<T> g = linear(s, gp + ".g", ag::reshape(grid_shuffle(x, k), Shape{groups[0], groups[1], c}));
  AttentionVars<T> p = attention_vars(s, gp, cfg.heads_gab_grid);
  const int64_t extent = cfg.grid_extent();
  Var<T> bias = gather_bias(p.table, p.heads, grid.group_h, grid.group_w, extent, extent);
  const double d = static_cast<double>(c / 2 / p.heads);
  const double scale = cfg.legacy_grid_scale ? 1.0 / d : 1.0 / std::sqrt(d);
  const Capture<T> cap = prefixed(s, gp);
  Var<T> x_g = grid_msa(ag::reshape(grid_shuffle(f_g, k), groups), g, p, bias, scale, &cap);
  x_g = grid_unshuffle(ag::reshape(x_g, Shape{groups[0], grid.group_h, grid.group_w, c / 2}), k, h, w);

  Var<T> cat = ag::concat_lastdim(std::vector<Var<T>>{x_w1, x_w2, x_g});
  return ag::add(layer_norm(s, prefix + ".norm", linear(s, prefix + ".proj", cat)), x);
}

template <typename T>
Var<T> gab_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  Var<T> f = mal_forward(s, prefix + ".mal", x);
  return ag::add(layer_norm(s, prefix + ".norm", mlp(s, prefix + ".mlp", f)), f);
}

template <typename T>
Var<T> rhtb_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x) {
  Var<T> y = x;
  for (int j = 0; j < s.cfg.n_fab; ++j) {
    const std::string f = prefix + ".fab." + std::to_string(j);
    y = fab_forward(s, f, y);
    s.emit(f, y);
  }
  y = gab_forward(s, prefix + ".gab", y);
  s.emit(prefix + ".gab", y);
  y = ag::nchw_to_nhwc(conv3x3(s, prefix + ".conv", ag::nhwc_to_nchw(y)));
  return ag::add(y, x);
}

template <typename T>
Var<T> hma_forward(const Scope<T>& s, const Var<T>& img) {
  const HmaConfig& cfg = s.cfg;
  if (img.rank() != 4 || img.dim(1) != cfg.in_channels) {
    throw ShapeError("expected N x " + std::to_string(cfg.in_channels) + " x H x W input, got " +
                     to_string(img.shape()));
  }
  check_input_geometry(cfg, img.dim(2), img.dim(3));
  Var<T> f0 = conv3x3(s, "shallow", img);
  Var<T> t = ag::nchw_to_nhwc(f0);
  s.emit("shallow", t);
  for (int i = 0; i < cfg.n_rhtb; ++i) {
    const std::string r = "body." + std::to_string(i);
    t = rhtb_forward(s, r, t);
    s.emit(r, t);
  }
  Var<T> body = conv3x3(s, "body_conv", ag::nhwc_to_nchw(t));
  Var<T> y = conv3x3(s, "recon.conv_before", ag::add(body, f0));
  if (cfg.scale == 3) {
    y = ag::pixel_shuffle(conv3x3(s, "recon.up.0", y), 3);
  } else {
    for (int k = 0; (1 << (k + 1)) <= cfg.scale; ++k) {
      y = ag::pixel_shuffle(conv3x3(s, "recon.up." + std::to_string(k), y), 2);
    }
  }
  return conv3x3(s, "recon.conv_last", y);
}

template <typename T>
HmaModel<T>::HmaModel(HmaConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  Rng rng(seed);
  for (const auto& spec : param_specs(cfg_)) params_.add(spec.name, init_tensor<T>(spec, rng));
}

template <typename T>
HmaModel<T>::HmaModel(HmaConfig cfg, ParamStore<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  const auto specs = param_specs(cfg_);
  if (specs.size() != params_.size()) {
    throw ShapeError("parameter count " + std::to_string(params_.size()) + " does not match config (" +
                     std::to_string(specs.size()) + ")");
  }
  for (const auto& spec : specs) {
    if (!params_.contains(spec.name)) throw ShapeError("missing parameter '" + spec.name + "'");
    const auto& shape = params_.at(spec.name).value.shape();
    if (shape != spec.shape) {
      throw ShapeError("parameter '" + spec.name + "' has shape " + to_string(shape) + ", config expects " +
                       to_string(spec.shape));
    }
  }
}

template <typename T>
Var<T> HmaModel<T>::forward(Tape<T>& tape, const Var<T>& img, const Capture<T>* capture) {
  Scope<T> s{tape, params_, cfg_, capture};
  return hma_forward(s, img);
}

template <typename T>
Tensor<T> HmaModel<T>::infer(const Tensor<T>& img) {
  Tape<T> tape(false);
  return forward(tape, tape.constant(img)).value();
}

#define HMA_INSTANTIATE(T)                                                                          \
  template Tensor<T> init_tensor(const ParamSpec&, Rng&);                                           \
  template Var<T> fused_conv_forward(const Scope<T>&, const std::string&, const Var<T>&);           \
  template Var<T> stl_forward(const Scope<T>&, const std::string&, const Var<T>&, bool);            \
  template Var<T> fab_forward(const Scope<T>&, const std::string&, const Var<T>&);                  \
  template Var<T> mal_forward(const Scope<T>&, const std::string&, const Var<T>&);                  \
  template Var<T> gab_forward(const Scope<T>&, const std::string&, const Var<T>&);                  \
  template Var<T> rhtb_forward(const Scope<T>&, const std::string&, const Var<T>&);                 \
  template Var<T> hma_forward(const Scope<T>&, const Var<T>&);                                      \
  template AttentionVars<T> attention_vars(const Scope<T>&, const std::string&, int);               \
  template Var<T> layer_norm(const Scope<T>&, const std::string&, const Var<T>&);                   \
  template Var<T> linear(const Scope<T>&, const std::string&, const Var<T>&);                       \
  template Var<T> conv3x3(const Scope<T>&, const std::string&, const Var<T>&);                      \
  template class HmaModel<T>;

HMA_INSTANTIATE(float)
HMA_INSTANTIATE(double)
#undef HMA_INSTANTIATE

}  // namespace hma
