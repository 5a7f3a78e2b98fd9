#include "hma/complexity.hpp"

#include <cstdio>
#include <map>

#include "hma/model.hpp"

namespace hma {
namespace {

const std::vector<std::string> kFamilies{
    "shallow",          "fab.fused_conv",     "fab.stl.attention", "fab.stl.mlp_norm", "gab.mal.window",
    "gab.mal.grid",     "gab.mal.proj_norm",  "gab.mlp_norm",      "rhtb.conv",        "body_conv",
    "recon"};

std::string family_of(const std::string& name) {
  auto has = [&](const char* s) { return name.find(s) != std::string::npos; };
  if (name.rfind("shallow", 0) == 0) return "shallow";
  if (name.rfind("body_conv", 0) == 0) return "body_conv";
  if (name.rfind("recon", 0) == 0) return "recon";
  if (has(".fused.")) return "fab.fused_conv";
  if (has(".stl.")) return has(".attn.") ? "fab.stl.attention" : "fab.stl.mlp_norm";
  if (has(".mal.win")) return "gab.mal.window";
  if (has(".mal.grid")) return "gab.mal.grid";
  if (has(".mal.")) return "gab.mal.proj_norm";
  if (has(".gab.")) return "gab.mlp_norm";
  return "rhtb.conv";
}

}  // namespace

ComplexityReport count_params_macs(const HmaConfig& cfg, int64_t h, int64_t w) {
  validate(cfg);
  std::map<std::string, ComplexityItem> items;
  for (const auto& f : kFamilies) items[f].module = f;
  for (const auto& spec : param_specs(cfg)) items[family_of(spec.name)].params += numel(spec.shape);

  const int64_t c = cfg.channels, e = cfg.expanded_channels(), se = cfg.se_channels(), hid = cfg.mlp_hidden();
  const int64_t hw = h * w, m2 = static_cast<int64_t>(cfg.window) * cfg.window;
  const int64_t kk = static_cast<int64_t>(cfg.grid_interval) * cfg.grid_interval;
  const int64_t blocks = cfg.n_rhtb, fabs = cfg.n_rhtb * cfg.n_fab;
  const int64_t c2 = c / 2, c4 = c / 4;

  items["shallow"].macs = hw * c * cfg.in_channels * 9;
  items["fab.fused_conv"].macs = fabs * (hw * e * c * 9 + 2 * e * se + hw * e * c);
  // Two STLs per FAB: q, k, v, proj projections plus QK^T and AV per window.
  items["fab.stl.attention"].macs = fabs * 2 * (4 * hw * c * c + 2 * hw * m2 * c);
  items["fab.stl.mlp_norm"].macs = fabs * 2 * (2 * hw * c * hid);
  items["gab.mal.window"].macs = blocks * 2 * (4 * hw * c4 * c4 + 2 * hw * m2 * c4);
  // q, k, v, proj on C/2; g from C; two attention stages of two matmuls each.
  items["gab.mal.grid"].macs = blocks * (4 * hw * c2 * c2 + hw * c * c2 + 4 * hw * (hw / kk) * c2);
  items["gab.mal.proj_norm"].macs = blocks * hw * c * c;
  items["gab.mlp_norm"].macs = blocks * 2 * hw * c * hid;
  items["rhtb.conv"].macs = blocks * hw * c * c * 9;
  items["body_conv"].macs = hw * c * c * 9;

  int64_t recon = hw * c * c * 9;
  int64_t area = hw;
  if (cfg.scale == 3) {
    recon += area * 9 * c * c * 9;
    area *= 9;
  } else {
    for (int k = 0; (1 << (k + 1)) <= cfg.scale; ++k) {
      recon += area * 4 * c * c * 9;
      area *= 4;
    }
  }
  recon += area * cfg.in_channels * c * 9;
  items["recon"].macs = recon;

  ComplexityReport r;
  for (const auto& f : kFamilies) {
    r.params += items[f].params;
    r.macs += items[f].macs;
    r.items.push_back(items[f]);
  }
  return r;
}

std::string format_report(const ComplexityReport& r, int64_t ref_params, int64_t ref_macs) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %14s %10s %18s %10s\n", "module", "params", "share", "multiply_adds",
                "share");
  out += line;
  for (const auto& it : r.items) {
    std::snprintf(line, sizeof line, "%-20s %14lld %9.2f%% %18lld %9.2f%%\n", it.module.c_str(),
                  static_cast<long long>(it.params), 100.0 * it.params / std::max<int64_t>(r.params, 1),
                  static_cast<long long>(it.macs), 100.0 * it.macs / std::max<int64_t>(r.macs, 1));
    out += line;
  }
  std::snprintf(line, sizeof line, "%-20s %14lld %10s %18lld\n", "total", static_cast<long long>(r.params), "",
                static_cast<long long>(r.macs));
  out += line;
  if (ref_params > 0 && ref_macs > 0) {
    std::snprintf(line, sizeof line, "%-20s %14lld %+9.1f%% %18lld %+9.1f%%\n", "reference",
                  static_cast<long long>(ref_params), 100.0 * (r.params - ref_params) / ref_params,
                  static_cast<long long>(ref_macs), 100.0 * (r.macs - ref_macs) / ref_macs);
    out += line;
  }
  return out;
}

}  // namespace hma
