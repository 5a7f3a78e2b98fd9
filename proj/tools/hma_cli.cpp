// hma: train, run and inspect HMA super-resolution models.
//
// Exit codes: 0 success, 1 usage, 2 unreadable or invalid data, 3 numeric failure.

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hma/analysis.hpp"
#include "hma/complexity.hpp"
#include "hma/imaging.hpp"
#include "hma/tiling.hpp"
#include "hma/training.hpp"

namespace fs = std::filesystem;
using namespace hma;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> image_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw FormatError("no PNG/PPM/PGM images in " + dir);
  return out;
}

ImageF32 load_rgb(const std::string& path) {
  ImageF32 img = to_float(load_image(path));
  if (img.channels == 3) return img;
  ImageF32 rgb(img.width, img.height, 3);
  for (size_t p = 0; p < img.data.size(); ++p)
    for (int c = 0; c < 3; ++c) rgb.data[p * 3 + c] = img.data[p];
  return rgb;
}

/// Tile defaults to the model's img_size; overlap to a quarter tile.
void resolve_tiling(const HmaConfig& cfg, int& tile, int& overlap) {
  if (tile <= 0) tile = cfg.img_size - cfg.img_size % cfg.pad_multiple();
  if (overlap < 0) overlap = tile / 4;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, data_dir, out, preset = "toy", init_ckpt, trace;
  uint64_t seed = 0;
  int64_t iters = 0;
};

int cmd_train(const TrainArgs& a) {
  const HmaConfig cfg = load_config(a.config);
  TrainConfig tc = preset_by_name(a.preset);
  tc.seed = a.seed;
  if (a.iters > 0) {
    tc.total_iters = a.iters;
    std::erase_if(tc.milestones, [&](int64_t m) { return m >= a.iters; });
  }
  const Dataset data = load_dataset(a.data_dir, cfg.scale);

  HmaModel<float> model = [&] {
    if (a.init_ckpt.empty()) return HmaModel<float>(cfg, a.seed);
    TransferReport report;
    HmaModel<float> m = transfer_parameters(load_checkpoint(a.init_ckpt), cfg, a.seed, &report);
    std::cout << report.summary() << "\n";
    return m;
  }();

  OptimizerState<float> state;
  std::ostringstream trace;
  trace << "iter,loss,lr\n";
  TrainHooks hooks;
  hooks.on_log = [&](const LossRecord& r) {
    trace << r.iter << "," << fixed(r.loss, 9) << "," << r.lr << "\n";
    std::cout << "iter " << r.iter << " loss " << fixed(r.loss, 6) << " lr " << r.lr << std::endl;
  };
  train_loop(model, state, data, tc, hooks);

  save_checkpoint(a.out, cfg, model.params(), &state, static_cast<uint64_t>(state.t));
  write_text(a.trace.empty() ? a.out + ".loss.csv" : a.trace, trace.str());
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- upscale

struct UpscaleArgs {
  std::string ckpt, input, output;
  int tile = 0, overlap = -1;
};

int cmd_upscale(const UpscaleArgs& a) {
  Checkpoint ck = load_checkpoint(a.ckpt);
  HmaModel<float> model(ck.config, std::move(ck.params));
  int tile = a.tile, overlap = a.overlap;
  resolve_tiling(model.config(), tile, overlap);
  const ImageF32 out = tiled_inference(load_rgb(a.input), model, tile, overlap);
  save_image(to_u8(out), a.output);
  std::cout << "wrote " << a.output << " (" << out.width << "x" << out.height << ")\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string ckpt, hr_dir, report;
  int scale = 0, tile = 0, overlap = -1;
  bool bicubic = false;
};

ImageF32 crop(const ImageF32& img, int w, int h) {
  ImageF32 out(w, h, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, x, c);
  return out;
}

int cmd_eval(const EvalArgs& a) {
  if (a.ckpt.empty() && !a.bicubic) throw UsageError("eval needs --ckpt or --bicubic-baseline");
  std::optional<HmaModel<float>> model;
  int scale = a.scale;
  if (!a.bicubic) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    if (scale != 0 && scale != ck.config.scale)
      throw UsageError("--scale " + std::to_string(scale) + " does not match the checkpoint's scale " +
                       std::to_string(ck.config.scale));
    model.emplace(ck.config, std::move(ck.params));
    scale = ck.config.scale;
  }
  if (scale < 2) throw UsageError("--scale must be given and >= 2");
  int tile = a.tile, overlap = a.overlap;
  if (model) resolve_tiling(model->config(), tile, overlap);

  std::ostringstream csv;
  csv << "image,psnr_db,ssim\n";
  double psnr_sum = 0.0, ssim_sum = 0.0;
  const auto files = image_files(a.hr_dir);
  for (const auto& f : files) {
    const ImageF32 hr = load_rgb(f);
    const ImageF32 lr = bicubic_degrade(hr, scale);
    const ImageF32 sr = model ? tiled_inference(lr, *model, tile, overlap)
                              : bicubic_resize(lr, lr.height * scale, lr.width * scale, false);
    const ImageF32 cropped = crop(sr, hr.width, hr.height);
    const double p = psnr_y(cropped, hr, scale), s = ssim_y(cropped, hr, scale);
    if (!std::isfinite(s)) throw NumericError("SSIM is not finite for " + f);
    psnr_sum += p;
    ssim_sum += s;
    csv << fs::path(f).filename().string() << "," << format_db(p) << "," << fixed(s, 6) << "\n";
    std::cout << fs::path(f).filename().string() << "  " << format_db(p) << " dB  " << fixed(s, 4) << "\n";
  }
  const double n = static_cast<double>(files.size());
  csv << "mean," << format_db(psnr_sum / n) << "," << fixed(ssim_sum / n, 6) << "\n";
  write_text(a.report, csv.str());
  std::cout << "mean  " << format_db(psnr_sum / n) << " dB  " << fixed(ssim_sum / n, 4) << "\n";
  return 0;
}

// ---------------------------------------------------------------- degrade / count

int cmd_degrade(const std::string& input, int scale, const std::string& output) {
  const ImageF32 lr = bicubic_degrade(load_rgb(input), scale);
  save_image(to_u8(lr), output);
  std::cout << "wrote " << output << " (" << lr.width << "x" << lr.height << ")\n";
  return 0;
}

int cmd_count(const std::string& config, int size, int64_t ref_params, int64_t ref_macs) {
  const HmaConfig cfg = load_config(config);
  if (size <= 0) size = cfg.img_size;
  std::cout << "input " << size << "x" << size << ", scale x" << cfg.scale << "\n";
  std::cout << format_report(count_params_macs(cfg, size, size), ref_params, ref_macs);
  return 0;
}

// ---------------------------------------------------------------- cka

struct CkaArgs {
  std::string ckpt_a, ckpt_b, probe_dir, report, layers;
};

/// Center crops of every probe image at one common square size.
Tensor<float> probe_batch(const std::string& dir, const HmaConfig& cfg) {
  std::vector<ImageF32> imgs;
  int side = cfg.img_size;
  for (const auto& f : image_files(dir)) {
    imgs.push_back(load_rgb(f));
    side = std::min({side, imgs.back().width, imgs.back().height});
  }
  side -= side % cfg.pad_multiple();
  if (side <= 0) throw FormatError("probe images are smaller than " + std::to_string(cfg.pad_multiple()) + " pixels");
  std::vector<float> data;
  for (const auto& img : imgs) {
    ImageF32 c(side, side, 3);
    const int y0 = (img.height - side) / 2, x0 = (img.width - side) / 2;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int ch = 0; ch < 3; ++ch) c.at(y, x, ch) = img.at(y0 + y, x0 + x, ch);
    const auto t = to_tensor(c);
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor<float>({static_cast<int64_t>(imgs.size()), 3, side, side}, std::move(data));
}

std::vector<std::string> default_layers(const HmaConfig& cfg) {
  std::vector<std::string> out{"shallow"};
  for (int i = 0; i < cfg.n_rhtb; ++i) out.push_back("body." + std::to_string(i));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_cka(const CkaArgs& a) {
  Checkpoint ca = load_checkpoint(a.ckpt_a);
  HmaModel<float> ma(ca.config, std::move(ca.params));
  std::optional<HmaModel<float>> mb;
  if (!a.ckpt_b.empty()) {
    Checkpoint cb = load_checkpoint(a.ckpt_b);
    mb.emplace(cb.config, std::move(cb.params));
  }
  HmaModel<float>& b = mb ? *mb : ma;

  const Tensor<float> probe = probe_batch(a.probe_dir, ma.config());
  const auto la = a.layers.empty() ? default_layers(ma.config()) : split_list(a.layers);
  const auto lb = a.layers.empty() ? default_layers(b.config()) : split_list(a.layers);
  const auto fa = capture_features(ma, probe, la);
  const auto fb = capture_features(b, probe, lb);
  std::vector<FeatureMatrix> ra, rb;
  for (const auto& l : la) ra.push_back(fa.at(l));
  for (const auto& l : lb) rb.push_back(fb.at(l));
  const CkaReport report = cka_grid(la, ra, lb, rb);
  write_text(a.report, report.to_csv());
  std::cout << report.to_csv();
  return 0;
}

// ---------------------------------------------------------------- transfer / synth

int cmd_transfer(const std::string& from, const std::string& to_config, const std::string& out, uint64_t seed) {
  const Checkpoint src = load_checkpoint(from);
  const HmaConfig dst = load_config(to_config);
  TransferReport report;
  HmaModel<float> model = transfer_parameters(src, dst, seed, &report);
  save_checkpoint(out, dst, model.params(), nullptr, 0);
  std::cout << report.summary() << "\nwrote " << out << "\n";
  return 0;
}

int cmd_synth(const std::string& out_dir, int count, int size, uint64_t seed) {
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "texture_%02d.png", i);
    const std::string path = (fs::path(out_dir) / name).string();
    save_image(to_u8(synthetic_texture(size, size, seed + static_cast<uint64_t>(i))), path);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

void apply_thread_cap() {
  const char* env = std::getenv("HMA_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw UsageError(std::string("HMA_THREADS must be a positive integer, got '") + env + "'");
  omp_set_num_threads(static_cast<int>(std::min<long>(n, omp_get_num_procs())));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HMA image super-resolution"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hma 0.1.0");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint plus loss trace");
  t->add_option("--config", train.config, "Model config JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--data-dir", train.data_dir, "Folder of HR training images")->required();
  t->add_option("--out", train.out, "Checkpoint path")->required();
  t->add_option("--preset", train.preset, "Schedule")->check(CLI::IsMember({"pretrain", "finetune", "toy"}));
  t->add_option("--seed", train.seed, "Initialization and sampling seed");
  t->add_option("--init-ckpt", train.init_ckpt, "Start from a checkpoint, transferring matching parameters");
  t->add_option("--iters", train.iters, "Override the preset's iteration count")->check(CLI::PositiveNumber);
  t->add_option("--trace", train.trace, "Loss-trace CSV (default: <out>.loss.csv)");

  UpscaleArgs up;
  auto* u = app.add_subcommand("upscale", "Super-resolve one image");
  u->add_option("--ckpt", up.ckpt, "Checkpoint")->required();
  u->add_option("--input", up.input, "LR image")->required();
  u->add_option("--output", up.output, "Output image (.png or .ppm)")->required();
  u->add_option("--tile", up.tile, "Tile size in LR pixels (default: model img_size)")->check(CLI::PositiveNumber);
  u->add_option("--overlap", up.overlap, "Tile overlap in LR pixels (default: tile/4)")->check(CLI::NonNegativeNumber);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Degrade, upscale and score a folder of HR images");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint");
  e->add_option("--hr-dir", ev.hr_dir, "Folder of HR images")->required();
  e->add_option("--scale", ev.scale, "Scale factor (taken from the checkpoint when omitted)")
      ->check(CLI::Range(2, 8));
  e->add_option("--report", ev.report, "CSV report path")->required();
  e->add_option("--tile", ev.tile, "Tile size in LR pixels")->check(CLI::PositiveNumber);
  e->add_option("--overlap", ev.overlap, "Tile overlap in LR pixels")->check(CLI::NonNegativeNumber);
  e->add_flag("--bicubic-baseline", ev.bicubic, "Score plain bicubic upscaling instead of a model");

  std::string dg_in, dg_out;
  int dg_scale = 0;
  auto* d = app.add_subcommand("degrade", "Bicubic downscale (output size rounds up)");
  d->add_option("--input", dg_in, "HR image")->required();
  d->add_option("--scale", dg_scale, "Scale factor")->required()->check(CLI::Range(2, 8));
  d->add_option("--output", dg_out, "LR image")->required();

  std::string cnt_config;
  int cnt_size = 0;
  int64_t ref_params = 0, ref_macs = 0;
  auto* c = app.add_subcommand("count", "Itemized parameter and multiply-add count");
  c->add_option("--config", cnt_config, "Model config JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--size", cnt_size, "LR input side (default: img_size)")->check(CLI::PositiveNumber);
  c->add_option("--ref-params", ref_params, "Reference parameter total for a delta column");
  c->add_option("--ref-macs", ref_macs, "Reference multiply-add total for a delta column");

  CkaArgs cka;
  auto* k = app.add_subcommand("cka", "Layer-by-layer linear CKA between one or two models");
  k->add_option("--ckpt-a", cka.ckpt_a, "Checkpoint for rows")->required();
  k->add_option("--ckpt-b", cka.ckpt_b, "Checkpoint for columns (default: ckpt-a)");
  k->add_option("--probe-dir", cka.probe_dir, "Folder of probe images")->required();
  k->add_option("--report", cka.report, "CSV report path")->required();
  k->add_option("--layers", cka.layers, "Comma-separated activation paths (default: shallow and each RHTB)");

  std::string tr_from, tr_to, tr_out;
  uint64_t tr_seed = 0;
  auto* x = app.add_subcommand("transfer", "Re-target a checkpoint to another config");
  x->add_option("--from", tr_from, "Source checkpoint")->required();
  x->add_option("--to-config", tr_to, "Target config JSON")->required()->check(CLI::ExistingFile);
  x->add_option("--out", tr_out, "Output checkpoint")->required();
  x->add_option("--seed", tr_seed, "Seed for reinitialized parameters");

  std::string sy_out;
  int sy_count = 4, sy_size = 128;
  uint64_t sy_seed = 0;
  auto* s = app.add_subcommand("synth", "Write smooth synthetic textures for desk-scale runs");
  s->add_option("--out", sy_out, "Output folder")->required();
  s->add_option("--count", sy_count, "Number of images")->check(CLI::PositiveNumber);
  s->add_option("--size", sy_size, "Side length in pixels")->check(CLI::PositiveNumber);
  s->add_option("--seed", sy_seed, "First texture seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    const auto chosen = app.get_subcommands();
    std::cerr << "error: " << err.what() << "\n\n" << (chosen.empty() ? app.help() : chosen.front()->help());
    return kExitUsage;
  }

  try {
    apply_thread_cap();
    if (*t) return cmd_train(train);
    if (*u) return cmd_upscale(up);
    if (*e) return cmd_eval(ev);
    if (*d) return cmd_degrade(dg_in, dg_scale, dg_out);
    if (*c) return cmd_count(cnt_config, cnt_size, ref_params, ref_macs);
    if (*k) return cmd_cka(cka);
    if (*x) return cmd_transfer(tr_from, tr_to, tr_out, tr_seed);
    if (*s) return cmd_synth(sy_out, sy_count, sy_size, sy_seed);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
