#include "tide/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "tide/baselines.hpp"
#include "tide/config.hpp"
#include "tide/error.hpp"
#include "tide/io.hpp"
#include "tide/kernels.hpp"
#include "tide/metrics.hpp"

namespace tide {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IOFailure, "cannot write " + path.string());
  f << text;
}

Image load_input(const fs::path& path, int n_down, int resize) {
  Image img = io::read_png(path);
  if (resize > 0) img = io::resize_bilinear(img, resize, resize);
  return io::center_crop_valid(img, n_down, path.filename().string());
}

PairedDataset load_pairs(const fs::path& input_dir, const fs::path& target_dir, int n_down) {
  PairedDataset ds;
  for (const auto& p : io::list_images(input_dir)) {
    const fs::path ref = target_dir / p.filename();
    if (!fs::exists(ref)) throw Error(ErrorCode::MissingPair, "no target for " + p.filename().string());
    ds.inputs.push_back(load_input(p, n_down, 0));
    ds.targets.push_back(load_input(ref, n_down, 0));
    ds.names.push_back(p.filename().string());
  }
  return ds;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Image signed_to_image(const Tensor<float>& t) {
  Image img(t.h(), t.w());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x) img.at(c, y, x) = std::clamp(0.5f + 0.5f * t.at(0, c, y, x), 0.0f, 1.0f);
  return img;
}

// Options shared by the three training subcommands.
struct TrainArgs {
  std::string config, data, input, target, out, log, base, checkpoint, preset;
  int epochs = -1, batch = -1;
  long steps = -1;
  double lr = -1;
  long long seed = -1;
  bool fast = false;
};

void add_train_options(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--config", a.config, "INI configuration file");
  sub->add_option("--data", a.data, "dataset root with degraded/ and clean/");
  sub->add_option("--input", a.input, "directory of degraded inputs");
  sub->add_option("--target", a.target, "directory of clean references");
  sub->add_option("--out", a.out, "checkpoint to write")->required();
  sub->add_option("--log", a.log, "per-step CSV log (default: <out>.csv)");
  sub->add_option("--epochs", a.epochs);
  sub->add_option("--batch", a.batch);
  sub->add_option("--steps", a.steps, "stop after this many optimizer steps");
  sub->add_option("--lr", a.lr);
  sub->add_option("--seed", a.seed);
  sub->add_option("--preset", a.preset, "toy or full")->check(CLI::IsMember({"toy", "full"}));
  sub->add_flag("--fast", a.fast, "multi-threaded, not bit-reproducible");
}

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

int run_train(Phase phase, const TrainArgs& a, std::ostream& out) {
  RunConfig rc = config_from(a.config);
  if (a.preset == "full") rc.model = ModelConfig::full();
  if (a.preset == "toy") rc.model = ModelConfig::toy();

  Checkpoint prior;
  if (phase != Phase::Base) {
    prior = load_checkpoint(phase == Phase::Refine ? a.base : a.checkpoint);
    rc.model = prior.model;
  }
  TrainConfig cfg = rc.train_config(phase);
  if (a.epochs >= 0) cfg.epochs = a.epochs;
  if (a.batch > 0) cfg.batch = a.batch;
  if (a.steps >= 0) cfg.max_steps = a.steps;
  if (a.lr > 0) cfg.lr = a.lr;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.fast) cfg.deterministic = false;

  fs::path in_dir = a.input.empty() ? rc.input : fs::path(a.input);
  fs::path tgt_dir = a.target.empty() ? rc.target : fs::path(a.target);
  if (!a.data.empty()) {
    in_dir = fs::path(a.data) / "degraded";
    tgt_dir = fs::path(a.data) / "clean";
  }
  if (in_dir.empty() || tgt_dir.empty()) throw UsageError("training needs --data or both --input and --target");
  const PairedDataset ds = load_pairs(in_dir, tgt_dir, cfg.model.n_down);

  TrainResult r;
  if (phase == Phase::Base) r = train_base(ds, cfg);
  else if (phase == Phase::Refine) r = train_refine(ds, prior, cfg);
  else r = train_combined(ds, prior, cfg);

  save_checkpoint(r.checkpoint, a.out);
  const fs::path log = a.log.empty() ? fs::path(a.out + ".csv") : fs::path(a.log);
  write_text(log, r.log.csv());
  out << "trained " << to_string(phase) << " for " << r.log.rows.size() << " steps on " << ds.size() << " pairs\n"
      << "checkpoint: " << a.out << "\nlog: " << log.string() << '\n';
  return 0;
}

void dump_intermediates(const fs::path& dir, const RestorationResult& r) {
  fs::create_directories(dir);
  io::write_png(dir / "initial.png", Image(r.initial.clone()));
  for (int k = 0; k < kDegradationTypes; ++k) {
    const std::string kind(to_string(kAllKinds[k]));
    io::write_png(dir / ("hypothesis_" + kind + ".png"), Image(r.hypotheses[k].clone()));
    io::write_gray_png(dir / ("map_" + kind + ".png"), r.maps, k);
  }
  if (!r.refined) return;
  for (int k = 0; k < kDegradationTypes; ++k)
    io::write_gray_png(dir / ("residual_" + std::string(to_string(kAllKinds[k])) + ".png"), r.residual_maps, k);
  io::write_gray_png(dir / "gate.png", r.gate);
  io::write_png(dir / "correction.png", signed_to_image(r.fused_correction));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage degradation-aware underwater image restoration", "tide"};
  app.require_subcommand(1);

  // simulate
  std::string sim_out, sim_config;
  int sim_count = 8, sim_size = 64, sim_ndown = 3;
  long long sim_seed = -1;
  auto* sim = app.add_subcommand("simulate", "write a synthetic paired dataset");
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--count", sim_count, "number of pairs")->check(CLI::PositiveNumber);
  sim->add_option("--size", sim_size, "square image size");
  sim->add_option("--seed", sim_seed);
  sim->add_option("--n-down", sim_ndown, "size must be divisible by 2^n_down");
  sim->add_option("--config", sim_config, "INI configuration ([simulate] section)");

  TrainArgs tb, tr, tc;
  auto* train_base_cmd = app.add_subcommand("train-base", "train the first stage");
  add_train_options(train_base_cmd, tb);
  auto* train_refine_cmd = app.add_subcommand("train-refine", "train the refinement stage on a frozen base");
  add_train_options(train_refine_cmd, tr);
  train_refine_cmd->add_option("--base", tr.base, "base-phase checkpoint")->required();
  auto* train_combined_cmd = app.add_subcommand("train-combined", "fine-tune both stages jointly");
  add_train_options(train_combined_cmd, tc);
  train_combined_cmd->add_option("--checkpoint", tc.checkpoint, "checkpoint with both stages")->required();

  // restore
  std::string rs_ckpt, rs_in, rs_out;
  bool rs_dump = false;
  int rs_resize = 0;
  auto* rs = app.add_subcommand("restore", "restore every PNG in a directory");
  rs->add_option("--checkpoint", rs_ckpt)->required();
  rs->add_option("--input", rs_in)->required();
  rs->add_option("--out", rs_out)->required();
  rs->add_option("--resize", rs_resize, "resize inputs to SxS before cropping");
  rs->add_flag("--dump-intermediates", rs_dump, "write hypotheses, maps, residual maps, gate and correction");

  // evaluate
  std::string ev_pred, ev_ref, ev_metrics = "psnr,ssim", ev_out;
  auto* ev = app.add_subcommand("evaluate", "score restored images against references");
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--ref", ev_ref)->required();
  ev->add_option("--metrics", ev_metrics, "comma list of psnr,ssim,uicm,uiconm,uism,uiqm");
  ev->add_option("--out", ev_out, "CSV path (default: stdout)");

  // baseline
  std::string bl_method, bl_in, bl_out;
  baselines::Params bl_params;
  auto* bl = app.add_subcommand("baseline", "apply a classical enhancement method");
  bl->add_option("--method", bl_method, "wb, gamma, he, clahe, dcp, udcp or rcp")->required();
  bl->add_option("--input", bl_in)->required();
  bl->add_option("--out", bl_out)->required();
  bl->add_option("--gamma", bl_params.gamma);
  bl->add_option("--clip", bl_params.clahe_clip);
  bl->add_option("--tiles", bl_params.clahe_tiles);
  bl->add_option("--patch", bl_params.patch);
  bl->add_option("--omega", bl_params.omega);
  bl->add_option("--t0", bl_params.t0);

  // bench
  std::string bn_ckpt, bn_preset = "toy";
  int bn_size = 64, bn_batch = 1, bn_iters = 10, bn_warmup = 2;
  bool bn_fast = false;
  auto* bn = app.add_subcommand("bench", "measure restore latency and throughput");
  bn->add_option("--checkpoint", bn_ckpt, "checkpoint (default: randomly initialised preset)");
  bn->add_option("--preset", bn_preset)->check(CLI::IsMember({"toy", "full"}));
  bn->add_option("--size", bn_size);
  bn->add_option("--batch", bn_batch)->check(CLI::PositiveNumber);
  bn->add_option("--iters", bn_iters)->check(CLI::PositiveNumber);
  bn->add_option("--warmup", bn_warmup);
  bn->add_flag("--fast", bn_fast, "use all threads");

  // params
  std::string pc_ckpt, pc_preset = "toy";
  auto* pc = app.add_subcommand("params", "count first- and second-stage parameters");
  pc->add_option("--checkpoint", pc_ckpt);
  pc->add_option("--preset", pc_preset)->check(CLI::IsMember({"toy", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*sim) {
      RunConfig rc = config_from(sim_config);
      sim::DegradeParams p = rc.simulate;
      if (sim_seed >= 0) p.seed = static_cast<std::uint64_t>(sim_seed);
      const auto m = sim::make_dataset(sim_count, sim_size, sim_out, p, sim_ndown);
      out << "wrote " << m.names.size() << " pairs to " << sim_out << '\n';
      return 0;
    }
    if (*train_base_cmd) return run_train(Phase::Base, tb, out);
    if (*train_refine_cmd) return run_train(Phase::Refine, tr, out);
    if (*train_combined_cmd) return run_train(Phase::Combined, tc, out);

    if (*rs) {
      const Checkpoint ckpt = load_checkpoint(rs_ckpt);
      Restorer restorer(ckpt);
      const auto files = io::list_images(rs_in);
      fs::create_directories(rs_out);
      for (const auto& f : files) {
        const Image img = load_input(f, ckpt.model.n_down, rs_resize);
        const RestorationResult r = restorer.restore(img);
        io::write_png(fs::path(rs_out) / f.filename(), Image(r.final.clone()));
        if (rs_dump) dump_intermediates(fs::path(rs_out) / f.stem(), r);
      }
      out << "restored " << files.size() << " images into " << rs_out << '\n';
      return 0;
    }

    if (*ev) {
      const auto report = metrics::evaluate_pairs(ev_pred, ev_ref, split_list(ev_metrics));
      if (ev_out.empty()) out << report.csv();
      else write_text(ev_out, report.csv());
      return 0;
    }

    if (*bl) {
      const auto method = baselines::method_from_string(bl_method);
      const auto files = io::list_images(bl_in);
      fs::create_directories(bl_out);
      for (const auto& f : files)
        io::write_png(fs::path(bl_out) / f.filename(), baselines::apply_baseline(io::read_png(f), method, bl_params));
      out << "applied " << bl_method << " to " << files.size() << " images\n";
      return 0;
    }

    if (*bn) {
      Checkpoint ckpt;
      if (!bn_ckpt.empty()) {
        ckpt = load_checkpoint(bn_ckpt);
      } else {
        TideModel<float> model(bn_preset == "full" ? ModelConfig::full() : ModelConfig::toy());
        model.initialize(0);
        ckpt = make_checkpoint(model, Phase::Refine, 0, 0);
      }
      const int prev = kernels::num_threads();
      if (!bn_fast) kernels::set_num_threads(1);
      Restorer restorer(ckpt);
      Tensor<float> batch(Shape{bn_batch, 3, bn_size, bn_size});
      std::mt19937 rng(0);
      std::uniform_real_distribution<float> d(0.0f, 1.0f);
      for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = d(rng);
      for (int i = 0; i < bn_warmup; ++i) restorer.restore_batch(batch);
      const auto t0 = std::chrono::steady_clock::now();
      for (int i = 0; i < bn_iters; ++i) restorer.restore_batch(batch);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      kernels::set_num_threads(prev);
      const ParamCounts pcount = count_parameters(ckpt);
      const double latency = secs / bn_iters * 1e3;
      out << "# restore benchmark, " << (bn_fast ? "fast mode" : "deterministic mode (single thread)") << ", "
          << (bn_fast ? kernels::num_threads() : 1) << " thread(s)\n";
      out << "resolution,batch,latency_ms,fps,base_params,refine_params,refine_ratio\n";
      char row[256];
      std::snprintf(row, sizeof(row), "%dx%d,%d,%.3f,%.2f,%zu,%zu,%.6f\n", bn_size, bn_size, bn_batch, latency,
                    bn_batch / (latency / 1e3), pcount.base, pcount.refine, pcount.ratio());
      out << row;
      return 0;
    }

    if (*pc) {
      const ParamCounts p = pc_ckpt.empty()
                                ? count_parameters(pc_preset == "full" ? ModelConfig::full() : ModelConfig::toy())
                                : count_parameters(load_checkpoint(pc_ckpt));
      char buf[256];
      std::snprintf(buf, sizeof(buf), "base %zu\nrefine %zu\nratio %.6f\n", p.base, p.refine, p.ratio());
      out << buf;
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace tide
