// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "oracles.hpp"
#include "support.hpp"
#include "tide/baselines.hpp"
#include "tide/error.hpp"
#include "tide/losses.hpp"
#include "tide/metrics.hpp"
#include "tide/simulate.hpp"
#include "tide/training.hpp"

using namespace tide;
namespace fs = std::filesystem;

namespace {

// Optimizer steps of the overfit run.
constexpr long kBaseSteps = 1500;
constexpr long kRefineSteps = 1000;
constexpr int kPairs = 8;
constexpr int kSize = 64;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

int failures = 0;

void report(int id, const char* title, const Verdict& v, double secs) {
  std::printf("[%s] criterion %2d  %-34s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str(), secs);
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

template <typename Fn>
void run(int id, const char* title, Fn&& body) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.note(std::string("exception: ") + e.what());
  }
  report(id, title, v, seconds_since(t0));
}

double psnr_of(const Tensor<float>& a, const Image& b) { return metrics::psnr(Image(a.clone()), b); }

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double c = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return c / std::sqrt(va * vb);
}

// Mean improvement loss of a checkpoint over the training set.
double mean_improvement(const Checkpoint& ckpt, const PairedDataset& d, double eps) {
  Restorer r(ckpt);
  double total = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto out = r.restore(d.inputs[i]);
    ag::NoGradGuard guard;
    total += improvement_loss(ag::Var<float>(out.final), ag::Var<float>(out.initial),
                              ag::Var<float>(d.targets[i].tensor()), static_cast<float>(eps))
                 .value()[0];
  }
  return total / static_cast<double>(d.size());
}

// State shared by the overfit criterion and the ones that inspect its run.
struct OverfitRun {
  std::vector<sim::Pair> pairs;
  PairedDataset data;
  TrainConfig base_cfg, refine_cfg;
  TrainResult base, refine;
  double base_secs = 0, refine_secs = 0;
  bool done = false;
};

}  // namespace

int main() {
  set_warnings_quiet(true);
  const auto start = Clock::now();

  run(1, "metric oracle equivalence", [](Verdict& v) {
    const auto t0 = Clock::now();
    std::mt19937 rng(2024);
    double worst = 0, worst_ssim = 0;
    for (int i = 0; i < 20; ++i) {
      const Image a = test::random_image(16, 16, rng), b = test::random_image(16, 16, rng);
      worst = std::max(worst, std::abs(metrics::psnr(a, b) - oracle::psnr(a, b)));
      worst = std::max(worst, std::abs(metrics::uicm(a) - oracle::uicm(a)));
      worst = std::max(worst, std::abs(metrics::uiconm(a) - oracle::uiconm(a)));
      worst = std::max(worst, std::abs(metrics::uism(a) - oracle::uism(a)));
      worst_ssim = std::max(worst_ssim, std::abs(metrics::ssim(a, b) -
                                                 oracle::ssim(test::cast<double>(a.tensor()),
                                                              test::cast<double>(b.tensor()))));
    }
    const double secs = seconds_since(t0);
    v.require(worst < 1e-6, fmt("psnr/uicm/uiconm/uism max diff %.3g", worst));
    v.require(worst_ssim < 1e-4, fmt("ssim max diff %.3g", worst_ssim));
    v.require(secs < 30, fmt("runtime %.1f s", secs));
    v.note(fmt("max diff %.2g", worst) + fmt(", ssim %.2g", worst_ssim));
  });

  run(2, "UICM neutral and constant images", [](Verdict& v) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> u(0, 1);
    double worst_gray = 0, worst_const = 0, max_const = -1e9;
    for (int t = 0; t < 20; ++t) {
      Image gray(16, 16);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          const float g = t < 10 ? u(rng) : 0.05f * t;
          for (int c = 0; c < 3; ++c) gray.at(c, y, x) = g;
        }
      worst_gray = std::max(worst_gray, std::abs(metrics::uicm(gray)));

      const float r = u(rng), g = u(rng), b = u(rng);
      Image flat(16, 16);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) flat.at(0, y, x) = r, flat.at(1, y, x) = g, flat.at(2, y, x) = b;
      const auto lab = metrics::srgb_to_lab(r, g, b);
      const double val = metrics::uicm(flat);
      // With zero spread only the mean penalty remains.
      worst_const = std::max(worst_const, std::abs(val - (-0.0268 * std::hypot(lab[1], lab[2]))));
      max_const = std::max(max_const, val);
    }
    v.require(worst_gray < 1e-4, fmt("gray |UICM| %.3g", worst_gray));
    v.require(worst_const < 1e-12, fmt("constant-image sigma residue %.3g", worst_const));
    v.require(max_const <= 0, fmt("constant-image UICM max %.3g", max_const));
    v.note(fmt("gray max |UICM| %.2g", worst_gray) + fmt(", constant max %.3f", max_const));
  });

  run(3, "loss gradient suite", [](Verdict& v) {
    const auto t0 = Clock::now();
    std::mt19937 rng(11);
    const Shape s8{1, 3, 8, 8}, s16{1, 3, 16, 16};
    const RandomConvFeatures<double> feat;
    auto r8 = [&] { return test::random_tensor<double>(s8, rng, 0, 1); };
    struct Case {
      const char* name;
      test::ScalarFn f;
      std::vector<Tensor<double>> inputs;
      std::vector<int> wrt;
    };
    std::vector<Case> cases;
    cases.push_back({"diversity", [](auto& x) { return diversity_loss<double>({x[0], x[1], x[2], x[3]}); },
                     {r8(), r8(), r8(), r8()}, {}});
    cases.push_back({"consistency", [](auto& x) { return consistency_loss(x[0], x[1], x[2]); },
                     {test::random_tensor<double>(Shape{1, 4, 8, 8}, rng, 0, 1), r8(), r8()}, {0}});
    cases.push_back({"magnitude", [](auto& x) { return magnitude_loss(x[0]); },
                     {test::random_tensor<double>(s8, rng, -1, 1)}, {}});
    // Final near the reference so the hinge is active, away from its kink.
    cases.push_back({"improvement", [](auto& x) { return improvement_loss(x[0], x[1], x[2], 0.01); },
                     {test::random_tensor<double>(s8, rng, 0.45, 0.55), r8(), test::random_tensor<double>(s8, rng, 0.4, 0.6)},
                     {0, 1}});
    cases.push_back({"l1", [](auto& x) { return l1_loss(x[0], x[1]); }, {r8(), r8()}, {0}});
    cases.push_back({"ssim", [](auto& x) { return ssim_loss(x[0], x[1]); },
                     {test::random_tensor<double>(s16, rng, 0, 1), test::random_tensor<double>(s16, rng, 0, 1)}, {}});
    cases.push_back({"perceptual", [&](auto& x) { return perceptual_loss(x[0], x[1], feat); }, {r8(), r8()}, {0}});
    double worst = 0;
    for (auto& c : cases) {
      const auto g = test::gradcheck(c.f, c.inputs, 24, rng, c.wrt);
      worst = std::max(worst, g.worst_rel);
      v.require(g.worst_rel < 1e-3, fmt((std::string(c.name) + " rel err %.3g").c_str(), g.worst_rel));
      v.require(g.checked >= 20, std::string(c.name) + " too few samples");
    }
    const double secs = seconds_since(t0);
    v.require(secs < 120, fmt("runtime %.1f s", secs));
    v.note(fmt("7 losses, worst rel err %.2g", worst));
  });

  run(4, "structural invariants", [](Verdict& v) {
    std::mt19937 rng(31);
    std::normal_distribution<double> scale(0.0, 1.5);
    double worst_sum = 0, worst_hull = 0;
    int bad_maps = 0, bad_hyps = 0, bad_corr = 0, bad_final = 0;
    for (int trial = 0; trial < 100; ++trial) {
      TideModel<float> model(ModelConfig::toy());
      model.initialize(1000 + trial);
      auto& ps = model.params();
      for (int k = 0; k < 4; ++k) ps.at(model.expert(k).scale_id()).value[0] = static_cast<float>(scale(rng));
      ps.at(model.gate().scale_id()).value[0] = static_cast<float>(scale(rng));
      const ag::Var<float> img(test::random_image(16, 16, rng).tensor());
      ag::NoGradGuard guard;
      const auto base = model.forward_base(img);
      const auto refine = model.forward_refine(img, base.initial);
      const auto& maps = base.maps.value();
      for (std::size_t i = 0; i < maps.size(); ++i) bad_maps += maps[i] < 0 || maps[i] > 1;
      for (const auto& h : base.hyps)
        for (std::size_t i = 0; i < h.value().size(); ++i) bad_hyps += h.value()[i] < 0 || h.value()[i] > 1;
      const auto& w = base.weights.value();
      const std::size_t plane = 16 * 16;
      for (std::size_t p = 0; p < plane; ++p) {
        double s = 0;
        for (int k = 0; k < 4; ++k) s += w[k * plane + p];
        worst_sum = std::max(worst_sum, std::abs(s - 1));
      }
      const auto& j1 = base.initial.value();
      for (std::size_t i = 0; i < j1.size(); ++i) {
        double lo = 1, hi = 0;
        for (const auto& h : base.hyps) lo = std::min(lo, double(h.value()[i])), hi = std::max(hi, double(h.value()[i]));
        worst_hull = std::max({worst_hull, lo - j1[i], j1[i] - hi});
      }
      for (int k = 0; k < 4; ++k) {
        const double bound = 1 / (1 + std::exp(-double(ps.at(model.expert(k).scale_id()).value[0])));
        const auto& c = refine.corrections[k].value();
        for (std::size_t i = 0; i < c.size(); ++i) bad_corr += std::abs(c[i]) > bound * (1 + 1e-6);
      }
      const auto& fin = refine.fusion.final.value();
      for (std::size_t i = 0; i < fin.size(); ++i) bad_final += fin[i] < 0 || fin[i] > 1;
    }
    v.require(bad_maps == 0, std::to_string(bad_maps) + " map values outside [0,1]");
    v.require(bad_hyps == 0, std::to_string(bad_hyps) + " hypothesis values outside [0,1]");
    v.require(worst_sum <= 1e-5, fmt("fusion weight sum error %.3g", worst_sum));
    v.require(bad_corr == 0, std::to_string(bad_corr) + " corrections above sigma(s_k)");
    v.require(bad_final == 0, std::to_string(bad_final) + " final values outside [0,1]");
    v.require(worst_hull <= 1e-6, fmt("convex hull violation %.3g", worst_hull));
    v.note(fmt("100 parameterizations, weight sum err %.2g", worst_sum) + fmt(", hull slack %.2g", worst_hull));
  });

  run(5, "identity fallbacks", [](Verdict& v) {
    std::mt19937 rng(5);
    const Image img = test::random_image(32, 32, rng);
    TideModel<float> model(ModelConfig::toy());
    model.initialize(5);
    for (auto& p : model.params().params())
      if (p.name.rfind("refine.expert", 0) == 0 && p.name.find(".proj.") != std::string::npos) p.value.fill(0.0f);
    const auto full = restore(img, make_checkpoint(model, Phase::Refine, 0, 5));
    v.require(full.refined && full.final.bit_equal(full.initial), "zeroed experts changed the image");

    TideModel<float> base_only(ModelConfig::toy(), false);
    base_only.initialize(6);
    const auto b = restore(img, make_checkpoint(base_only, Phase::Base, 0, 6));
    v.require(!b.refined && b.final.bit_equal(b.initial), "base-only restore differs from initial");

    const Image clean = sim::procedural_image(64, 64, 3);
    const auto d = sim::degrade(clean, sim::DegradeParams::identity());
    v.require(d.degraded.tensor().bit_equal(clean.tensor()), "identity degradation changed the image");
    v.note("all three bitwise");
  });

  OverfitRun ov;
  run(6, "overfit sanity", [&](Verdict& v) {
    ov.pairs = sim::make_pairs(kPairs, kSize, sim::DegradeParams{});
    for (const auto& p : ov.pairs) {
      ov.data.inputs.push_back(p.out.degraded);
      ov.data.targets.push_back(p.clean);
      ov.data.names.push_back(std::to_string(p.seed));
    }
    ov.base_cfg = TrainConfig::base_defaults();
    ov.base_cfg.batch = 1;
    ov.base_cfg.max_steps = kBaseSteps;
    ov.base_cfg.epochs = static_cast<int>((kBaseSteps + kPairs - 1) / kPairs);
    const auto t0 = Clock::now();
    ov.base = train_base(ov.data, ov.base_cfg);
    ov.base_secs = seconds_since(t0);

    ov.refine_cfg = TrainConfig::refine_defaults();
    ov.refine_cfg.batch = 1;
    ov.refine_cfg.max_steps = kRefineSteps;
    ov.refine_cfg.epochs = static_cast<int>((kRefineSteps + kPairs - 1) / kPairs);
    const auto t1 = Clock::now();
    ov.refine = train_refine(ov.data, ov.base.checkpoint, ov.refine_cfg);
    ov.refine_secs = seconds_since(t1);
    ov.done = true;

    // Refinement parameters as initialized, before any step.
    auto untrained_cfg = ov.refine_cfg;
    untrained_cfg.epochs = 0;
    const auto untrained = train_refine(ov.data, ov.base.checkpoint, untrained_cfg).checkpoint;

    Restorer r(ov.refine.checkpoint);
    double p1 = 0, pf = 0, pin = 0;
    for (std::size_t i = 0; i < ov.data.size(); ++i) {
      const auto out = r.restore(ov.data.inputs[i]);
      p1 += psnr_of(out.initial, ov.data.targets[i]) / kPairs;
      pf += psnr_of(out.final, ov.data.targets[i]) / kPairs;
      pin += metrics::psnr(ov.data.inputs[i], ov.data.targets[i]) / kPairs;
    }
    const double eps = ov.refine_cfg.loss_weights.epsilon;
    const double imp_start = mean_improvement(untrained, ov.data, eps);
    const double imp_end = mean_improvement(ov.refine.checkpoint, ov.data, eps);
    const double secs = ov.base_secs + ov.refine_secs;

    v.require(p1 >= 24, fmt("PSNR(J1) %.2f dB < 24", p1));
    v.require(pf >= p1 - 0.1, fmt("PSNR(J) %.2f dB", pf) + fmt(" below PSNR(J1) - 0.1 = %.2f", p1 - 0.1));
    v.require(imp_end < imp_start, fmt("improvement loss %.5f", imp_end) + fmt(" not below start %.5f", imp_start));
    v.require(secs <= 900, fmt("training took %.0f s", secs));
    v.note(fmt("input %.2f dB", pin) + fmt(", J1 %.2f dB", p1) + fmt(", J %.2f dB", pf) +
           fmt(", improvement %.5f", imp_start) + fmt(" -> %.5f", imp_end) + ", " + std::to_string(kBaseSteps) + "+" +
           std::to_string(kRefineSteps) + " steps" + fmt(" in %.0f s", secs));
  });

  run(7, "freeze and determinism", [&](Verdict& v) {
    if (!ov.done) throw std::runtime_error("overfit run unavailable");
    v.require(ov.refine.checkpoint.base_digest() == ov.base.checkpoint.base_digest(), "base digest changed");
    for (const auto& t : ov.base.checkpoint.tensors) {
      const auto* u = ov.refine.checkpoint.find(t.name);
      v.require(u && u->data == t.data, "tensor " + t.name + " changed");
    }
    auto base_cfg = ov.base_cfg;
    base_cfg.max_steps = 10;
    auto refine_cfg = ov.refine_cfg;
    refine_cfg.max_steps = 10;
    std::string ck[2], logs[2];
    for (int i = 0; i < 2; ++i) {
      const auto b = train_base(ov.data, base_cfg);
      const auto r = train_refine(ov.data, b.checkpoint, refine_cfg);
      ck[i] = serialize_checkpoint(b.checkpoint) + serialize_checkpoint(r.checkpoint);
      logs[i] = b.log.csv() + r.log.csv();
    }
    v.require(ck[0] == ck[1], "checkpoints differ between runs");
    v.require(logs[0] == logs[1], "logs differ between runs");
    v.note("base digest " + ov.base.checkpoint.base_digest() + " unchanged; repeat runs byte-identical");
  });

  run(8, "refinement parameter overhead", [](Verdict& v) {
    const auto c = count_parameters(ModelConfig::full());
    v.require(c.ratio() >= 0.005 && c.ratio() <= 0.05, fmt("ratio %.5f outside [0.005, 0.05]", c.ratio()));
    v.note("base " + std::to_string(c.base) + ", refine " + std::to_string(c.refine) + fmt(", ratio %.4f", c.ratio()) +
           " (reference 114.5M / 1.25M, 1.1%)");
  });

  run(9, "degradation-consistency pathway", [&](Verdict& v) {
    if (!ov.done) throw std::runtime_error("overfit run unavailable");
    Restorer r(ov.base.checkpoint);
    double corr = 0;
    const std::size_t plane = kSize * kSize;
    for (std::size_t i = 0; i < ov.data.size(); ++i) {
      const auto out = r.restore(ov.data.inputs[i]);
      std::vector<double> est(plane), truth(plane);
      for (int k = 0; k < 4; ++k)
        for (std::size_t p = 0; p < plane; ++p) {
          est[p] += out.maps[k * plane + p];
          truth[p] += ov.pairs[i].out.maps[k * plane + p];
        }
      corr += pearson(est, truth) / static_cast<double>(ov.data.size());
    }
    v.require(corr > 0.5, fmt("mean correlation %.3f <= 0.5", corr));
    v.note(fmt("mean Pearson %.3f", corr));
  });

  run(10, "checkpoint round trip", [&](Verdict& v) {
    const fs::path dir = fs::temp_directory_path() / "tide_acceptance";
    fs::create_directories(dir);
    TideModel<float> model(ModelConfig::toy());
    model.initialize(10);
    const Checkpoint ck = ov.done ? ov.refine.checkpoint : make_checkpoint(model, Phase::Refine, 0, 10);
    save_checkpoint(ck, dir / "a.tide");
    save_checkpoint(load_checkpoint(dir / "a.tide"), dir / "b.tide");
    auto slurp = [](const fs::path& p) {
      std::ifstream f(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(f), {});
    };
    const std::string a = slurp(dir / "a.tide");
    v.require(!a.empty() && a == slurp(dir / "b.tide"), "save-load-save bytes differ");
    std::string bad = a;
    bad[1] = 'X';
    std::ofstream(dir / "bad.tide", std::ios::binary) << bad;
    std::string message;
    try {
      load_checkpoint(dir / "bad.tide");
      v.require(false, "corrupted magic accepted");
    } catch (const Error& e) {
      message = e.what();
      v.require(e.code() == ErrorCode::CorruptCheckpoint && message.find("magic") != std::string::npos,
                "unexpected error: " + message);
    }
    fs::remove_all(dir);
    v.note(std::to_string(a.size()) + " bytes identical; corrupted file: \"" + message + "\"");
  });

  run(11, "learning-rate schedule and clipping", [&](Verdict& v) {
    const TrainConfig c = TrainConfig::base_defaults();
    v.require(lr_schedule(0, 8, c) == 1e-4, "lr(0) != 1e-4");
    double worst = 0;
    for (long spe : {1L, 8L, 13L})
      for (int cycle = 1; cycle <= 6; ++cycle)
        worst = std::max(worst, std::abs(lr_schedule(cycle * 50 * spe, spe, c) - 1e-4));
    v.require(worst <= 1e-12, fmt("restart lr off by %.3g", worst));
    double max_norm = 0;
    std::size_t rows = 0;
    if (ov.done)
      for (const auto* log : {&ov.base.log, &ov.refine.log})
        for (double n : log->column("grad_norm")) max_norm = std::max(max_norm, n), ++rows;
    v.require(rows > 0, "no training log to inspect");
    v.require(max_norm <= 1.0 + 1e-6, fmt("grad norm %.9f exceeds clip", max_norm));
    v.note(fmt("restart err %.2g", worst) + fmt(", max grad norm %.6f over ", max_norm) + std::to_string(rows) +
           " steps");
  });

  run(12, "baseline contracts", [](Verdict& v) {
    std::mt19937 rng(12);
    double wb_err = 0;
    for (int t = 0; t < 10; ++t) {
      Image img = test::random_image(32, 32, rng);
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) img.at(0, y, x) *= 0.4f, img.at(2, y, x) = 0.3f + 0.7f * img.at(2, y, x);
      const Image out = baselines::white_balance(img);
      double m[3] = {0, 0, 0};
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x) m[c] += out.at(c, y, x) / (32.0 * 32.0);
      wb_err = std::max({wb_err, std::abs(m[0] - m[1]), std::abs(m[1] - m[2]), std::abs(m[0] - m[2])});
    }
    const Image g = baselines::gamma_correct(Image(8, 8, 0.5f), 1.5);
    double g_err = 0;
    for (std::size_t i = 0; i < g.tensor().size(); ++i) g_err = std::max(g_err, std::abs(g.tensor()[i] - 0.62996));
    int mismatches = 0;
    for (int t = 0; t < 10; ++t) {
      const Image img = test::random_image(16, 16, rng);
      const auto dark = baselines::dark_channel(img, 15);
      const auto ref = oracle::dark_channel(img, 15);
      for (std::size_t i = 0; i < ref.size(); ++i) mismatches += static_cast<double>(dark[i]) != ref[i];
    }
    v.require(wb_err < 1e-3, fmt("white balance channel mean spread %.3g", wb_err));
    v.require(g_err <= 1e-5, fmt("gamma error %.3g", g_err));
    v.require(mismatches == 0, std::to_string(mismatches) + " dark channel mismatches");
    v.note(fmt("wb spread %.2g", wb_err) + fmt(", gamma err %.2g", g_err) + ", dark channel exact");
  });

  std::printf("%d of 12 criteria failed, total %.0f s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
