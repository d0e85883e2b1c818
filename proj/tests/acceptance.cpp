// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradq/codec.hpp"
#include "gradq/config.hpp"
#include "gradq/flsim.hpp"
#include "gradq/quantizer.hpp"
#include "oracles.hpp"

using namespace gradq;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << why << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto t0 = Clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << " [exception: " << e.what() << "]";
  }
  std::printf("%s C%d %s (%.1fs)%s\n", out.pass ? "PASS" : "FAIL", id, title.c_str(), seconds_since(t0),
              out.detail.str().c_str());
  std::fflush(stdout);
  failures += out.pass ? 0 : 1;
}

bool non_increasing(const LloydReport& r) {
  for (std::size_t i = 1; i < r.distortion_trace.size(); ++i) {
    if (r.distortion_trace[i] > r.distortion_trace[i - 1] + 1e-12) return false;
  }
  return true;
}

// Lloyd traces from criteria 1 and 2; criterion 3 adds the sweep panels.
std::vector<std::pair<std::string, LloydReport>> traces;

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::string fmt(double x, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

// The four sweep panels over beta = 0.5, 0.6, ..., 1.0 (standardized sources).
struct Panel {
  int rate;
  double M;
  std::vector<quantizer::SweepRow> rows;
};

const std::vector<Panel>& sweep_panels() {
  static const std::vector<Panel> panels = [] {
    std::vector<double> betas;
    for (int i = 0; i <= 5; ++i) betas.push_back(0.5 + 0.1 * i);
    std::vector<Panel> out;
    for (int rate : {2, 3}) {
      for (double M : {2.0, 4.0}) out.push_back({rate, M, quantizer::sweep_beta(betas, rate, {M})});
    }
    return out;
  }();
  return panels;
}

// Final test accuracy for each arm and seed on the synthetic task.
struct TrainingRuns {
  std::vector<std::string> arms{"mwl2", "uniform", "fp16", "fp8", "mwl2-fixed"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::vector<double>> final_accuracy;  // [arm][seed]
  double seconds = 0.0;
};

const TrainingRuns& training_runs() {
  static const TrainingRuns runs = [] {
    TrainingRuns r;
    const auto t0 = Clock::now();
    for (const auto& arm : r.arms) {
      std::vector<double> acc;
      for (auto seed : r.seeds) {
        ExperimentConfig cfg;
        cfg.seed = seed;
        acc.push_back(flsim::run(config::training_config(cfg, arm)).rounds.back().test_accuracy);
      }
      r.final_accuracy.push_back(acc);
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return runs;
}

}  // namespace

int main() {
  criterion(1, "analytic two-level fixed points", [](Outcome& o) {
    const double base = std::sqrt(2.0 / std::numbers::pi);
    for (double M : {0.0, 2.0}) {
      const auto t0 = Clock::now();
      auto [cb, rep] = quantizer::design(gennorm::standardized(2.0), 1, {M});
      const double secs = seconds_since(t0);
      traces.push_back({"C1 M=" + fmt(M), rep});
      const double want = M == 0.0 ? base : 2.0 * base;
      o.detail << " M=" << M << ": " << fmt(cb.centroids[0], 7) << "," << fmt(cb.centroids[1], 7);
      o.require(std::fabs(cb.centroids[1] - want) <= 1e-3 && std::fabs(cb.centroids[0] + want) <= 1e-3,
                "centroid off for M=" + fmt(M));
      o.require(secs < 1.0, "design slower than 1 s");
    }
  });

  criterion(2, "Lloyd matches exhaustive symmetric grid search", [](Outcome& o) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int rate : {1, 2}) {
      for (double M : {0.0, 2.0}) {
        for (double beta : {1.0, 2.0}) {
          const auto p = gennorm::standardized(beta);
          auto [cb, rep] = quantizer::design(p, rate, {M});
          traces.push_back({"C2 R=" + fmt(rate) + " M=" + fmt(M) + " beta=" + fmt(beta), rep});
          const double lloyd = distortion::expected_distortion(p, cb, {M});
          const auto grid = oracle::symmetric_grid_search({p.alpha, beta}, M, rate);
          const double rel = std::fabs(lloyd - grid.distortion) / grid.distortion;
          worst = std::max(worst, rel);
          o.require(rel <= 1e-4, "R=" + fmt(rate) + " M=" + fmt(M) + " beta=" + fmt(beta) + " rel " + fmt(rel));
          o.require(grid.positive_centroids.back() < 4.0 - 1e-9, "grid optimum on the boundary");
        }
      }
    }
    o.detail << " worst relative gap " << fmt(worst, 3);
    o.require(seconds_since(t0) < 60.0, "slower than 1 min");
  });

  criterion(3, "Lloyd distortion traces are non-increasing", [](Outcome& o) {
    for (const auto& panel : sweep_panels()) {
      for (const auto& row : panel.rows) {
        traces.push_back({"sweep R=" + fmt(panel.rate) + " M=" + fmt(panel.M) + " beta=" + fmt(row.beta),
                          row.report});
      }
    }
    double worst = 0.0;
    for (const auto& [name, rep] : traces) {
      for (std::size_t i = 1; i < rep.distortion_trace.size(); ++i) {
        worst = std::max(worst, rep.distortion_trace[i] - rep.distortion_trace[i - 1]);
      }
      o.require(non_increasing(rep), name);
    }
    o.detail << " " << traces.size() << " traces, largest step " << fmt(worst, 3);
    o.require(traces.size() == 2 + 8 + 24, "missing traces");
  });

  criterion(4, "centroid trends over beta", [](Outcome& o) {
    for (int rate : {2, 3}) {
      std::vector<double> outer2, outer4, betas;
      for (const auto& panel : sweep_panels()) {
        if (panel.rate != rate) continue;
        for (const auto& row : panel.rows) {
          (panel.M == 2.0 ? outer2 : outer4).push_back(row.codebook.centroids.back());
          if (panel.M == 2.0) betas.push_back(row.beta);
        }
      }
      for (std::size_t i = 1; i < betas.size(); ++i) {
        o.require(outer2[i] <= outer2[i - 1], "R=" + fmt(rate) + " M=2 outer centroid increases");
        o.require(outer4[i] <= outer4[i - 1], "R=" + fmt(rate) + " M=4 outer centroid increases");
      }
      for (std::size_t i = 0; i < betas.size(); ++i) {
        o.require(outer4[i] >= outer2[i], "R=" + fmt(rate) + " M=4 below M=2 at beta=" + fmt(betas[i]));
      }
      o.detail << " R=" << rate << " outer(M=2) " << fmt(outer2.front(), 4) << "->" << fmt(outer2.back(), 4)
               << ", outer(M=4) " << fmt(outer4.front(), 4) << "->" << fmt(outer4.back(), 4) << ";";
    }
  });

  criterion(5, "GenNorm fit recovers the shape", [](Outcome& o) {
    double worst = 0.0;
    for (double beta : {1.0, 1.5, 2.0}) {
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto x = gennorm::sample(gennorm::standardized(beta), 100000, seed);
        const double err = std::fabs(gennorm::fit(x).params.beta - beta);
        worst = std::max(worst, err);
        o.require(err <= 0.1, "beta=" + fmt(beta) + " seed=" + fmt(seed));
      }
    }
    o.detail << " worst |beta_hat - beta| " << fmt(worst, 3);
  });

  criterion(6, "rate accounting reproduces the parameter lists", [](Outcome& o) {
    const std::uint64_t d = 10'000'000;  // large enough never to cap K
    auto k_for = [&](double total, double p) {
      return sparsify::solve_k({d, total, p, AccountingMode::kPayloadOnly});
    };
    auto cost = [&](std::uint64_t K, double p) {
      return sparsify::cost({d, 0.0, p, AccountingMode::kPayloadOnly}, K);
    };
    o.require(k_for(663456, 16) == 41466, "K_fp(16) at 664 kbit");
    o.require(k_for(663456, 8) == 82932, "K_fp(8) at 664 kbit");
    o.require(k_for(995184, 16) == 62199, "K_fp(16) at 996 kbit");
    o.require(k_for(995184, 8) == 124398, "K_fp(8) at 996 kbit");
    o.require(k_for(663450, 2) == 331725, "K_u at R=2");
    o.require(k_for(995175, 3) == 331725, "K_u at R=3");
    const std::vector<std::pair<double, double>> small{{cost(331725, 2), 663450}, {cost(41466, 16), 663456},
                                                       {cost(82932, 8), 663456}};
    const std::vector<std::pair<double, double>> large{{cost(331725, 3), 995175}, {cost(62199, 16), 995184},
                                                       {cost(124398, 8), 995184}};
    for (const auto& [got, want] : small) {
      o.require(got == want, "product " + fmt(want, 7));
      o.require(std::fabs(got - 664000) < 1000, "not within kbit rounding of 664 kbit");
    }
    for (const auto& [got, want] : large) {
      o.require(got == want, "product " + fmt(want, 7));
      o.require(std::fabs(got - 996000) < 1000, "not within kbit rounding of 996 kbit");
    }
    o.detail << " products 663450/663456/663456 and 995175/995184/995184";
  });

  criterion(7, "enumerative support coding", [](Outcome& o) {
    std::uint64_t checked = 0;
    for (std::uint64_t d = 1; d <= 16; ++d) {
      for (std::uint64_t K = 0; K <= d; ++K) {
        const auto subsets = oracle::all_subsets(d, K);
        for (std::size_t i = 0; i < subsets.size(); ++i) {
          const auto code = sparsify::rank_support(subsets[i], d, K);
          if (code.rank != i || sparsify::unrank_support(code) != subsets[i]) {
            o.require(false, "d=" + fmt(d) + " K=" + fmt(K) + " subset " + fmt(i));
            return;
          }
          ++checked;
        }
        // Serialized length of the support field inside a real blob.
        std::uint64_t want_bits = 0;
        while (BigUint(1) << want_bits < BigUint(subsets.size())) ++want_bits;
        CompressedBlob blob;
        blob.header = {CodecTag::kFloatTrunc, 8, 0, d, K, 0.0f, 1.0f, 0.0f, 0.0f};
        blob.support = {BigUint(subsets.size() - 1), d, K};
        blob.payload.assign(K, 0);
        const auto bytes = blob.to_bytes();
        const std::uint64_t bits = codec::header_bits(CodecTag::kFloatTrunc) + want_bits + 8 * K;
        o.require(sparsify::support_bits(d, K) == want_bits, "support bits d=" + fmt(d) + " K=" + fmt(K));
        o.require(bytes.size() == (bits + 7) / 8, "blob length d=" + fmt(d) + " K=" + fmt(K));
        o.require(CompressedBlob::from_bytes(bytes).support.rank == blob.support.rank, "blob rank round trip");
      }
    }
    o.detail << " " << checked << " subsets round-tripped";
  });

  criterion(8, "mw-L2 codec beats uniform at matched K", [](Outcome& o) {
    const std::size_t d = 10000;
    const double M = 2.0;
    for (double bpd : {1.0, 2.0}) {
      const auto mw_kind = CompressorKind::mwl2_adaptive(M, 2);
      const auto u_kind = CompressorKind::uniform(2);
      const auto budget = RateBudget::per_dimension(d, bpd, 2, AccountingMode::kPayloadPlusIndex);
      std::vector<double> mw_err, u_err;
      std::uint64_t K = 0;
      for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto x = gennorm::sample(gennorm::standardized(1.5), d, 1000 + seed);
        const std::vector<float> g(x.begin(), x.end());
        const auto mw = compress(g, mw_kind, budget);
        const auto un = compress(g, u_kind, budget);
        if (mw.header.K != un.header.K) o.require(false, "unmatched K");
        K = mw.header.K;
        mw_err.push_back(mw_l2(g, decompress(mw), {M}));
        u_err.push_back(mw_l2(g, decompress(un), {M}));

        // Expected distortion under the fitted (normalized) source.
        const auto src = gennorm::standardized(mw.header.desc0);
        const auto cb = codec::mwl2_codebook(mw.header.desc0, mw.header.desc1, 2);
        const auto levels = codec::uniform_levels(un.header.desc0, un.header.desc1, 2);
        const double d_mw = distortion::expected_distortion(src, *cb, {M});
        const double d_u = distortion::expected_distortion(src, levels, Codebook::midpoints(levels), {M});
        o.require(d_mw <= d_u + 1e-9, "expected distortion, seed " + fmt(seed));
      }
      o.require(mean(mw_err) <= mean(u_err), "round-trip distortion at " + fmt(bpd) + " bit/dim");
      o.detail << " " << bpd << " bit/dim K=" << K << ": mw-L2 " << fmt(mean(mw_err), 4) << " vs uniform "
               << fmt(mean(u_err), 4) << ";";
    }
  });

  criterion(9, "simulator controls", [](Outcome& o) {
    // (a) one client with the identity codec is plain minibatch SGD.
    TrainingConfig cfg;
    cfg.clients = 1;
    cfg.rounds = 10;
    cfg.compressor = CompressorKind::identity();
    const auto metrics = flsim::run(cfg);
    const auto env = flsim::make_environment(cfg);
    Mlp<float> model = env.initial;
    std::vector<std::size_t> all(env.train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    bool same = true;
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
      const auto batch = flsim::sample_batch(all, cfg.batch_size, cfg.seed, t, 0);
      const auto g = mlp::local_gradient(model, env.train, batch);
      for (std::size_t j = 0; j < model.dim(); ++j) {
        model.w[j] = static_cast<float>(static_cast<double>(model.w[j]) - cfg.eta_at(t) * g[j]);
      }
      same = same && metrics.rounds[t].train_loss == mlp::mean_loss(model, env.train) &&
             metrics.rounds[t].test_accuracy == mlp::accuracy(model, env.test);
    }
    o.require(same && metrics.final_weights == model.w, "N=1 identity run differs from centralized SGD");

    // (b) backprop against central finite differences on the full model.
    Mlp<double> m({64, 32, 10});
    m.init(1.0, 5);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (auto& w : m.w) w += noise(rng);  // non-zero biases too
    const auto data = dataset::synthetic_blobs({64, 1.0}, 64, 10, 8);
    std::vector<std::size_t> batch(32);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    const auto sub = data.subset(batch);
    const auto g = mlp::local_gradient(m, data, batch);
    std::uniform_int_distribution<std::size_t> pick(0, m.dim() - 1);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const std::size_t j = pick(rng);
      const double h = 1e-6;
      Mlp<double> up = m, down = m;
      up.w[j] += h;
      down.w[j] -= h;
      const double fd = (mlp::mean_loss(up, sub) - mlp::mean_loss(down, sub)) / (2 * h);
      const double rel = std::fabs(g[j] - fd) / std::max({std::fabs(fd), std::fabs(g[j]), 1e-6});
      worst = std::max(worst, rel);
    }
    o.require(worst <= 1e-4, "finite-difference mismatch " + fmt(worst, 3));
    o.detail << " bit-identical SGD over " << cfg.rounds << " rounds; worst FD relative error " << fmt(worst, 3);
  });

  criterion(10, "training comparison on synthetic blobs", [](Outcome& o) {
    const auto& r = training_runs();
    for (std::size_t a = 0; a < r.arms.size(); ++a) {
      o.detail << " " << r.arms[a] << "=" << fmt(mean(r.final_accuracy[a]), 4);
      for (double acc : r.final_accuracy[a]) o.require(acc > 0.10, r.arms[a] + " not above chance");
    }
    o.require(mean(r.final_accuracy[0]) >= mean(r.final_accuracy[1]) - 0.02, "mw-L2 below uniform - 0.02");
    o.require(r.seconds < 300.0, "slower than 5 min");
    o.detail << " (" << fmt(r.seconds, 3) << "s for all arms)";
  });

  criterion(11, "non-adaptive arm close to adaptive", [](Outcome& o) {
    const auto& r = training_runs();
    const double adaptive = mean(r.final_accuracy[0]);
    const double frozen = mean(r.final_accuracy[4]);
    o.detail << " adaptive " << fmt(adaptive, 4) << ", non-adaptive " << fmt(frozen, 4);
    o.require(std::fabs(adaptive - frozen) <= 0.05, "gap above 0.05");
  });

  criterion(12, "per-layer fits emitted every round", [](Outcome& o) {
    ExperimentConfig cfg;
    const auto metrics = flsim::run(config::training_config(cfg, "mwl2"));
    o.require(metrics.rounds.size() == 10, "expected 10 rounds");
    o.require(!metrics.any_fallback, "fit fallback occurred");
    const std::size_t layers = metrics.rounds.front().fits.size();
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<double> betas;
      for (const auto& row : metrics.rounds) {
        const auto& f = row.fits.at(l);
        o.require(std::isfinite(f.params.mu) && std::isfinite(f.variance) && std::isfinite(f.params.beta),
                  "non-finite fit");
        betas.push_back(f.params.beta);
      }
      const double m = mean(betas);
      double sq = 0.0;
      for (double b : betas) sq += (b - m) * (b - m);
      const double sd = std::sqrt(sq / betas.size());
      o.require(std::isfinite(sd), "non-finite beta std");
      o.detail << " layer " << l << " beta " << fmt(m, 3) << "+-" << fmt(sd, 3) << ";";
    }
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
