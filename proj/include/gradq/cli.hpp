#pragma once

// Command implementations behind the gradq executable. Each returns a
// process exit code: 0 success, 1 usage/config error, 2 data/format error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradq/codec.hpp"
#include "gradq/config.hpp"
#include "gradq/csv.hpp"
#include "gradq/error.hpp"
#include "gradq/flsim.hpp"
#include "gradq/gennorm.hpp"
#include "gradq/io.hpp"
#include "gradq/quantizer.hpp"

namespace gradq::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr std::size_t kHistogramBins = 128;

/// Runs `body`, mapping exceptions onto the exit-code contract.
inline int guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("cannot write " + path.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string());
}

// ---------------------------------------------------------------------------
// fit

struct FitCommand {
  std::string input;
  std::string out_dir = ".";
};

struct HistogramRow {
  double center;
  std::uint64_t count;
  double gennorm_pdf;
  double normal_pdf;
  double laplace_pdf;
};

struct FitOutputs {
  FitReport gennorm;
  GenNormParams normal;   // beta = 2
  GenNormParams laplace;  // beta = 1
  std::vector<HistogramRow> histogram;
};

/// GenNorm moment fit plus maximum-likelihood normal and Laplace fits, and a
/// fixed-bin histogram over the observed range.
inline FitOutputs fit_tensor(const std::vector<float>& values) {
  if (values.empty()) throw FormatError("empty tensor");
  std::vector<double> x(values.begin(), values.end());
  FitOutputs out;
  out.gennorm = gennorm::fit(x);

  const double mean = out.gennorm.sample_mean;
  out.normal = {mean, std::sqrt(2.0 * out.gennorm.sample_variance), 2.0};

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double mad = 0.0;
  for (double v : x) mad += std::fabs(v - median);
  mad /= static_cast<double>(n);
  out.laplace = {median, mad > 0.0 ? mad : 1e-300, 1.0};

  const double lo = sorted.front();
  const double hi = sorted.back();
  const double width = (hi - lo) / static_cast<double>(kHistogramBins);
  std::vector<std::uint64_t> counts(kHistogramBins, 0);
  for (double v : x) {
    auto bin = static_cast<std::size_t>((v - lo) / width);
    counts[std::min(bin, kHistogramBins - 1)]++;
  }
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    const double c = lo + (static_cast<double>(b) + 0.5) * width;
    out.histogram.push_back({c, counts[b], gennorm::pdf(out.gennorm.params, c), gennorm::pdf(out.normal, c),
                             gennorm::pdf(out.laplace, c)});
  }
  return out;
}

inline double log_likelihood(const GenNormParams& p, const std::vector<float>& values) {
  double total = 0.0;
  for (float v : values) total += gennorm::log_pdf(p, v);
  return total;
}

inline int cmd_fit(const FitCommand& cmd, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto values = io::read_tensor(cmd.input);
    FitOutputs fit;
    try {
      fit = fit_tensor(values);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what());  // data problem, not usage
    }
    const std::filesystem::path dir(cmd.out_dir);
    ensure_dir(dir);

    std::string hist = "bin_center,count,gennorm_pdf,normal_pdf,laplace_pdf\n";
    for (const auto& r : fit.histogram) {
      hist += csv::num(r.center, 9) + "," + csv::num(r.count) + "," + csv::num(r.gennorm_pdf, 9) + "," +
              csv::num(r.normal_pdf, 9) + "," + csv::num(r.laplace_pdf, 9) + "\n";
    }
    write_text(dir / "histogram.csv", hist);

    const auto& g = fit.gennorm;
    auto row = [&](const char* model, const GenNormParams& p, bool converged, int iterations) {
      return std::string(model) + "," + csv::num(p.mu) + "," + csv::num(p.alpha) + "," + csv::num(p.beta) +
             "," + csv::num(gennorm::variance(p)) + "," + csv::num(log_likelihood(p, values)) + "," +
             (converged ? "1" : "0") + "," + std::to_string(iterations) + "\n";
    };
    std::string params = "model,mu,alpha,beta,variance,log_likelihood,converged,bisection_iterations\n";
    params += row("gennorm", g.params, g.converged, g.bisection_iterations);
    params += row("normal", fit.normal, true, 0);
    params += row("laplace", fit.laplace, true, 0);
    write_text(dir / "fit.csv", params);
    out << "beta " << csv::num(g.params.beta) << "\n";
  });
}

// ---------------------------------------------------------------------------
// sweep-beta

struct SweepCommand {
  std::vector<int> rates{2, 3};
  std::vector<double> Ms{2.0, 4.0};
  std::vector<double> betas;  // empty: 0.50, 0.55, ..., 1.00
  std::string out;            // empty: standard output
};

inline std::vector<double> default_beta_grid() {
  std::vector<double> b;
  for (int i = 0; i <= 10; ++i) b.push_back(0.5 + 0.05 * i);
  return b;
}

/// Codebook CSV: beta,M,R,centroid_0..centroid_{L-1}; rows with fewer
/// levels than the widest rate leave the trailing cells empty.
inline std::string sweep_csv(const SweepCommand& cmd) {
  const auto betas = cmd.betas.empty() ? default_beta_grid() : cmd.betas;
  for (double b : betas) {
    if (!(b > 0.0)) throw InvalidArgument("beta must be positive");
  }
  if (cmd.rates.empty() || cmd.Ms.empty()) throw InvalidArgument("need at least one rate and one M");
  const int max_rate = *std::max_element(cmd.rates.begin(), cmd.rates.end());
  if (max_rate > quantizer::kMaxRate) throw InvalidArgument("rate must be in [1, 8]");
  const std::size_t width = std::size_t{1} << std::max(max_rate, 1);

  std::string text = "beta,M,R";
  for (std::size_t i = 0; i < width; ++i) text += ",centroid_" + std::to_string(i);
  text += "\n";
  for (int rate : cmd.rates) {
    for (double M : cmd.Ms) {
      for (const auto& row : quantizer::sweep_beta(betas, rate, DistortionSpec{M})) {
        text += csv::num(row.beta, 9) + "," + csv::num(M, 9) + "," + std::to_string(rate);
        for (std::size_t i = 0; i < width; ++i) {
          text += ",";
          if (i < row.codebook.centroids.size()) text += csv::num(row.codebook.centroids[i], 9);
        }
        text += "\n";
      }
    }
  }
  return text;
}

inline int cmd_sweep_beta(const SweepCommand& cmd, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto text = sweep_csv(cmd);
    if (cmd.out.empty()) {
      out << text;
    } else {
      write_text(cmd.out, text);
    }
  });
}

// ---------------------------------------------------------------------------
// compress / decompress

struct CompressCommand {
  std::string input;
  std::string out;
  std::string codec = "mwl2";  // identity | mwl2 | mwl2-fixed | uniform | fp16 | fp8
  double rate = 2.0;           // budget, bits per dimension
  int bits = 2;                // bits per kept entry for mwl2 / uniform
  double M = 2.0;
  double beta = 2.0;  // frozen shape for mwl2-fixed
  std::string mode = "payload_plus_index";
  std::optional<std::uint64_t> d;
  std::uint32_t layer_id = 0;
};

inline CompressorKind command_kind(const CompressCommand& cmd) {
  if (cmd.codec == "identity") return CompressorKind::identity();
  if (cmd.codec == "mwl2") return CompressorKind::mwl2_adaptive(cmd.M, cmd.bits);
  if (cmd.codec == "mwl2-fixed") {
    std::vector<GenNormParams> frozen(cmd.layer_id + 1, gennorm::standardized(cmd.beta));
    return CompressorKind::mwl2_fixed(cmd.M, cmd.bits, std::move(frozen));
  }
  if (cmd.codec == "uniform") return CompressorKind::uniform(cmd.bits);
  if (cmd.codec == "fp16") return CompressorKind::float_trunc(16);
  if (cmd.codec == "fp8") return CompressorKind::float_trunc(8);
  throw InvalidArgument("unknown codec " + cmd.codec);
}

inline int cmd_compress(const CompressCommand& cmd, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto kind = command_kind(cmd);
    const auto mode = parse_accounting_mode(cmd.mode);
    const auto values = io::read_tensor(cmd.input);
    if (cmd.d && *cmd.d != values.size()) {
      throw InvalidArgument("--d " + std::to_string(*cmd.d) + " does not match tensor length " +
                            std::to_string(values.size()));
    }
    if (values.empty()) throw FormatError("empty tensor");
    const auto budget = RateBudget::per_dimension(values.size(), cmd.rate, kind.per_entry_bits(), mode);
    const auto blob = compress(values, kind, budget, {cmd.layer_id, std::nullopt});
    const auto bytes = blob.to_bytes();
    io::write_file(cmd.out, bytes);
    out << "bits " << blob.bit_length() << "\n";
    out << "K " << blob.header.K << "\n";
  });
}

struct DecompressCommand {
  std::string input;
  std::string out;
};

inline int cmd_decompress(const DecompressCommand& cmd, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto bytes = io::read_file(cmd.input);
    const auto values = decompress(CompressedBlob::from_bytes(bytes));
    io::write_tensor(cmd.out, values);
    out << "d " << values.size() << "\n";
  });
}

// ---------------------------------------------------------------------------
// simulate

/// Long-format metrics: one row per layer per round, then a round summary
/// row with layer_id "all" and empty fit columns.
inline std::string metrics_csv(const Metrics& m) {
  std::string text = "round,train_loss,test_accuracy,uplink_bits,layer_id,mu,var,beta\n";
  for (const auto& r : m.rounds) {
    const std::string head = std::to_string(r.round) + "," + csv::num(r.train_loss) + "," +
                             csv::num(r.test_accuracy) + ",";
    for (std::size_t l = 0; l < r.fits.size(); ++l) {
      const auto& f = r.fits[l];
      text += head + csv::num(r.layer_bits[l]) + "," + std::to_string(l) + "," + csv::num(f.params.mu) + "," +
              csv::num(f.variance) + "," + csv::num(f.params.beta) + "\n";
    }
    text += head + csv::num(r.uplink_bits) + ",all,,,\n";
  }
  return text;
}

/// round x arm matrix of test accuracy.
inline std::string comparison_csv(const std::vector<std::string>& arms, const std::vector<Metrics>& runs) {
  std::string text = "round";
  for (const auto& a : arms) text += "," + a;
  text += "\n";
  const std::size_t rounds = runs.empty() ? 0 : runs.front().rounds.size();
  for (std::size_t t = 0; t < rounds; ++t) {
    text += std::to_string(t);
    for (const auto& m : runs) text += "," + csv::num(m.rounds[t].test_accuracy);
    text += "\n";
  }
  return text;
}

struct SimulateCommand {
  std::string config;
  std::string out_dir;  // overrides the config's out_dir when set
};

inline int cmd_simulate(const SimulateCommand& cmd, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    std::ifstream in(cmd.config);
    if (!in) throw InvalidArgument("cannot open config " + cmd.config);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto cfg = config::parse(buf.str());
    const std::filesystem::path dir(cmd.out_dir.empty() ? cfg.out_dir : cmd.out_dir);
    ensure_dir(dir);

    std::vector<Metrics> runs;
    for (const auto& arm : cfg.arms) {
      runs.push_back(flsim::run(config::training_config(cfg, arm)));
      write_text(dir / ("metrics_" + arm + ".csv"), metrics_csv(runs.back()));
      out << arm << ": final test accuracy " << csv::num(runs.back().rounds.back().test_accuracy, 4) << "\n";
    }
    write_text(dir / "comparison.csv", comparison_csv(cfg.arms, runs));
    write_text(dir / "config.canonical", config::canonical(cfg));
  });
}

}  // namespace gradq::cli
