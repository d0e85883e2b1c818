#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradq/cli.hpp"

int main(int argc, char** argv) {
  using namespace gradq;
  CLI::App app{"gradq: magnitude-weighted quantization for gradient compression"};
  app.require_subcommand(1);

  cli::FitCommand fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit GenNorm/normal/Laplace to a gradient tensor");
  fit_cmd->add_option("input", fit.input, "GRDC tensor file")->required();
  fit_cmd->add_option("--out", fit.out_dir, "Output directory for histogram.csv and fit.csv");

  cli::SweepCommand sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-beta", "Design codebooks over a grid of shapes");
  sweep_cmd->add_option("--rate", sweep.rates, "Rates R (bits per entry)")->delimiter(',');
  sweep_cmd->add_option("--M", sweep.Ms, "Magnitude exponents M")->delimiter(',');
  sweep_cmd->add_option("--beta", sweep.betas, "Shapes (default 0.50:0.05:1.00)")->delimiter(',');
  sweep_cmd->add_option("--out", sweep.out, "Output CSV (default stdout)");

  cli::CompressCommand comp;
  std::uint64_t d_flag = 0;
  auto* comp_cmd = app.add_subcommand("compress", "Compress a gradient tensor into a blob");
  comp_cmd->add_option("input", comp.input, "GRDC tensor file")->required();
  comp_cmd->add_option("--out", comp.out, "Blob file")->required();
  comp_cmd->add_option("--codec", comp.codec, "identity|mwl2|mwl2-fixed|uniform|fp16|fp8");
  comp_cmd->add_option("--rate", comp.rate, "Budget in bits per dimension");
  comp_cmd->add_option("--bits", comp.bits, "Bits per kept entry (mwl2, uniform)");
  comp_cmd->add_option("--M", comp.M, "Magnitude exponent");
  comp_cmd->add_option("--beta", comp.beta, "Frozen shape for mwl2-fixed");
  comp_cmd->add_option("--mode", comp.mode, "payload_plus_index|payload_only");
  auto* d_opt = comp_cmd->add_option("--d", d_flag, "Expected tensor length");
  comp_cmd->add_option("--layer", comp.layer_id, "Layer id stored in the header");

  cli::DecompressCommand decomp;
  auto* decomp_cmd = app.add_subcommand("decompress", "Decode a blob into a dense tensor");
  decomp_cmd->add_option("input", decomp.input, "Blob file")->required();
  decomp_cmd->add_option("--out", decomp.out, "GRDC tensor file")->required();

  cli::SimulateCommand sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run federated training for each configured arm");
  sim_cmd->add_option("--config", sim.config, "Experiment config file")->required();
  sim_cmd->add_option("--out", sim.out_dir, "Output directory (overrides out_dir)");

  auto* version_cmd = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitUsage;
  }

  if (*fit_cmd) return cli::cmd_fit(fit);
  if (*sweep_cmd) return cli::cmd_sweep_beta(sweep);
  if (*comp_cmd) {
    if (*d_opt) comp.d = d_flag;
    return cli::cmd_compress(comp);
  }
  if (*decomp_cmd) return cli::cmd_decompress(decomp);
  if (*sim_cmd) return cli::cmd_simulate(sim);
  if (*version_cmd) {
    std::cout << "gradq " << cli::kVersion << "\n";
    return cli::kExitOk;
  }
  return cli::kExitUsage;
}
