// dcftp: certify | dominator | sample | validate

#include "dcftp/commands.hpp"
#include "dcftp/config.hpp"
#include "dcftp/error.hpp"

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Dominated coupling-from-the-past perfect sampler"};
  app.require_subcommand(1, 1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "master seed (overrides run.seed)");
  app.add_option("--out", out, "primary output path of the subcommand");

  for (const char* name : {"certify", "dominator", "sample", "validate"}) app.add_subcommand(name);
  app.get_subcommand("certify")->description("certify drift and write the certificate");
  app.get_subcommand("dominator")->description("simulate the dominating path backwards; trace CSV + report");
  app.get_subcommand("sample")->description("draw perfect samples; samples CSV");
  app.get_subcommand("validate")->description("chi-square of a samples CSV against the exact stationary law");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dcftp::kExitIo;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  dcftp::RunConfig cfg;
  try {
    cfg = dcftp::load_config(config_path);
    if (seed) cfg.run.seed = *seed;
    if (out) dcftp::apply_out_override(cfg, command, *out);
  } catch (const dcftp::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dcftp::kExitIo;
  }
  return dcftp::run_command(command, cfg, std::cout, std::cerr);
}
