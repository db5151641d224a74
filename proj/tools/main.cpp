#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace porogen;
using namespace porogen::cli;

int main(int argc, char** argv) {
  CLI::App app{"porogen: latent Gaussian models of porous microstructures"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Run seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for ensembles")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--config", g.config, "JSON run configuration")->required();
  app.add_option("--out", g.out, "Output directory")->required();

  struct Sub {
    char const* name;
    char const* help;
    void (*run)(GlobalOptions const&);
  };
  Sub const subs[] = {{"ingest", "Binarize a gray-value stack", cmd_ingest},
                      {"simulate", "Simulate structures from fixed parameters", cmd_simulate},
                      {"fit", "Run the MCMC fit", cmd_fit},
                      {"validate", "Compare data with posterior simulations", cmd_validate},
                      {"diffuse", "Diffusion fluxes and excursion sets", cmd_diffuse},
                      {"report", "Collect run outputs into one report", cmd_report}};
  void (*selected)(GlobalOptions const&) = nullptr;
  for (auto const& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    if (std::string(s.name) == "fit") sub->add_flag("--resume", g.resume, "Continue from <out>/trace/checkpoint.bin");
    sub->callback([&selected, run = s.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    int const code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    selected(g);
    return 0;
  } catch (ValidationFailure const& e) {
    std::cerr << "porogen: " << e.what() << '\n';
    return 4;
  } catch (NumericalError const& e) {
    std::cerr << "porogen: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (Error const& e) {
    std::cerr << "porogen: " << e.what() << '\n';
    return 2;
  } catch (std::exception const& e) {
    std::cerr << "porogen: " << e.what() << '\n';
    return 1;
  }
}
