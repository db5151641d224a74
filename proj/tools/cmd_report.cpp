#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"

namespace porogen::cli {

namespace {

std::string cell(double v) {
  double const a = std::abs(v);
  if (a != 0.0 && (a < 1e-2 || a >= 1e5)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
  }
  return format_double(v, a >= 10.0 ? 1 : 3);
}

}  // namespace

void cmd_report(GlobalOptions const& g) {
  auto cfg = ConfigReader::from_file(g.config);
  auto const fit = cfg.path_optional("fit");
  auto const validate = cfg.path_optional("validate");
  auto const diffuse = cfg.path_optional("diffuse");
  std::string const title = cfg.get<std::string>("title", "porogen run");
  cfg.finish();
  if (!fit && !validate && !diffuse) throw ConfigError("config needs at least one of 'fit', 'validate', 'diffuse'");

  json report;
  std::ostringstream md;
  md << "# " << title << "\n";

  if (fit) {
    auto const s = read_json(*fit / "summary.json");
    report["fit"] = s;
    md << "\n## Posterior\n\n| parameter | mean (sd) |\n|---|---|\n";
    for (auto const& name : {"theta_s", "kappa2_s", "theta_z", "kappa2_z", "tau2", "u"}) {
      auto const& p = s.at("params").at(name);
      double const m = p.at("mean").get<double>(), sd = p.at("sd").get<double>();
      md << "| " << name << " | " << cell(m) << " (" << cell(sd) << ") |\n";
    }
    md << "\nAcceptance: u " << format_double(s.at("acceptance_rate_u").get<double>(), 3) << ", gamma "
       << format_double(s.at("acceptance_rate_gamma").get<double>(), 3) << "\n";
  }

  if (validate) {
    auto const v = read_json(*validate / "validate.json");
    report["validate"] = v;
    md << "\n## Validation (" << v.at("n_sims").get<std::size_t>() << " simulations, alpha "
       << format_double(v.at("alpha").get<double>(), 3) << ")\n\n| measure | data | model |\n|---|---|---|\n";
    for (auto const& [name, row] : v.at("table").items()) {
      md << "| " << name << " | " << row.at("data").get<std::string>() << " | " << row.at("model").get<std::string>()
         << " |\n";
    }
    md << "\n| envelope test | result |\n|---|---|\n";
    for (auto const& t : v.at("tests")) {
      md << "| " << t.at("name").get<std::string>() << " | " << (t.at("pass").get<bool>() ? "pass" : "fail") << " |\n";
    }
  }

  if (diffuse) {
    auto const d = read_json(*diffuse / "diffuse.json");
    report["diffuse"] = d;
    auto const& h = d.at("header");
    md << "\n## Diffusion (u_J " << format_double(h.at("u_J").get<double>(), 2) << ", alpha "
       << format_double(h.at("alpha").get<double>(), 2) << ")\n\n";
    if (d.contains("data")) md << "D_eff data: " << format_double(d["data"].at("d_eff").get<double>(), 4) << "\n";
    if (d.contains("ensemble")) md << "D_eff model: " << d["ensemble"].at("d_eff").get<std::string>() << "\n";
    if (d.contains("containment")) {
      md << "Excursion containment: " << (d["containment"].at("pass").get<bool>() ? "pass" : "fail") << "\n";
    }
  }

  std::filesystem::create_directories(g.out);
  write_json(g.out / "report.json", report);
  std::ofstream os(g.out / "report.md");
  if (!os) throw IoError("cannot write report.md");
  os << md.str();
}

}  // namespace porogen::cli
