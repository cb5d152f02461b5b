// tmsf: command line front end. Every flag given becomes a job parameter;
// run_job rejects parameters that the chosen command does not take.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "tmsf/cli.hpp"

namespace {

struct IntFlag {
  const char* flag;
  const char* key;
  const char* help;
  std::size_t value = 0;
};

}  // namespace

int main(int argc, char** argv) {
  using tmsf::cli::Json;
  CLI::App app{"Thermodynamic formalism on topological Markov shifts"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string shift_file, potential_file, output, format = "json", job_file;
  app.add_option("--shift", shift_file, "Shift specification (JSON)");
  app.add_option("--potential", potential_file, "Potential specification (JSON)");
  app.add_option("--output", output, "Write the report here instead of stdout");
  app.add_option("--format", format, "json or table")->check(CLI::IsMember({"json", "table"}));

  std::vector<IntFlag> ints{{"--n-max", "n_max", "Largest n for partition sums / beta windows"},
                            {"--depth", "depth", "Sinai truncation depth"},
                            {"--verify-period", "verify_period", "Largest period checked after reduce (0 skips)"},
                            {"--k-max", "k_max", "Largest gap k"},
                            {"--max-len", "max_len", "Cylinder length for quasi-independence"},
                            {"--cap", "cap", "Enumeration budget"},
                            {"--horizon", "horizon", "Return-time or variation horizon"},
                            {"--max-iter", "max_iter", "Power-iteration budget"}};
  for (auto& f : ints) app.add_option(f.flag, f.value, f.help);
  double tol = 0.0;
  std::string method, state, s_star, measure_file, schedule_file;
  bool pressure_check = false;
  app.add_option("--tol", tol, "Eigen-solver tolerance");
  app.add_option("--method", method, "sinai or coelho-quas");
  app.add_option("--state", state, "Anchor / induced state");
  app.add_option("--s-star", s_star, "Comma-separated state names");
  app.add_option("--measure-file", measure_file, "Measure specification (JSON)");
  app.add_option("--schedule-file", schedule_file, "Nested truncations (JSON)");
  app.add_flag("--pressure-check", pressure_check, "Compare pressures before and after reduction");

  for (const auto& c : tmsf::cli::commands()) app.add_subcommand(c, "Run " + c);
  auto* run = app.add_subcommand("run", "Run a job file");
  run->add_option("--job", job_file, "Job specification (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tmsf::cli::parse_failed;
  }

  tmsf::cli::JobSpec job;
  if (run->parsed()) {
    try {
      job = tmsf::cli::parse_job(tmsf::io::read_file(job_file));
      tmsf::cli::resolve_paths(job, std::filesystem::path(job_file).parent_path());
    } catch (const tmsf::Error& e) {
      std::cout << tmsf::cli::error_json(e.kind(), e.what()).dump(2) << '\n';
      std::cerr << "tmsf: " << e.what() << '\n';
      return tmsf::cli::exit_code_for(e.kind());
    }
  } else {
    job.command = app.get_subcommands().front()->get_name();
    if (shift_file.empty()) {
      std::cerr << "tmsf: --shift is required\n";
      return tmsf::cli::parse_failed;
    }
    job.shift_file = shift_file;
    if (!potential_file.empty()) job.potential_file = potential_file;
    if (!output.empty()) job.output = output;
    job.format = format;
    for (const auto& f : ints)
      if (app.count(f.flag)) job.params[f.key] = f.value;
    if (app.count("--tol")) job.params["tol"] = tol;
    if (app.count("--method")) job.params["method"] = method;
    if (app.count("--state")) job.params["state"] = state;
    if (app.count("--measure-file")) job.params["measure_file"] = measure_file;
    if (app.count("--schedule-file")) job.params["schedule_file"] = schedule_file;
    if (pressure_check) job.params["pressure_check"] = true;
    if (app.count("--s-star")) {
      Json names = Json::array();
      std::size_t start = 0;
      while (start <= s_star.size()) {
        const std::size_t comma = s_star.find(',', start);
        const std::string name = s_star.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!name.empty()) names.push_back(name);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      job.params["s_star"] = names;
    }
  }
  return tmsf::cli::run_job(job, std::cout, std::cerr);
}
