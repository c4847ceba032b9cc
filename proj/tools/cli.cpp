#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "app.hpp"
#include "config.hpp"
#include "diffstruct/error.hpp"
#include "diffstruct/io.hpp"

namespace diffstruct::app {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ConfigEntry> parse_config(const std::string& text) {
  std::vector<ConfigEntry> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::usage, "config line " + std::to_string(no) + ": expected key = value");
    }
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    if (e.key.empty()) throw Error(Errc::usage, "config line " + std::to_string(no) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::vector<ConfigEntry>& entries, const CLI::App& app) {
  // Locate the subcommand token; config options go in front of everything the
  // user typed for the same command, so explicit flags are parsed last and win.
  std::size_t sub_pos = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size(); ++i) {
    for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; })) {
      if (s->get_name() == args[i]) {
        sub_pos = i;
        sub = s;
        break;
      }
    }
    if (sub) break;
  }

  std::vector<std::string> global, local;
  for (const auto& e : entries) {
    const std::string flag = "--" + e.key;
    if (e.key == "config") throw Error(Errc::usage, "config files cannot include other config files");
    if (const auto* opt = app.get_option_no_throw(flag)) {
      (void)opt;
      global.push_back(flag + "=" + e.value);
    } else if (sub && sub->get_option_no_throw(flag)) {
      local.push_back(flag + "=" + e.value);
    } else {
      throw Error(Errc::usage, "config key '" + e.key + "' is not an option of " +
                                   (sub ? sub->get_name() : std::string("diffstruct")));
    }
  }

  std::vector<std::string> out{args.front()};
  out.insert(out.end(), global.begin(), global.end());
  for (std::size_t i = 1; i < args.size(); ++i) {
    out.push_back(args[i]);
    if (i == sub_pos) out.insert(out.end(), local.begin(), local.end());
  }
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Discover and decode differential relations from sampled data."};
  app.name("diffstruct");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  std::string out_dir = ".";
  std::string config_path;
  app.add_option("--seed", common.seed, "Random seed")->envname("DIFFSTRUCT_SEED");
  app.add_option("--config", config_path, "File of key = value option defaults");
  app.add_option("--out-dir", out_dir, "Directory for artifacts and summaries");
  app.add_flag("--plots", common.plots, "Also write SVG plots");
  app.add_flag("--record-timing", common.record_timing, "Include wall time in summaries");

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Write a synthetic dataset");
  g->add_option("kind", gen.kind, "sine, circle or custom");
  g->add_option("--n", gen.n, "Number of samples");
  g->add_option("--range", gen.range, "Abscissa range a,b")->delimiter(',')->expected(2);
  g->add_option("--noise", gen.noise, "Gaussian noise standard deviation");
  g->add_option("--expr", gen.expr, "u(t) for custom data, e.g. 'exp(-t/4)*sin(t)'");
  g->add_option("--output", gen.output, "CSV file name");

  JetsOptions jets;
  auto* j = app.add_subcommand("jets", "Estimate jets (u, u', u'') from a series");
  j->add_option("input", jets.input, "Series CSV (t,u)")->required();
  j->add_option("--k", jets.k, "Neighbourhood size");
  j->add_flag("--trim,!--no-trim", jets.trim, "Drop boundary points with one-sided neighbourhoods");
  j->add_flag("--normalize,!--no-normalize", jets.normalize, "Standardise neighbourhoods before PCA");
  j->add_option("--method", jets.method, "pca or fd");
  j->add_option("--output", jets.output, "Jets CSV file name");

  DiscoverOptions disc;
  auto* d = app.add_subcommand("discover", "Fit a relation F(u, u', u'') = 0 to jets");
  d->add_option("input", disc.input, "Jets CSV")->required();
  d->add_option("--mode", disc.mode, "linear or implicit");
  d->add_option("--hidden", disc.implicit.hidden, "Hidden layer widths")->delimiter(',');
  d->add_option("--max-iterations", disc.implicit.max_iterations);
  d->add_option("--loss-threshold", disc.implicit.loss_threshold);
  d->add_option("--step-size", disc.implicit.step_size);
  d->add_option("--probe-margin", disc.implicit.probe_margin);
  d->add_option("--probe-exclusion", disc.implicit.probe_exclusion);
  d->add_option("--probe-weight", disc.implicit.probe_weight);
  d->add_option("--far-distance", disc.far_distance, "Distance that counts as far from the data");
  d->add_option("--output", disc.output, "Model JSON file name");

  DecodeOptions dec;
  auto* c = app.add_subcommand("decode", "Solve the discovered relation from an initial condition");
  c->add_option("model", dec.model, "Model JSON from discover")->required();
  c->add_option("--ic", dec.ic, "t0,u0,du0")->delimiter(',')->expected(3);
  c->add_option("--method", dec.method, "integrate, closed-form or pinn");
  c->add_option("--t-end", dec.t_end);
  c->add_option("--dt", dec.h, "Integration step");
  c->add_option("--points", dec.points, "Collocation points (pinn)");
  c->add_option("--hidden", dec.pinn.hidden)->delimiter(',');
  c->add_option("--max-iterations", dec.pinn.max_iterations);
  c->add_option("--loss-threshold", dec.pinn.loss_threshold);
  c->add_option("--ic-weight", dec.pinn.ic_weight);
  c->add_option("--step-size", dec.pinn.step_size);
  c->add_flag("--random-collocation,!--fixed-collocation", dec.pinn.random_collocation);
  c->add_option("--output", dec.output, "Solution CSV file name");

  DaeOptions dae;
  auto& dc = dae.config;
  auto* a = app.add_subcommand("dae", "Learn a latent coordinate and its linear relation");
  a->add_option("input", dae.input, "Point CSV, one column per ambient dimension")->required();
  a->add_option("--encoder-hidden", dc.encoder_hidden)->delimiter(',');
  a->add_option("--decoder-hidden", dc.decoder_hidden)->delimiter(',');
  a->add_option("--latent-dim", dc.latent_dim);
  a->add_option("--order", dc.order);
  a->add_option("--step-size", dc.step_size);
  a->add_option("--coefficient-step-size", dc.coefficient_step_size);
  a->add_option("--phase1-max-iterations", dc.phase1_max_iterations);
  a->add_option("--phase1-threshold", dc.phase1_threshold);
  a->add_option("--phase2-max-iterations", dc.phase2_max_iterations);
  a->add_option("--phase2-threshold", dc.phase2_threshold);
  a->add_option("--residual-weight", dc.residual_weight);
  a->add_flag("--unit-speed,!--free-speed", dc.unit_speed, "Keep the decoder at unit RMS speed");
  a->add_option("--divergence-limit", dc.divergence_limit);
  a->add_option("--sweep-points", dae.sweep_points);
  a->add_option("--reference", dae.reference, "Direction to report the angle against")->delimiter(',');

  auto* all = app.add_subcommand("all", "Run every pipeline end to end");

  std::vector<std::string> args(argv, argv + argc);
  try {
    for (std::size_t i = 1; i + 1 < args.size(); ++i) {
      if (args[i] == "--config") config_path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (!args.empty() && args.back().rfind("--config=", 0) == 0) config_path = args.back().substr(9);
    if (!config_path.empty()) {
      std::string text;
      try {
        text = read_text_file(config_path);
      } catch (const Error& e) {
        throw Error(Errc::usage, e.what());
      }
      args = expand_config(args, parse_config(text), app);
    }
  } catch (const Error& e) {
    std::cerr << "diffstruct: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  }

  std::vector<char*> cargv;
  for (auto& s : args) cargv.push_back(s.data());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return exit_code(Errc::usage);
  }

  common.out_dir = out_dir;
  try {
    fs::create_directories(common.out_dir);
    Json summary;
    if (g->parsed()) summary = run_gen(gen, common);
    else if (j->parsed()) summary = run_jets(jets, common);
    else if (d->parsed()) summary = run_discover(disc, common);
    else if (c->parsed()) summary = run_decode(dec, common);
    else if (a->parsed()) summary = run_dae(dae, common);
    else if (all->parsed()) summary = run_all(common);
    std::cout << summary.dump(2) << "\n";
  } catch (const Error& e) {
    std::cerr << "diffstruct: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "diffstruct: io: " << e.what() << "\n";
    return exit_code(Errc::io);
  } catch (const Json::exception& e) {
    std::cerr << "diffstruct: parse: " << e.what() << "\n";
    return exit_code(Errc::parse);
  }
  return 0;
}

}  // namespace diffstruct::app
