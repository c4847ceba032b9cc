#include "app.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "diffstruct/error.hpp"
#include "diffstruct/io.hpp"
#include "diffstruct/jets.hpp"
#include "expr.hpp"
#include "svg.hpp"

namespace diffstruct::app {

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<double> kHarmonic{1.0, 0.0, 1.0};

void write_json(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
}

/// Path as echoed in summaries: relative to the output directory, so a
/// whole output tree can be moved or regenerated elsewhere byte for byte.
std::string echo_path(const std::string& p, const fs::path& out_dir) {
  if (p.empty()) return p;
  return fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(out_dir).lexically_normal())
      .generic_string();
}

double angle_deg(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double c = std::min(1.0, std::abs(ab) / std::sqrt(aa * bb));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::string summary_name(const std::string& command) { return command + "_summary.json"; }

Json finish(const std::string& command, Json config, Json metrics, Json artifacts,
            const Common& common, Clock::time_point start, const std::string& file) {
  for (auto& [key, value] : metrics.items()) {
    if (value.is_number() && !std::isfinite(value.get<double>())) {
      throw Error(Errc::numeric, "metric " + key + " is not finite");
    }
  }
  Json s;
  s["command"] = command;
  s["seed"] = common.seed;
  s["config"] = std::move(config);
  s["metrics"] = std::move(metrics);
  s["artifacts"] = std::move(artifacts);
  if (common.record_timing) {
    s["wall_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
  }
  write_json(common.out_dir / file, s);
  return s;
}

void require(bool ok, Errc code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

std::vector<std::vector<double>> read_points(const fs::path& path) {
  const auto table = read_csv_file(path);
  require(!table.rows.empty(), Errc::insufficient_data, path.string() + ": no data rows");
  return table.rows;
}

std::string write_mlp_file(const fs::path& path, const Mlp& net) {
  std::ostringstream s;
  write_mlp(s, net);
  write_text_file(path, s.str());
  return s.str();
}

Mlp read_mlp_file(const fs::path& path) {
  std::istringstream s(read_text_file(path));
  return read_mlp(s);
}

// Abscissae integrate() produces: t0 + i h with the last step landing on t_end.
std::vector<double> step_grid(double t0, double t_end, double h) {
  const auto steps = static_cast<std::size_t>(std::ceil((t_end - t0) / h - 1e-9));
  std::vector<double> ts;
  for (std::size_t i = 0; i <= steps; ++i) ts.push_back(i == steps ? t_end : t0 + static_cast<double>(i) * h);
  return ts;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json run_gen(const GenOptions& opts, const Common& common) {
  const auto start = Clock::now();
  require(opts.n >= 3, Errc::parameter, "gen needs n >= 3");
  require(opts.noise >= 0.0 && std::isfinite(opts.noise), Errc::parameter, "noise must be >= 0");
  std::vector<double> range = opts.range.empty() ? std::vector<double>{0.0, 4.0 * std::numbers::pi}
                                                 : opts.range;
  require(range.size() == 2 && range[1] > range[0], Errc::parameter, "range must be two increasing values");

  std::mt19937_64 rng(common.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noisy = [&](double v) { return opts.noise > 0.0 ? v + opts.noise * gauss(rng) : v; };

  const fs::path out = common.out_dir / opts.output;
  Json config{{"kind", opts.kind}, {"n", opts.n}, {"noise", opts.noise}, {"output", opts.output}};
  Json artifacts{{"data", opts.output}};
  std::vector<std::vector<double>> cols(2, std::vector<double>(opts.n));
  std::vector<std::string> header;

  if (opts.kind == "circle") {
    header = {"x", "y"};
    for (std::size_t i = 0; i < opts.n; ++i) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(opts.n);
      cols[0][i] = noisy(std::cos(th));
      cols[1][i] = noisy(std::sin(th));
    }
  } else if (opts.kind == "sine" || opts.kind == "custom") {
    Expression f = Expression::parse(opts.kind == "sine" ? "sin(t)" : opts.expr);
    require(opts.kind == "sine" || !opts.expr.empty(), Errc::usage, "custom data needs --expr");
    config["range"] = range;
    if (opts.kind == "custom") config["expr"] = opts.expr;
    header = {"t", "u"};
    for (std::size_t i = 0; i < opts.n; ++i) {
      const double t = range[0] + (range[1] - range[0]) * static_cast<double>(i) /
                                      static_cast<double>(opts.n - 1);
      const double u = f(t);
      require(std::isfinite(u), Errc::numeric, "expression is not finite at t = " + format_number(t));
      cols[0][i] = t;
      cols[1][i] = noisy(u);
    }
  } else {
    throw Error(Errc::usage, "unknown dataset kind '" + opts.kind + "' (sine, circle, custom)");
  }

  write_csv_file(out, header, cols);
  if (common.plots) {
    const auto svg = fs::path(opts.output).replace_extension(".svg").string();
    write_svg_plot(common.out_dir / svg, opts.kind, cols[0], cols[1]);
    artifacts["plot"] = svg;
  }
  return finish("gen", config, Json{{"rows", opts.n}}, artifacts, common, start, summary_name("gen"));
}

Json run_jets(const JetsOptions& opts, const Common& common) {
  const auto start = Clock::now();
  const auto series = series_from_csv(read_csv_file(opts.input));
  JetSeries jets;
  std::size_t trim = 0;
  if (opts.method == "pca") {
    jets = estimate_jets(series, {opts.k, opts.normalize});
    trim = opts.k / 2;
  } else if (opts.method == "fd") {
    jets = finite_diff_jets(series);
    trim = 1;
  } else {
    throw Error(Errc::usage, "unknown jet method '" + opts.method + "' (pca, fd)");
  }
  if (opts.trim) jets = jets.trimmed(trim);

  double rmin = INFINITY, rmax = 0.0, rsum = 0.0, u2max = 0.0;
  for (std::size_t i = 0; i < jets.size(); ++i) {
    const double r = std::hypot(jets.u[i], jets.u1[i]);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    rsum += r;
    u2max = std::max(u2max, std::abs(jets.u2[i]));
  }
  const double rmean = rsum / static_cast<double>(jets.size());

  write_jets_csv(common.out_dir / opts.output, jets);
  Json artifacts{{"jets", opts.output}};
  if (common.plots) {
    const auto svg = fs::path(opts.output).replace_extension(".svg").string();
    write_svg_plot(common.out_dir / svg, "u' against u", jets.u, jets.u1);
    artifacts["plot"] = svg;
  }
  Json config{{"input", echo_path(opts.input, common.out_dir)},
              {"k", opts.k},
              {"trim", opts.trim},
              {"normalize", opts.normalize},
              {"method", opts.method},
              {"output", opts.output}};
  Json metrics{{"rows", jets.size()},
               {"ring_radius_spread", rmean > 0.0 ? (rmax - rmin) / rmean : 0.0},
               {"max_abs_u2", u2max}};
  return finish("jets", config, metrics, artifacts, common, start, summary_name("jets"));
}

Json run_discover(const DiscoverOptions& opts, const Common& common) {
  const auto start = Clock::now();
  const auto jets = jets_from_csv(read_csv_file(opts.input));
  Json config{{"input", echo_path(opts.input, common.out_dir)}, {"mode", opts.mode}};
  Json metrics, artifacts;

  if (opts.mode == "linear") {
    const std::string out = opts.output.empty() ? "normal_vector.json" : opts.output;
    const auto nv = fit_normal_vector(jets);
    const auto spec = jet_spectrum(jets);
    write_json(common.out_dir / out, Json{{"v", nv.v}, {"offset", nv.offset}});
    config["output"] = out;
    metrics = {{"v", nv.v},
               {"offset", nv.offset},
               {"spectrum", spec},
               {"angle_to_harmonic_deg", angle_deg(nv.v, kHarmonic)}};
    artifacts["model"] = out;
  } else if (opts.mode == "implicit") {
    const std::string out = opts.output.empty() ? "implicit_model.json" : opts.output;
    const std::string net_file = fs::path(out).replace_extension(".net").string();
    ImplicitConfig cfg = opts.implicit;
    cfg.seed = common.seed;
    const auto fit = train_implicit(jets, cfg);
    write_mlp_file(common.out_dir / net_file, fit.model.net);

    // Mean output on probes well away from the data.
    std::vector<Jet3> data;
    for (std::size_t i = 0; i < jets.size(); ++i) data.push_back(fit.model.normalize(jets.jet(i)));
    ProbeSampler far(data, cfg.probe_margin, opts.far_distance, common.seed ^ 0x9e3779b97f4a7c15ULL);
    double mean_far = 0.0;
    const auto probes = far.draw(2000);
    for (const auto& p : probes) {
      mean_far += fit.model.net.forward(std::vector<double>{p[0], p[1], p[2]})[0] /
                  static_cast<double>(probes.size());
    }

    write_json(common.out_dir / out, Json{{"network", net_file},
                                          {"mean", fit.model.mean},
                                          {"scale", fit.model.scale},
                                          {"probe_lo", fit.report.probe_lo},
                                          {"probe_hi", fit.report.probe_hi}});
    config.update(Json{{"hidden", cfg.hidden},
                       {"max_iterations", cfg.max_iterations},
                       {"loss_threshold", cfg.loss_threshold},
                       {"step_size", cfg.step_size},
                       {"probe_margin", cfg.probe_margin},
                       {"probe_exclusion", cfg.probe_exclusion},
                       {"probe_weight", cfg.probe_weight},
                       {"far_distance", opts.far_distance},
                       {"output", out}});
    metrics = {{"loss", fit.report.loss},
               {"mean_abs_data", fit.report.mean_abs_data},
               {"mean_probe", fit.report.mean_probe},
               {"mean_far_probe", mean_far},
               {"iterations", fit.report.iterations}};
    artifacts = {{"model", out}, {"network", net_file}};
  } else {
    throw Error(Errc::usage, "unknown discovery mode '" + opts.mode + "' (linear, implicit)");
  }
  return finish("discover", config, metrics, artifacts, common, start, summary_name("discover"));
}

RelationModel load_model(const fs::path& path) {
  const Json j = read_json(path);
  try {
    if (j.contains("v")) {
      NormalVector nv;
      nv.v = j.at("v").get<Jet3>();
      nv.offset = j.at("offset").get<double>();
      return nv;
    }
    if (j.contains("network")) {
      ImplicitModel m;
      m.net = read_mlp_file(path.parent_path() / j.at("network").get<std::string>());
      m.mean = j.at("mean").get<Jet3>();
      m.scale = j.at("scale").get<Jet3>();
      for (double s : m.scale) require(s > 0.0, Errc::parse, "model scale must be positive");
      return m;
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
  throw Error(Errc::parse, path.string() + ": neither a normal-vector nor an implicit model");
}

Json run_decode(const DecodeOptions& opts, const Common& common) {
  const auto start = Clock::now();
  require(opts.ic.size() == 3, Errc::parameter, "ic needs three values: t0 u0 du0");
  const InitialCondition ic{opts.ic[0], opts.ic[1], opts.ic[2]};
  const auto model = load_model(opts.model);
  std::string hashed = read_text_file(opts.model);
  if (const auto* m = std::get_if<ImplicitModel>(&model)) {
    std::ostringstream s;
    write_mlp(s, m->net);
    hashed += s.str();
  }
  const auto* linear = std::get_if<NormalVector>(&model);

  Json config{{"model", echo_path(opts.model, common.out_dir)},
              {"ic", opts.ic},
              {"method", opts.method},
              {"t_end", opts.t_end},
              {"output", opts.output}};
  Json metrics;
  const std::string stem = fs::path(opts.output).stem().string();
  Json artifacts{{"solution", opts.output}, {"summary", stem + ".json"}};

  DecodeResult result{SampleSeries(), 0.0, DecodeMethod::integrate};
  if (opts.method == "integrate") {
    config["h"] = opts.h;
    result = integrate(model, ic, opts.t_end, opts.h);
  } else if (opts.method == "closed-form") {
    require(linear != nullptr, Errc::unsupported, "closed-form decoding needs a linear model");
    require(opts.h > 0.0 && opts.t_end > ic.t0, Errc::parameter, "need h > 0 and t_end > t0");
    config["h"] = opts.h;
    auto series = closed_form_linear(*linear, ic, step_grid(ic.t0, opts.t_end, opts.h));
    const double res = fd_relation_residual(model, series);
    result = {std::move(series), res, DecodeMethod::closed_form};
  } else if (opts.method == "pinn") {
    PinnConfig cfg = opts.pinn;
    cfg.seed = common.seed;
    config.update(Json{{"points", opts.points},
                       {"hidden", cfg.hidden},
                       {"max_iterations", cfg.max_iterations},
                       {"loss_threshold", cfg.loss_threshold},
                       {"ic_weight", cfg.ic_weight},
                       {"step_size", cfg.step_size},
                       {"random_collocation", cfg.random_collocation}});
    require(opts.t_end > ic.t0, Errc::parameter, "t_end must exceed t0");
    auto p = decode_pinn(model, ic, uniform_grid(ic.t0, opts.t_end, opts.points), cfg);
    const std::string net_file = stem + ".net";
    write_mlp_file(common.out_dir / net_file, p.net);
    artifacts["network"] = net_file;
    metrics.update(Json{{"loss", p.loss},
                        {"iterations", p.iterations},
                        {"ic_value_error", p.ic_value_error},
                        {"ic_slope_error", p.ic_slope_error}});
    result = std::move(p.result);
  } else {
    throw Error(Errc::usage, "unknown decode method '" + opts.method + "' (integrate, closed-form, pinn)");
  }

  metrics["residual"] = result.residual;
  metrics["points"] = result.series.size();
  if (linear && result.method != DecodeMethod::closed_form) {
    try {
      const auto exact = closed_form_linear(*linear, ic, result.series.t());
      double gap = 0.0;
      for (std::size_t i = 0; i < exact.size(); ++i)
        gap = std::max(gap, std::abs(exact.u()[i] - result.series.u()[i]));
      metrics["max_abs_diff_closed_form"] = gap;
    } catch (const Error&) {
      // No closed form for this model; nothing to compare against.
    }
  }

  write_series_csv(common.out_dir / opts.output, result.series);
  write_json(common.out_dir / (stem + ".json"),
             Json{{"method", to_string(result.method)},
                  {"residual", result.residual},
                  {"ic", {{"t0", ic.t0}, {"u0", ic.u0}, {"du0", ic.du0}}},
                  {"model_hash", fnv1a_hex(hashed)}});
  if (common.plots) {
    const auto svg = stem + ".svg";
    write_svg_plot(common.out_dir / svg, std::string("u(t), ") + to_string(result.method),
                   result.series.t(), result.series.u());
    artifacts["plot"] = svg;
  }
  return finish("decode", config, metrics, artifacts, common, start, stem + "_summary.json");
}

Json run_dae(const DaeOptions& opts, const Common& common) {
  const auto start = Clock::now();
  const auto& cfg0 = opts.config;
  check_supported(cfg0.latent_dim, cfg0.order);
  require(opts.sweep_points >= 2, Errc::parameter, "sweep needs at least 2 points");
  const auto data = read_points(opts.input);
  DaeConfig cfg = cfg0;
  cfg.seed = common.seed;
  const auto r = train_dae(data, cfg);

  write_mlp_file(common.out_dir / "encoder.net", r.ae.encoder);
  write_mlp_file(common.out_dir / "decoder.net", r.ae.decoder);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& x : data) {
    const double rho = r.ae.encode(x)[0];
    lo = std::min(lo, rho);
    hi = std::max(hi, rho);
  }
  write_json(common.out_dir / "autoencoder.json",
             Json{{"encoder", "encoder.net"},
                  {"decoder", "decoder.net"},
                  {"ambient_dim", r.ae.ambient_dim()},
                  {"latent_dim", r.ae.latent_dim()},
                  {"latent_range", {lo, hi}}});
  write_json(common.out_dir / "coefficients.json",
             Json{{"order", r.v.order}, {"latent_dim", r.v.latent_dim}, {"coefficients", r.v.coefficients}});

  const auto sweep = latent_sweep(r.ae, data, opts.sweep_points);
  std::vector<std::string> header{"rho"};
  std::vector<std::vector<double>> cols{sweep.rho};
  for (std::size_t d = 0; d < r.ae.ambient_dim(); ++d) {
    header.push_back("y" + std::to_string(d));
    std::vector<double> c;
    for (const auto& p : sweep.points) c.push_back(p[d]);
    cols.push_back(std::move(c));
  }
  write_csv_file(common.out_dir / "latent_sweep.csv", header, cols);
  double radius_dev = 0.0;
  for (const auto& p : sweep.points) {
    double s = 0.0;
    for (double x : p) s += x * x;
    radius_dev = std::max(radius_dev, std::abs(std::sqrt(s) - 1.0));
  }

  Json artifacts{{"manifest", "autoencoder.json"},
                 {"encoder", "encoder.net"},
                 {"decoder", "decoder.net"},
                 {"coefficients", "coefficients.json"},
                 {"latent_sweep", "latent_sweep.csv"}};
  if (common.plots && cols.size() >= 3) {
    write_svg_plot(common.out_dir / "latent_sweep.svg", "decoded latent sweep", cols[1], cols[2]);
    artifacts["plot"] = "latent_sweep.svg";
  }

  Json config{{"input", echo_path(opts.input, common.out_dir)},
              {"order", cfg.order},
              {"latent_dim", cfg.latent_dim},
              {"encoder_hidden", cfg.encoder_hidden},
              {"decoder_hidden", cfg.decoder_hidden},
              {"step_size", cfg.step_size},
              {"coefficient_step_size", cfg.coefficient_step_size},
              {"phase1_max_iterations", cfg.phase1_max_iterations},
              {"phase1_threshold", cfg.phase1_threshold},
              {"phase2_max_iterations", cfg.phase2_max_iterations},
              {"phase2_threshold", cfg.phase2_threshold},
              {"residual_weight", cfg.residual_weight},
              {"unit_speed", cfg.unit_speed},
              {"divergence_limit", cfg.divergence_limit},
              {"sweep_points", opts.sweep_points},
              {"reference", opts.reference}};
  Json metrics{{"phase1_reconstruction", r.phase1.reconstruction},
               {"phase1_iterations", r.phase1.iterations},
               {"phase2_reconstruction", r.phase2.reconstruction},
               {"phase2_residual", r.phase2.residual},
               {"phase2_iterations", r.phase2.iterations},
               {"rms_speed", r.phase2.speed},
               {"coefficients", r.v.coefficients},
               {"latent_span", hi - lo},
               {"sweep_max_unit_radius_deviation", radius_dev}};
  if (r.v.coefficients.size() == 3) metrics["angle_to_harmonic_deg"] = angle_deg(r.v.coefficients, kHarmonic);
  if (opts.reference.size() == r.v.coefficients.size()) {
    metrics["angle_to_reference_deg"] = angle_deg(r.v.coefficients, opts.reference);
  }
  return finish("dae", config, metrics, artifacts, common, start, summary_name("dae"));
}

Json run_all(const Common& common) {
  const auto start = Clock::now();
  Json report;
  report["seed"] = common.seed;
  auto sub = [&](const std::string& name) {
    Common c = common;
    c.out_dir = common.out_dir / name;
    fs::create_directories(c.out_dir);
    return c;
  };
  auto exact_error = [](const Json& summary, const fs::path& dir, double u0, double du0) {
    const auto s = series_from_csv(read_csv_file(dir / summary["artifacts"]["solution"].get<std::string>()));
    double e = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      e = std::max(e, std::abs(s.u()[i] - (u0 * std::cos(s.t()[i]) + du0 * std::sin(s.t()[i]))));
    return e;
  };

  {
    const Common c = sub("sine_zero_start");
    Json p;
    p["gen"] = run_gen({"sine", 1000, {}, 0.0, "", "data.csv"}, c);
    JetsOptions j;
    j.input = (c.out_dir / "data.csv").string();
    j.trim = true;
    p["jets"] = run_jets(j, c);
    DiscoverOptions d;
    d.input = (c.out_dir / "jets.csv").string();
    p["discover"] = run_discover(d, c);
    DecodeOptions dec;
    dec.model = (c.out_dir / "normal_vector.json").string();
    p["integrate"] = run_decode(dec, c);
    dec.method = "closed-form";
    dec.output = "closed_form.csv";
    p["closed_form"] = run_decode(dec, c);
    dec.method = "pinn";
    dec.output = "pinn_solution.csv";
    p["pinn"] = run_decode(dec, c);
    p["max_error_vs_exact"] = {{"integrate", exact_error(p["integrate"], c.out_dir, 0.0, 0.5)},
                               {"closed_form", exact_error(p["closed_form"], c.out_dir, 0.0, 0.5)},
                               {"pinn", exact_error(p["pinn"], c.out_dir, 0.0, 0.5)}};
    report["sine_zero_start"] = std::move(p);
  }
  {
    const Common c = sub("sine_shifted");
    Json p;
    DecodeOptions dec;
    dec.model = (common.out_dir / "sine_zero_start" / "normal_vector.json").string();
    dec.ic = {0.0, 0.5, 0.5};
    p["integrate"] = run_decode(dec, c);
    dec.method = "closed-form";
    dec.output = "closed_form.csv";
    p["closed_form"] = run_decode(dec, c);
    p["max_error_vs_exact"] = {{"integrate", exact_error(p["integrate"], c.out_dir, 0.5, 0.5)},
                               {"closed_form", exact_error(p["closed_form"], c.out_dir, 0.5, 0.5)}};
    report["sine_shifted"] = std::move(p);
  }
  {
    const Common c = sub("implicit");
    Json p;
    p["gen"] = run_gen({"sine", 200, {}, 0.0, "", "data.csv"}, c);
    JetsOptions j;
    j.input = (c.out_dir / "data.csv").string();
    j.trim = true;
    p["jets"] = run_jets(j, c);
    DiscoverOptions d;
    d.input = (c.out_dir / "jets.csv").string();
    d.mode = "implicit";
    p["discover"] = run_discover(d, c);
    DecodeOptions dec;
    dec.model = (c.out_dir / "implicit_model.json").string();
    p["integrate"] = run_decode(dec, c);
    p["max_error_vs_exact"] = {{"integrate", exact_error(p["integrate"], c.out_dir, 0.0, 0.5)}};
    report["implicit"] = std::move(p);
  }
  {
    const Common c = sub("circle");
    Json p;
    p["gen"] = run_gen({"circle", 256, {}, 0.0, "", "data.csv"}, c);
    DaeOptions d;
    d.input = (c.out_dir / "data.csv").string();
    p["dae"] = run_dae(d, c);
    report["circle"] = std::move(p);
  }
  if (common.record_timing) {
    report["wall_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
  }
  write_json(common.out_dir / "report.json", report);
  return report;
}

}  // namespace diffstruct::app
