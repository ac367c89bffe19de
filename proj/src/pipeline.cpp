#include "koopzubov/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "koopzubov/errors.hpp"
#include "koopzubov/parallel.hpp"

namespace kz {

namespace fs = std::filesystem;

SamplingMode sampling_mode_from_string(std::string_view s) {
  if (s == "iid") return SamplingMode::Iid;
  if (s == "grid") return SamplingMode::Grid;
  if (s == "iid_ball") return SamplingMode::IidBall;
  throw ConfigError("unknown sampling mode '" + std::string(s) + "' (iid, grid, iid_ball)");
}

const char* to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::Iid: return "iid";
    case SamplingMode::Grid: return "grid";
    case SamplingMode::IidBall: return "iid_ball";
  }
  return "?";
}

// Output locations and thread count do not influence any result, so they are
// left out: the same science hashes the same wherever it is written.
std::string PipelineConfig::hash() const {
  Json j = raw;
  if (j.is_object()) {
    j.erase("output");
    j.erase("threads");
  }
  return fnv1a_hex(j.dump());
}

Provenance PipelineConfig::provenance() const {
  Provenance p{hash(), Json::object()};
  p.seeds["sampling"] = sampling.seed;
  p.seeds["pde"] = pde.seed;
  if (dictionary.contains("seed")) p.seeds["dictionary"] = dictionary["seed"];
  return p;
}

namespace {

double positive(const Json& j, const char* key, double dflt) {
  const double v = j.value(key, dflt);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be positive");
  return v;
}

std::size_t count(const Json& j, const char* key, std::size_t dflt) {
  const auto v = j.value(key, static_cast<std::int64_t>(dflt));
  if (v < 1) throw ConfigError(std::string(key) + " must be at least 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

PipelineConfig parse_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  c.raw = j;
  c.system = j.value("system", Json());
  c.dictionary = j.at("dictionary");
  c.threads = j.value("threads", default_threads());
  if (c.threads < 1) throw ConfigError("threads must be at least 1");

  const Json s = j.value("sampling", Json::object());
  c.sampling.M = count(s, "M", 100);
  c.sampling.gamma = positive(s, "gamma", 50.0);
  c.sampling.tau_s = positive(s, "tau_s", 5.0);
  c.sampling.seed = s.value<std::uint64_t>("seed", 1);
  c.sampling.mode = sampling_mode_from_string(s.value("mode", "iid"));
  c.sampling.tol = positive(s, "tol", 1e-10);
  c.sampling.dataset = s.value("dataset", "");
  if (s.contains("domain")) c.sampling.domain = box_from_json(s["domain"]);

  const Json g = j.value("generator", Json::object());
  c.generator.mu = positive(g, "mu", 2.5);
  c.generator.lambda = positive(g, "lambda", 1e8);
  c.generator.svd_tol = positive(g, "svd_tol", 1e-12);
  c.generator.quadrature.nodes_per_panel = g.value("nodes_per_panel", 5);
  c.generator.quadrature.panels_per_interval = g.value("panels_per_interval", 1);
  if (c.generator.lambda <= c.generator.mu) throw ConfigError("generator.lambda must exceed generator.mu");

  const Json p = j.value("pde", Json::object());
  c.pde.form = certificate_form_from_string(p.value("form", "zubov"));
  const auto route = p.value("route", "operator");
  if (route == "operator") c.pde.route = SolveRoute::Operator;
  else if (route == "direct") c.pde.route = SolveRoute::Direct;
  else throw ConfigError("pde.route must be 'operator' or 'direct'");
  c.pde.options.r = positive(p, "r", 0.1);
  c.pde.options.lambda_b = positive(p, "lambda_b", 100.0);
  c.pde.options.ridge = p.value("ridge", 1e-10);
  if (c.pde.options.ridge < 0) throw ConfigError("pde.ridge must be non-negative");
  c.pde.options.threads = c.threads;
  c.pde.interior = count(p, "interior", 3000);
  c.pde.boundary = count(p, "boundary", 100);
  c.pde.seed = p.value<std::uint64_t>("seed", 1);
  if (p.contains("domain")) c.pde.domain = box_from_json(p["domain"]);
  else c.pde.domain = c.sampling.domain;

  const Json v = j.value("verify", Json::object());
  if (v.contains("domain")) c.verify.domain = box_from_json(v["domain"]);
  else c.verify.domain = c.pde.domain;
  c.verify.delta = positive(v, "delta", 3e-4);
  if (v.contains("Q") && !v["Q"].is_null()) c.verify.Q = matrix_from_json(v["Q"]);
  c.verify.band_outside_basin = v.value("band_outside_basin", false);
  auto& vc = c.verify.verifier;
  vc.eps_box = positive(v, "eps_box", vc.eps_box);
  vc.max_boxes = count(v, "max_boxes", vc.max_boxes);
  vc.rho = v.value("rho", 0.0);
  if (vc.rho < 0) throw ConfigError("verify.rho must be non-negative (0 selects it automatically)");
  vc.bisect_tol = positive(v, "bisect_tol", vc.bisect_tol);
  vc.sup_rel_tol = positive(v, "sup_rel_tol", vc.sup_rel_tol);
  vc.sup_max_boxes = count(v, "sup_max_boxes", vc.sup_max_boxes);
  vc.record_cover = v.value("record_cover", true);
  vc.threads = c.threads;

  const Json k = j.value("contours", Json::object());
  c.contours.window = k.contains("window") ? box_from_json(k["window"]) : c.pde.domain;
  if (k.contains("grid")) {
    const auto gs = k["grid"].get<std::vector<std::size_t>>();
    if (gs.size() != 2) throw ConfigError("contours.grid must be [nx, ny]");
    c.contours.nx = gs[0];
    c.contours.ny = gs[1];
  }
  if (c.contours.nx < 2 || c.contours.ny < 2) throw ConfigError("contour grid needs at least 2 points per axis");

  const Json o = j.value("output", Json::object());
  c.output.dir = o.value("dir", "out");
  c.output.dataset = o.value("dataset", c.output.dataset);
  c.output.model = o.value("model", c.output.model);
  c.output.candidate = o.value("candidate", c.output.candidate);
  c.output.report = o.value("report", c.output.report);
  c.output.cover = o.value("cover", c.output.cover);
  c.output.contours = o.value("contours", c.output.contours);
  c.output.levels = o.value("levels", c.output.levels);

  if (c.sampling.dataset.empty() && c.sampling.domain.size() == 0)
    throw ConfigError("sampling.domain is required unless sampling.dataset is given");
  return c;
}

PipelineConfig load_config(const fs::path& path) { return parse_config(read_json(path)); }

OdeSystem make_system(const Json& spec) {
  if (spec.is_string()) return builtin(spec.get<std::string>());
  if (spec.is_object()) {
    if (spec.contains("linear")) return linear_system(matrix_from_json(spec["linear"]));
    if (spec.contains("scalar_linear")) return scalar_linear(spec["scalar_linear"].get<double>());
  }
  throw ConfigError("system must be a builtin name, {\"linear\": A} or {\"scalar_linear\": a}");
}

Dictionary make_dictionary(const Json& spec) { return dictionary_from_json(spec); }

std::vector<State> initial_conditions(const SamplingConfig& s, int n) {
  if (static_cast<int>(s.domain.size()) != n) throw ConfigError("sampling.domain dimension differs from the system");
  switch (s.mode) {
    case SamplingMode::Iid: return sample_uniform(s.domain, s.M, s.seed);
    case SamplingMode::IidBall: return sample_ball(s.domain, s.M, s.seed);
    case SamplingMode::Grid: {
      const auto side = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(s.M), 1.0 / n)));
      std::size_t total = 1;
      for (int i = 0; i < n; ++i) total *= side;
      if (total != s.M) throw ConfigError("grid sampling needs M to be a perfect n-th power");
      return sample_grid(s.domain, side);
    }
  }
  return {};
}

TrajectoryDataset simulate(const PipelineConfig& cfg) {
  const auto sys = make_system(cfg.system);
  const auto inits = initial_conditions(cfg.sampling, sys.dim());
  IntegratorOptions opts;
  opts.tol = cfg.sampling.tol;
  auto ds = sample_trajectories(sys, inits, cfg.sampling.gamma, cfg.sampling.tau_s, cfg.sampling.domain, opts,
                                cfg.threads);
  ds.seed = cfg.sampling.seed;
  return ds;
}

LearnResult learn(const PipelineConfig& cfg, const TrajectoryDataset& ds) {
  const auto d = make_dictionary(cfg.dictionary);
  if (d.dim() != ds.dim()) throw ConfigError("dictionary dimension differs from the dataset");
  const auto B = assemble_observables(ds, d);
  const auto R = resolvent_quadrature(ds, d, cfg.generator.mu, cfg.generator.quadrature, cfg.threads);
  auto g = learn_generator(B, R, d, cfg.generator.lambda, cfg.generator.svd_tol);
  g.tau_s = ds.tau_s;
  auto field = correct_equilibrium(extract_vector_field(g));
  LearnResult r{std::move(g), field, linearize_at_origin(field)};
  if (!cfg.system.is_null()) {
    const auto sys = make_system(cfg.system);
    const auto inits = ds.initial_conditions();
    r.alpha = compute_alpha(r.field, inits, sys);
    r.identity_error = generator_identity_error(r.generator, sys, inits);
  }
  return r;
}

Json learn_result_to_json(const LearnResult& r, const Provenance& prov) {
  return Json{{"generator", generator_to_json(r.generator)},
              {"vector_field", vector_field_to_json(r.field)},
              {"diagnostics",
               {{"alpha", r.alpha}, {"identity_error", r.identity_error}, {"A_hat", matrix_to_json(r.A_hat)}}},
              {"provenance", to_json(prov)}};
}

LearnResult learn_result_from_json(const Json& j) {
  auto g = generator_from_json(j.at("generator"));
  auto field = vector_field_from_json(j.at("vector_field"), g.dictionary);
  LearnResult r{std::move(g), field, linearize_at_origin(field)};
  if (j.contains("diagnostics")) {
    r.alpha = j["diagnostics"].value("alpha", 0.0);
    r.identity_error = j["diagnostics"].value("identity_error", 0.0);
  }
  return r;
}

LyapunovCandidate solve(const PipelineConfig& cfg, const LearnResult& model) {
  const auto& p = cfg.pde;
  if (p.domain.size() == 0) throw ConfigError("pde.domain is required");
  const auto interior = sample_uniform(p.domain, p.interior, p.seed);
  const bool direct = p.route == SolveRoute::Direct;
  if (p.form == CertificateForm::Lyapunov)
    return direct ? lyapunov_lsq_direct(model.field, interior, p.options)
                  : lyapunov_lsq(model.generator, interior, p.options);
  const auto boundary = perimeter_boundary(p.domain, p.boundary, p.seed + 1);
  return direct ? zubov_lsq_direct(model.field, interior, boundary, p.options)
                : zubov_lsq(model.generator, interior, boundary, p.options);
}

CertificationReport certify(const PipelineConfig& cfg, const LyapunovCandidate& V, const LearnResult& model,
                            std::span<const State> samples) {
  if (cfg.system.is_null())
    throw ConfigError("certification needs an oracle system for K_f and alpha (config key 'system')");
  const auto oracle = make_system(cfg.system);
  CertifyOptions opt;
  opt.Q = cfg.verify.Q;
  opt.delta = cfg.verify.delta;
  opt.band_outside_basin = cfg.verify.band_outside_basin;
  opt.verifier = cfg.verify.verifier;
  return certify_roa(V, model.field, oracle, samples, cfg.verify.domain, opt);
}

int exit_code(const CertificationReport& r) {
  if (r.certified) return 0;
  if (r.outcome == "unknown") return 3;
  return 2;
}

void export_contours(const fs::path& csv, const fs::path& levels, const LyapunovCandidate& V,
                     const Eigen::MatrixXd& P, double c, double c1, double c2, const ContourConfig& grid,
                     const Provenance& prov) {
  if (V.dim() != 2 || grid.window.size() != 2) throw ConfigError("contour export is defined for planar systems");
  if (grid.nx < 2 || grid.ny < 2) throw ConfigError("contour grid needs at least 2 points per axis");
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ofstream out(csv);
  if (!out) throw ConfigError("cannot write " + csv.string());
  out << "x1,x2,V,VP\n";
  const auto& w = grid.window;
  char buf[128];
  State x(2);
  for (std::size_t j = 0; j < grid.ny; ++j) {
    x(1) = w[1].lo() + w[1].width() * static_cast<double>(j) / static_cast<double>(grid.ny - 1);
    for (std::size_t i = 0; i < grid.nx; ++i) {
      x(0) = w[0].lo() + w[0].width() * static_cast<double>(i) / static_cast<double>(grid.nx - 1);
      const double v = V.value(x);
      if (P.size()) std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x(0), x(1), v, x.dot(P * x));
      else std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,\n", x(0), x(1), v);
      out << buf;
    }
  }
  write_json(levels, Json{{"c", c}, {"c1", c1}, {"c2", c2}, {"window", box_to_json(w)},
                          {"grid", {grid.nx, grid.ny}}, {"provenance", to_json(prov)}});
}

RegionCounts region_counts(const LyapunovCandidate& V, const CertificationReport& r, const Box& verify_domain,
                           const ContourConfig& grid) {
  RegionCounts rc;
  if (!r.P.size()) return rc;
  const auto& w = grid.window;
  State x(2);
  for (std::size_t i = 0; i < grid.nx; ++i) {
    x(0) = w[0].lo() + w[0].width() * static_cast<double>(i) / static_cast<double>(grid.nx - 1);
    for (std::size_t j = 0; j < grid.ny; ++j) {
      x(1) = w[1].lo() + w[1].width() * static_cast<double>(j) / static_cast<double>(grid.ny - 1);
      const bool in_q = x.dot(r.P * x) <= r.c;
      const bool in_v = r.certified && verify_domain.contains(x) && V.value(x) <= r.c2;
      rc.quadratic += in_q;
      rc.certified += in_v;
      rc.quadratic_outside += in_q && !in_v;
    }
  }
  return rc;
}

}  // namespace kz
