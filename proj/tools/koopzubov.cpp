// koopzubov: simulate -> learn -> solve -> certify -> export-contours.
//
// Exit codes: 0 certified (or stage succeeded), 2 counterexample / not
// certified, 3 unknown (budget or resolution), 1 operational error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "koopzubov/errors.hpp"
#include "koopzubov/io.hpp"
#include "koopzubov/pipeline.hpp"

namespace fs = std::filesystem;
using namespace kz;

namespace {

struct Common {
  std::string config;
  std::string out_dir;
  int threads = 0;
};

// Flag overrides are written back into the config JSON so the hash stamped
// into every output covers them.
PipelineConfig load(const Common& o, const std::optional<std::string>& route = std::nullopt) {
  Json j = read_json(o.config);
  if (o.threads > 0) j["threads"] = o.threads;
  if (!o.out_dir.empty()) j["output"]["dir"] = o.out_dir;
  if (route) j["pde"]["route"] = *route;
  return parse_config(j);
}

fs::path pick(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

TrajectoryDataset load_dataset(const PipelineConfig& cfg, const std::string& flag) {
  fs::path csv = !flag.empty() ? fs::path(flag)
                 : !cfg.sampling.dataset.empty() ? fs::path(cfg.sampling.dataset)
                                                 : cfg.output.path(cfg.output.dataset);
  if (!fs::exists(csv)) throw ConfigError("dataset not found: " + csv.string());
  return read_dataset(csv, dataset_meta_path(csv));
}

void log_dataset(const TrajectoryDataset& ds) {
  std::fprintf(stderr, "dataset: %zu trajectories, %zu snapshots each (gamma %g Hz, tau_s %g s)\n", ds.size(),
               ds.trajectories.empty() ? 0 : ds.trajectories.front().times.size(), ds.gamma, ds.tau_s);
}

void log_model(const LearnResult& m) {
  const auto& g = m.generator;
  std::fprintf(stderr, "generator: N = %d, rank %d (%d truncated), relative residual %.3e\n", g.dictionary.size(),
               g.rank, g.truncated, g.relative_residual);
  std::fprintf(stderr, "identification: alpha %.3e, identity error %.3e\n", m.alpha, m.identity_error);
  std::fprintf(stderr, "A_hat = [");
  for (Eigen::Index i = 0; i < m.A_hat.rows(); ++i)
    for (Eigen::Index j = 0; j < m.A_hat.cols(); ++j)
      std::fprintf(stderr, "%s%.4f", (i || j) ? (j ? ", " : "; ") : "", m.A_hat(i, j));
  std::fprintf(stderr, "]\n");
}

void log_candidate(const LyapunovCandidate& c) {
  const auto& f = c.fit_stats();
  std::fprintf(stderr, "candidate: %s form, interior rms %.3e, boundary rms %.3e, V(0) = %.3e\n", to_string(c.form()),
               f.interior_rms, f.boundary_rms, c.value(State::Zero(c.dim())));
}

void log_report(const CertificationReport& r) {
  const auto& b = r.bounds;
  std::fprintf(stderr, "constants: K_f %.4g, K_fhat %.4g, nu %.4g, alpha %.3e, delta %.1e -> beta %.3e (used %.3e)\n",
               b.K_f, b.K_fhat, b.nu, b.alpha, b.delta, b.beta_required, b.beta_used);
  std::fprintf(stderr, "levels: c %.6g, c1 %.6g, c2 %.6g\n", r.c, r.c1, r.c2);
  for (const auto& v : r.verdicts)
    std::fprintf(stderr, "  %-20s %-14s boxes %zu  %.2fs %s\n", v.check.c_str(), to_string(v.status), v.stats.boxes,
                 v.stats.seconds, v.detail.c_str());
  std::fprintf(stderr, "outcome: %s%s%s (audit %s, %.1fs)\n", r.outcome.c_str(), r.message.empty() ? "" : " - ",
               r.message.c_str(), r.audit_passed ? "passed" : "not run/failed", r.seconds);
}

void save_report(const PipelineConfig& cfg, const CertificationReport& r, const fs::path& report_path,
                 const fs::path& cover_path) {
  Json j = report_to_json(r);
  j["provenance"] = to_json(cfg.provenance());
  write_json(report_path, j);
  if (r.certified) write_cover_csv(cover_path, r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman-generator learning and region-of-attraction certification"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", common.out_dir, "output directory (overrides output.dir)");
    sub->add_option("-j,--threads", common.threads, "worker threads (default: config, then KOOPZUBOV_THREADS)")
        ->check(CLI::PositiveNumber);
  };

  auto* simulate_cmd = app.add_subcommand("simulate", "integrate trajectories and write the dataset");
  add_common(simulate_cmd);

  std::string dataset_flag, model_flag, candidate_flag, report_flag, route_flag;
  auto* learn_cmd = app.add_subcommand("learn", "learn the generator and vector field from a dataset");
  add_common(learn_cmd);
  learn_cmd->add_option("--dataset", dataset_flag, "trajectory CSV (metadata JSON alongside)");

  auto* solve_cmd = app.add_subcommand("solve", "solve the Zubov or Lyapunov equation over the dictionary");
  add_common(solve_cmd);
  solve_cmd->add_option("--model", model_flag, "model JSON from 'learn'");
  solve_cmd->add_option("--route", route_flag, "operator (learned generator) or direct (identified field)")
      ->check(CLI::IsMember({"operator", "direct"}));

  auto* certify_cmd = app.add_subcommand("certify", "certify a region of attraction for a candidate");
  add_common(certify_cmd);
  certify_cmd->add_option("--model", model_flag, "model JSON");
  certify_cmd->add_option("--candidate", candidate_flag, "candidate JSON");
  certify_cmd->add_option("--dataset", dataset_flag, "dataset whose initial conditions define alpha");

  std::vector<std::size_t> grid_flag;
  auto* contours_cmd = app.add_subcommand("export-contours", "write V and V_P on a grid plus the certified levels");
  add_common(contours_cmd);
  contours_cmd->add_option("--candidate", candidate_flag, "candidate JSON");
  contours_cmd->add_option("--report", report_flag, "report JSON providing P, c, c1, c2");
  contours_cmd->add_option("--grid", grid_flag, "grid points per axis: NX NY")->expected(2);

  auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage");
  add_common(pipeline_cmd);
  pipeline_cmd->add_option("--route", route_flag, "solve route")->check(CLI::IsMember({"operator", "direct"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const std::optional<std::string> route = route_flag.empty() ? std::nullopt : std::optional(route_flag);
    const auto cfg = load(common, route);
    const auto prov = cfg.provenance();
    const auto& out = cfg.output;

    if (*simulate_cmd || *pipeline_cmd) {
      const auto ds = simulate(cfg);
      write_dataset(out.path(out.dataset), dataset_meta_path(out.path(out.dataset)), ds, prov);
      log_dataset(ds);
      if (*simulate_cmd) return 0;
    }

    if (*learn_cmd || *pipeline_cmd) {
      const auto ds = load_dataset(cfg, dataset_flag);
      if (*learn_cmd) log_dataset(ds);
      const auto model = learn(cfg, ds);
      write_json(out.path(out.model), learn_result_to_json(model, prov));
      log_model(model);
      if (*learn_cmd) return 0;
    }

    auto load_model = [&] {
      const auto path = pick(model_flag, out.path(out.model));
      if (!fs::exists(path)) throw ConfigError("model not found: " + path.string());
      return learn_result_from_json(read_json(path));
    };
    auto load_candidate = [&] {
      const auto path = pick(candidate_flag, out.path(out.candidate));
      if (!fs::exists(path)) throw ConfigError("candidate not found: " + path.string());
      return candidate_from_json(read_json(path));
    };

    if (*solve_cmd || *pipeline_cmd) {
      const auto model = load_model();
      const auto cand = solve(cfg, model);
      Json j = candidate_to_json(cand);
      j["provenance"] = to_json(prov);
      write_json(out.path(out.candidate), j);
      log_candidate(cand);
      if (*solve_cmd) return 0;
    }

    if (*certify_cmd || *pipeline_cmd) {
      const auto model = load_model();
      const auto cand = load_candidate();
      const auto ds = load_dataset(cfg, dataset_flag);
      const auto samples = ds.initial_conditions();
      const auto rep = certify(cfg, cand, model, samples);
      save_report(cfg, rep, out.path(out.report), out.path(out.cover));
      log_report(rep);
      if (*pipeline_cmd && cand.dim() == 2) {
        export_contours(out.path(out.contours), out.path(out.levels), cand, rep.P, rep.c, rep.c1, rep.c2,
                        cfg.contours, prov);
        const auto rc = region_counts(cand, rep, cfg.verify.domain, cfg.contours);
        std::fprintf(stderr, "grid cells: quadratic %zu, certified %zu, quadratic outside certified %zu\n",
                     rc.quadratic, rc.certified, rc.quadratic_outside);
      }
      return exit_code(rep);
    }

    if (*contours_cmd) {
      const auto cand = load_candidate();
      const auto rpath = pick(report_flag, out.path(out.report));
      if (!fs::exists(rpath)) throw ConfigError("report not found: " + rpath.string());
      const Json r = read_json(rpath);
      ContourConfig grid = cfg.contours;
      if (grid_flag.size() == 2) {
        grid.nx = grid_flag[0];
        grid.ny = grid_flag[1];
      }
      const auto& lv = r.at("levels");
      export_contours(out.path(out.contours), out.path(out.levels), cand,
                      matrix_from_json(r.at("quadratic").at("P")), lv.at("c").get<double>(),
                      lv.at("c1").get<double>(), lv.at("c2").get<double>(), grid, prov);
      std::fprintf(stderr, "wrote %zu x %zu grid to %s\n", grid.nx, grid.ny, out.path(out.contours).c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "koopzubov: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
