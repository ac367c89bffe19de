#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "koopzubov/certificates.hpp"
#include "koopzubov/dynamics.hpp"
#include "koopzubov/io.hpp"
#include "koopzubov/koopman.hpp"
#include "koopzubov/verify.hpp"

namespace kz {

enum class SamplingMode { Iid, Grid, IidBall };

SamplingMode sampling_mode_from_string(std::string_view s);
const char* to_string(SamplingMode m);

struct SamplingConfig {
  std::size_t M = 100;
  double gamma = 50.0;
  double tau_s = 5.0;
  Box domain;
  std::uint64_t seed = 1;
  SamplingMode mode = SamplingMode::Iid;
  double tol = 1e-10;
  // Existing trajectory CSV to learn from instead of simulating.
  std::string dataset;
};

struct GeneratorConfig {
  double mu = 2.5;
  double lambda = 1e8;
  double svd_tol = 1e-12;
  QuadratureSpec quadrature;
};

enum class SolveRoute { Operator, Direct };

struct PdeConfig {
  CertificateForm form = CertificateForm::Zubov;
  SolveRoute route = SolveRoute::Operator;
  PdeOptions options;
  std::size_t interior = 3000;
  std::size_t boundary = 100;
  Box domain;
  std::uint64_t seed = 1;
};

struct VerifyConfig {
  Box domain;
  double delta = 3e-4;
  Eigen::MatrixXd Q;  // empty -> identity
  bool band_outside_basin = false;
  VerifierConfig verifier;
};

struct ContourConfig {
  Box window;
  std::size_t nx = 200;
  std::size_t ny = 200;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  std::string dataset = "dataset.csv";
  std::string model = "model.json";
  std::string candidate = "candidate.json";
  std::string report = "report.json";
  std::string cover = "cover.csv";
  std::string contours = "contours.csv";
  std::string levels = "levels.json";

  std::filesystem::path path(const std::string& name) const { return dir / name; }
};

struct PipelineConfig {
  Json system;      // builtin name, {"linear": A} or {"scalar_linear": a}
  Json dictionary;  // dictionary recipe (see dictionary_from_json)
  SamplingConfig sampling;
  GeneratorConfig generator;
  PdeConfig pde;
  VerifyConfig verify;
  ContourConfig contours;
  OutputConfig output;
  int threads = 1;

  Json raw;  // effective config, source of the hash
  std::string hash() const;
  Provenance provenance() const;
};

// Validates and fills defaults. Missing domains fall back along
// verify -> pde -> sampling.
PipelineConfig parse_config(const Json& j);
PipelineConfig load_config(const std::filesystem::path& path);

OdeSystem make_system(const Json& spec);
Dictionary make_dictionary(const Json& spec);

std::vector<State> initial_conditions(const SamplingConfig& s, int n);

TrajectoryDataset simulate(const PipelineConfig& cfg);

struct LearnResult {
  GeneratorModel generator;
  VectorFieldModel field;
  Eigen::MatrixXd A_hat;
  double alpha = 0.0;           // over the initial conditions, when an oracle exists
  double identity_error = 0.0;  // generator identity residual on the same samples
};

LearnResult learn(const PipelineConfig& cfg, const TrajectoryDataset& ds);
Json learn_result_to_json(const LearnResult& r, const Provenance& prov);
LearnResult learn_result_from_json(const Json& j);

LyapunovCandidate solve(const PipelineConfig& cfg, const LearnResult& model);

CertificationReport certify(const PipelineConfig& cfg, const LyapunovCandidate& V, const LearnResult& model,
                            std::span<const State> samples);

// 0 certified, 2 counterexample / not certified, 3 unknown.
int exit_code(const CertificationReport& r);

// CSV x1,x2,V,VP over the window plus the levels JSON {c, c1, c2}. P may be
// empty, in which case VP is left blank.
void export_contours(const std::filesystem::path& csv, const std::filesystem::path& levels,
                     const LyapunovCandidate& V, const Eigen::MatrixXd& P, double c, double c1, double c2,
                     const ContourConfig& grid, const Provenance& prov);

// Grid-cell counts behind the ROA comparison: points of the window inside
// {V_P <= c}, inside {V <= c2} intersected with the verification domain, and
// quadratic points missing from the certified region.
struct RegionCounts {
  std::size_t quadratic = 0;
  std::size_t certified = 0;
  std::size_t quadratic_outside = 0;
};
RegionCounts region_counts(const LyapunovCandidate& V, const CertificationReport& r, const Box& verify_domain,
                           const ContourConfig& grid);

}  // namespace kz
