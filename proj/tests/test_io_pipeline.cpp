#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "koopzubov/io.hpp"
#include "koopzubov/pipeline.hpp"

using namespace kz;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("kz_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json small_config() {
  return Json::parse(R"({
    "system": {"linear": [[-1, 0], [0, -2]]},
    "dictionary": {"kind": "monomial", "n": 2, "J": 3, "K": 3},
    "sampling": {"M": 16, "gamma": 50, "tau_s": 5, "seed": 3, "mode": "grid",
                 "domain": [[-1, 1], [-1, 1]]},
    "generator": {"mu": 2.5, "lambda": 1e8},
    "pde": {"interior": 200, "boundary": 20, "domain": [[-1.5, 1.5], [-1.5, 1.5]]},
    "output": {"dir": "unused"}
  })");
}

State s2(double a, double b) {
  State v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(Io, Fnv1aReferenceVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Io, MatrixBoxDictionaryRoundTrip) {
  Eigen::MatrixXd m(2, 3);
  m << 1, -2.5, 1e-300, 0.1, 3, -7;
  EXPECT_EQ(matrix_from_json(matrix_to_json(m)), m);
  const Box b{Interval(-2, 3), Interval(-3, 1.5)};
  EXPECT_EQ(box_from_json(box_to_json(b)), b);
  EXPECT_THROW(box_from_json(Json::parse("[[1, 0]]")), std::exception);

  for (const auto& d : {Dictionary::monomial(2, 8, 8), Dictionary::make_tanh(2, 20, 4, 1.0)}) {
    const auto r = dictionary_from_json(Json::parse(dictionary_to_json(d).dump()));
    EXPECT_EQ(r, d);
  }
  // Recipe form regenerates the same random features.
  const auto recipe = dictionary_from_json(Json::parse(R"({"kind": "tanh", "n": 2, "features": 20, "seed": 4})"));
  EXPECT_EQ(recipe, Dictionary::make_tanh(2, 20, 4, 1.0));
  EXPECT_THROW(dictionary_from_json(Json::parse(R"({"kind": "fourier", "n": 2})")), ConfigError);
}

TEST(Io, ModelAndCandidateRoundTrip) {
  const auto d = Dictionary::make_tanh(2, 8, 2, 1.0);
  GeneratorModel g{.L = Eigen::MatrixXd::Random(d.size(), d.size()), .lambda = 1e8, .mu = 3, .tau_s = 5,
                   .dictionary = d};
  const auto g2 = generator_from_json(Json::parse(generator_to_json(g).dump()));
  EXPECT_EQ(g2.L, g.L);
  EXPECT_EQ(g2.mu, 3.0);
  EXPECT_EQ(g2.dictionary, d);

  const auto v = correct_equilibrium(VectorFieldModel(Eigen::MatrixXd::Random(2, d.size()), d));
  const auto v2 = vector_field_from_json(Json::parse(vector_field_to_json(v).dump()), d);
  const State x = s2(0.3, -0.4);
  EXPECT_EQ(v2.eval(x), v.eval(x));
  EXPECT_EQ(v2.eval(State::Zero(2)), State::Zero(2));
  EXPECT_TRUE(v2.corrected());

  const LyapunovCandidate c(Eigen::VectorXd::Random(d.size()), d, CertificateForm::Zubov, 0.1, 100,
                            FitStats{.interior_rms = 1e-3, .boundary_rms = 2e-3});
  const auto c2 = candidate_from_json(Json::parse(candidate_to_json(c).dump()));
  EXPECT_EQ(c2.theta(), c.theta());
  EXPECT_EQ(c2.form(), CertificateForm::Zubov);
  EXPECT_EQ(c2.value(x), c.value(x));
  EXPECT_EQ(c2.lambda_b(), 100.0);
}

TEST(Io, DatasetCsvRoundTripIsExact) {
  const auto dir = scratch("dataset");
  const Box dom{Interval(-1, 1), Interval(-1, 1)};
  const auto ds = sample_trajectories(two_machine(), sample_uniform(dom, 5, 2), 10, 1, dom);
  const auto csv = dir / "d.csv";
  write_dataset(csv, dataset_meta_path(csv), ds, Provenance{"abc", {{"sampling", 2}}});
  EXPECT_EQ(dataset_meta_path(csv), dir / "d.json");
  const auto back = read_dataset(csv, dataset_meta_path(csv));
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.gamma, ds.gamma);
  EXPECT_EQ(back.tau_s, ds.tau_s);
  for (std::size_t m = 0; m < ds.size(); ++m) {
    ASSERT_EQ(back.trajectories[m].states.size(), ds.trajectories[m].states.size());
    for (std::size_t k = 0; k < ds.trajectories[m].states.size(); ++k) {
      EXPECT_EQ(back.trajectories[m].states[k], ds.trajectories[m].states[k]);
      EXPECT_EQ(back.trajectories[m].times[k], ds.trajectories[m].times[k]);
    }
  }
  EXPECT_EQ(read_json(dataset_meta_path(csv)).at("provenance").at("config_hash"), "abc");
  EXPECT_THROW(read_dataset(dir / "missing.csv", dir / "missing.json"), std::exception);
  fs::remove_all(dir);
}

TEST(Config, ValidationAndDefaults) {
  const auto cfg = parse_config(small_config());
  EXPECT_EQ(cfg.sampling.M, 16u);
  EXPECT_EQ(cfg.sampling.mode, SamplingMode::Grid);
  // Verification domain falls back to the solve domain.
  EXPECT_EQ(cfg.verify.domain, cfg.pde.domain);
  EXPECT_EQ(initial_conditions(cfg.sampling, 2).size(), 16u);

  auto j = small_config();
  j["sampling"]["tau_s"] = 0;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = small_config();
  j["generator"]["lambda"] = 1.0;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = small_config();
  j["sampling"]["mode"] = "sobol";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = small_config();
  j["sampling"]["M"] = 15;
  EXPECT_THROW(initial_conditions(parse_config(j).sampling, 2), ConfigError);

  EXPECT_EQ(make_system(Json("two_machine")).name(), "two_machine");
  EXPECT_EQ(make_system(Json::parse(R"({"scalar_linear": -1})")).dim(), 1);
  EXPECT_THROW(make_system(Json(42)), ConfigError);
}

TEST(Config, HashTracksContentNotKeyOrder) {
  const auto a = parse_config(small_config());
  const auto b = parse_config(Json::parse(small_config().dump()));
  EXPECT_EQ(a.hash(), b.hash());
  auto j = small_config();
  j["sampling"]["seed"] = 4;
  EXPECT_NE(parse_config(j).hash(), a.hash());
  j = small_config();
  j["output"]["dir"] = "elsewhere";
  j["threads"] = 7;
  EXPECT_EQ(parse_config(j).hash(), a.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  const Json p = to_json(a.provenance());
  EXPECT_EQ(p.at("config_hash"), a.hash());
  EXPECT_TRUE(p.at("seeds").contains("sampling"));
}

TEST(Pipeline, StagesOnLinearSystem) {
  const auto cfg = parse_config(small_config());
  const auto ds = simulate(cfg);
  EXPECT_EQ(ds.size(), 16u);
  const auto model = learn(cfg, ds);
  Eigen::Matrix2d A;
  A << -1, 0, 0, -2;
  EXPECT_LE((model.A_hat - A).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LE(model.alpha, 1e-5);

  const auto back = learn_result_from_json(Json::parse(learn_result_to_json(model, cfg.provenance()).dump()));
  EXPECT_EQ(back.generator.L, model.generator.L);
  EXPECT_EQ(back.field.eval(s2(0.2, 0.1)), model.field.eval(s2(0.2, 0.1)));

  // The stage reproduces a direct solve on the same collocation sets.
  const auto V = solve(cfg, model);
  EXPECT_EQ(V.form(), CertificateForm::Zubov);
  const auto interior = sample_uniform(cfg.pde.domain, cfg.pde.interior, cfg.pde.seed);
  const auto boundary = perimeter_boundary(cfg.pde.domain, cfg.pde.boundary, cfg.pde.seed + 1);
  const auto W = zubov_lsq(model.generator, interior, boundary, cfg.pde.options);
  EXPECT_LE((V.theta() - W.theta()).norm(), 1e-12 * W.theta().norm());

  const auto dir = scratch("contours");
  CertificationReport rep;
  rep.P = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  ContourConfig grid{.window = cfg.pde.domain, .nx = 200, .ny = 200};
  export_contours(dir / "c.csv", dir / "l.json", V, rep.P, 0.4, 0.2, 0.7, grid, cfg.provenance());
  std::ifstream in(dir / "c.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("x1,x2,V,VP", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_EQ(rows, 40000u);
  const Json lv = read_json(dir / "l.json");
  EXPECT_EQ(lv.at("c2").get<double>(), 0.7);
  EXPECT_EQ(lv.at("provenance").at("config_hash"), cfg.hash());
  fs::remove_all(dir);
}

#ifdef KZ_CLI_PATH

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(KZ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

// The reference oscillator configuration runs end to end in about a second.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch("cli"));
    status_ = run(std::string("pipeline -c ") + KZ_CONFIG_DIR + "/vdp.json -o " + dir_->string() + " -j 2");
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static fs::path* dir_;
  static int status_;
  static std::string cfg() { return std::string(KZ_CONFIG_DIR) + "/vdp.json"; }
};
fs::path* Cli::dir_ = nullptr;
int Cli::status_ = -1;

TEST_F(Cli, PipelineCertifiesAndEmbedsProvenance) {
  ASSERT_EQ(status_, 0);
  const Json rep = read_json(*dir_ / "report.json");
  EXPECT_EQ(rep.at("outcome"), "certified");
  const std::string hash = rep.at("provenance").at("config_hash");
  for (const char* f : {"model.json", "candidate.json", "levels.json", "dataset.json"})
    EXPECT_EQ(read_json(*dir_ / f).at("provenance").at("config_hash"), hash) << f;
  EXPECT_TRUE(fs::exists(*dir_ / "cover.csv"));
  const Json lv = read_json(*dir_ / "levels.json");
  EXPECT_EQ(lv.at("c2"), rep.at("levels").at("c2"));
}

TEST_F(Cli, NegatedCandidateIsRejectedWithExitTwo) {
  ASSERT_EQ(status_, 0);
  Json cand = read_json(*dir_ / "candidate.json");
  for (auto& t : cand.at("theta")) t = -t.get<double>();
  const auto bad = *dir_ / "negated" / "candidate.json";
  write_json(bad, cand);
  const std::string common = "-c " + cfg() + " -o " + (*dir_ / "negated").string();
  EXPECT_EQ(run("certify " + common + " --model " + (*dir_ / "model.json").string() + " --candidate " +
                bad.string() + " --dataset " + (*dir_ / "dataset.csv").string()),
            2);
  const Json rep = read_json(*dir_ / "negated" / "report.json");
  EXPECT_NE(rep.at("outcome"), "certified");
}

TEST_F(Cli, OperationalErrorsExitOne) {
  EXPECT_EQ(run("certify -c " + cfg() + " -o " + (*dir_ / "none").string() + " --model /nonexistent/model.json"), 1);
  EXPECT_EQ(run("learn -c " + cfg() + " -o " + (*dir_ / "none").string() + " --dataset /nonexistent/d.csv"), 1);
  EXPECT_EQ(run("simulate -c /nonexistent/config.json"), 1);
  EXPECT_EQ(run("frobnicate"), 1);

  Json j = read_json(cfg());
  j["sampling"]["tau_s"] = 0;
  write_json(*dir_ / "zero_tau.json", j);
  EXPECT_EQ(run("simulate -c " + (*dir_ / "zero_tau.json").string() + " -o " + (*dir_ / "none").string()), 1);
}

TEST_F(Cli, LearnIsReproducible) {
  ASSERT_EQ(status_, 0);
  const auto a = *dir_ / "rep_a", b = *dir_ / "rep_b";
  for (const auto& d : {a, b}) {
    ASSERT_EQ(run("simulate -c " + cfg() + " -o " + d.string()), 0);
    ASSERT_EQ(run("learn -c " + cfg() + " -o " + d.string()), 0);
  }
  EXPECT_EQ(slurp(a / "dataset.csv"), slurp(b / "dataset.csv"));
  EXPECT_EQ(slurp(a / "model.json"), slurp(b / "model.json"));
  // Thread count does not change the result.
  EXPECT_EQ(slurp(a / "model.json"), slurp(*dir_ / "model.json"));
}

TEST_F(Cli, ExportContoursFromReport) {
  ASSERT_EQ(status_, 0);
  const auto out = *dir_ / "contours";
  ASSERT_EQ(run("export-contours -c " + cfg() + " -o " + out.string() + " --candidate " +
                (*dir_ / "candidate.json").string() + " --report " + (*dir_ / "report.json").string() +
                " --grid 50 40"),
            0);
  std::ifstream in(out / "contours.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 50u * 40u + 1u);
}

#endif
