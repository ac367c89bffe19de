#include "koopzubov/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "koopzubov/errors.hpp"

namespace kz {

namespace fs = std::filesystem;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const Provenance& p) { return Json{{"config_hash", p.config_hash}, {"seeds", p.seeds}}; }

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const Json& j) {
  auto xs = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Json box_to_json(const Box& b) {
  Json out = Json::array();
  for (const auto& d : b) out.push_back({d.lo(), d.hi()});
  return out;
}

Box box_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("box must be a non-empty list of [lo, hi] pairs");
  std::vector<Interval> dims;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw ConfigError("box entry must be [lo, hi]");
    const double lo = p[0].get<double>(), hi = p[1].get<double>();
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("box entry needs finite lo <= hi");
    dims.emplace_back(lo, hi);
  }
  return Box(std::move(dims));
}

// --- dictionary ---------------------------------------------------------------

Json dictionary_to_json(const Dictionary& d) {
  if (d.kind() == DictionaryKind::Monomial) {
    return Json{{"kind", "monomial"},
                {"n", d.dim()},
                {"J", d.max_degree_j()},
                {"K", d.max_degree_k()},
                {"exponents", d.exponents()}};
  }
  return Json{{"kind", "tanh"},
              {"n", d.dim()},
              {"W", matrix_to_json(d.weights())},
              {"b", vector_to_json(d.biases())},
              {"append_state", d.append_state()},
              {"seed", d.seed()},
              {"weight_scale", d.weight_scale()}};
}

Dictionary dictionary_from_json(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const int n = j.at("n").get<int>();
  if (kind == "monomial") {
    const int J = j.value("J", 0), K = j.value("K", 0);
    if (!j.contains("exponents")) return Dictionary::monomial(n, J, K);
    auto exps = j.at("exponents").get<std::vector<std::vector<int>>>();
    if (J > 0 && K > 0) {
      auto d = Dictionary::monomial(n, J, K);
      if (d.exponents() == exps) return d;
    }
    return Dictionary::from_exponents(n, std::move(exps));
  }
  if (kind == "tanh") {
    // Either the stored weights or a recipe to regenerate them.
    if (j.contains("W")) {
      auto W = matrix_from_json(j.at("W"));
      if (W.cols() != n) throw ConfigError("tanh weights do not match n");
      return Dictionary::tanh_features(std::move(W), vector_from_json(j.at("b")), j.value("append_state", true),
                                       j.value<std::uint64_t>("seed", 0), j.value("weight_scale", 0.0));
    }
    return Dictionary::make_tanh(n, j.at("features").get<int>(), j.value<std::uint64_t>("seed", 0),
                                 j.value("weight_scale", 1.0));
  }
  throw ConfigError("unknown dictionary kind '" + kind + "'");
}

// --- generator / field ----------------------------------------------------------

Json generator_to_json(const GeneratorModel& g) {
  return Json{{"L", matrix_to_json(g.L)},
              {"lambda", g.lambda},
              {"mu", g.mu},
              {"tau_s", g.tau_s},
              {"svd_tol", g.svd_tol},
              {"dictionary", dictionary_to_json(g.dictionary)},
              {"svd",
               {{"rank", g.rank},
                {"truncated", g.truncated},
                {"sigma_max", g.sigma_max},
                {"sigma_min_kept", g.sigma_min_kept},
                {"relative_residual", g.relative_residual}}}};
}

GeneratorModel generator_from_json(const Json& j) {
  GeneratorModel g{.L = matrix_from_json(j.at("L")),
                   .lambda = j.at("lambda").get<double>(),
                   .mu = j.at("mu").get<double>(),
                   .tau_s = j.at("tau_s").get<double>(),
                   .dictionary = dictionary_from_json(j.at("dictionary")),
                   .svd_tol = j.value("svd_tol", 1e-12)};
  if (g.L.rows() != g.dictionary.size() || g.L.cols() != g.dictionary.size())
    throw ConfigError("generator matrix does not match dictionary size");
  if (j.contains("svd")) {
    const auto& s = j["svd"];
    g.rank = s.value("rank", 0);
    g.truncated = s.value("truncated", 0);
    g.sigma_max = s.value("sigma_max", 0.0);
    g.sigma_min_kept = s.value("sigma_min_kept", 0.0);
    g.relative_residual = s.value("relative_residual", 0.0);
  }
  return g;
}

Json vector_field_to_json(const VectorFieldModel& v) {
  return Json{{"coeffs", matrix_to_json(v.coeffs())},
              {"bias", vector_to_json(v.bias())},
              {"offset", vector_to_json(v.offset())},
              {"corrected", v.corrected()}};
}

VectorFieldModel vector_field_from_json(const Json& j, const Dictionary& d) {
  auto coeffs = matrix_from_json(j.at("coeffs"));
  if (coeffs.cols() != d.size()) throw ConfigError("vector field coefficients do not match dictionary size");
  return restore_vector_field(std::move(coeffs), vector_from_json(j.at("bias")), vector_from_json(j.at("offset")),
                              j.at("corrected").get<bool>(), d);
}

// --- candidate ------------------------------------------------------------------

Json candidate_to_json(const LyapunovCandidate& c) {
  const auto& f = c.fit_stats();
  return Json{{"theta", vector_to_json(c.theta())},
              {"dictionary", dictionary_to_json(c.dictionary())},
              {"form", to_string(c.form())},
              {"r", c.r()},
              {"lambda_b", c.lambda_b()},
              {"fit_stats",
               {{"interior_rms", f.interior_rms},
                {"boundary_rms", f.boundary_rms},
                {"rank", f.rank},
                {"sigma_max", f.sigma_max}}}};
}

LyapunovCandidate candidate_from_json(const Json& j) {
  FitStats f;
  if (j.contains("fit_stats")) {
    const auto& s = j["fit_stats"];
    f.interior_rms = s.value("interior_rms", 0.0);
    f.boundary_rms = s.value("boundary_rms", 0.0);
    f.rank = s.value("rank", 0);
    f.sigma_max = s.value("sigma_max", 0.0);
  }
  auto d = dictionary_from_json(j.at("dictionary"));
  auto theta = vector_from_json(j.at("theta"));
  if (theta.size() != d.size()) throw ConfigError("candidate theta does not match dictionary size");
  return LyapunovCandidate(std::move(theta), std::move(d),
                           certificate_form_from_string(j.at("form").get<std::string>()), j.value("r", 0.1),
                           j.value("lambda_b", 0.0), f);
}

// --- report ---------------------------------------------------------------------

Json verdict_to_json(const Verdict& v) {
  Json out{{"check", v.check},
           {"status", to_string(v.status)},
           {"detail", v.detail},
           {"boxes", v.stats.boxes},
           {"max_depth", v.stats.max_depth},
           {"seconds", v.stats.seconds},
           {"cover_boxes", v.cover.size()}};
  if (v.witness) {
    out["witness"] = vector_to_json(*v.witness);
    out["witness_value"] = v.witness_value;
  }
  if (v.unresolved) out["unresolved_box"] = box_to_json(*v.unresolved);
  return out;
}

Json report_to_json(const CertificationReport& r) {
  const auto& b = r.bounds;
  const auto& q = r.quadratic;
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) verdicts.push_back(verdict_to_json(v));
  return Json{{"certified", r.certified},
              {"outcome", r.outcome},
              {"message", r.message},
              {"levels", {{"c", r.c}, {"c1", r.c1}, {"c2", r.c2}}},
              {"bounds",
               {{"K_f", b.K_f},
                {"K_fhat", b.K_fhat},
                {"nu", b.nu},
                {"alpha", b.alpha},
                {"delta", b.delta},
                {"delta_estimate", b.delta_estimate},
                {"beta_required", b.beta_required},
                {"beta_used", b.beta_used}}},
              {"quadratic",
               {{"A_hat", matrix_to_json(r.A_hat)},
                {"P", matrix_to_json(r.P)},
                {"c", q.c},
                {"rho", q.rho},
                {"q0", q.q0},
                {"remainder", q.remainder},
                {"nu_P", q.nu_P},
                {"beta_P_required", q.beta_P_required},
                {"beta_P", q.beta_P}}},
              {"verdicts", verdicts},
              {"audit_passed", r.audit_passed},
              {"band_outside_basin", r.band_outside_basin},
              {"seconds", r.seconds}};
}

// --- files ----------------------------------------------------------------------

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

static void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_json(const fs::path& path, const Json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path dataset_meta_path(const fs::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

void write_dataset(const fs::path& csv, const fs::path& meta, const TrajectoryDataset& ds, const Provenance& prov) {
  ensure_parent(csv);
  std::ofstream out(csv);
  if (!out) throw ConfigError("cannot write " + csv.string());
  const int n = ds.dim();
  out << "traj_id,t";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  out << '\n';
  char buf[32];
  for (std::size_t m = 0; m < ds.trajectories.size(); ++m) {
    const auto& tr = ds.trajectories[m];
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      out << m;
      std::snprintf(buf, sizeof buf, ",%.17g", tr.times[k]);
      out << buf;
      for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g", tr.states[k](i));
        out << buf;
      }
      out << '\n';
    }
  }
  write_json(meta, Json{{"system", ds.system},
                        {"gamma", ds.gamma},
                        {"tau_s", ds.tau_s},
                        {"domain", box_to_json(ds.domain)},
                        {"seed", ds.seed},
                        {"n", n},
                        {"trajectories", ds.trajectories.size()},
                        {"provenance", to_json(prov)}});
}

static double parse_double(std::string_view s, const fs::path& where, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(where.string() + ":" + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

TrajectoryDataset read_dataset(const fs::path& csv, const fs::path& meta) {
  const Json m = read_json(meta);
  TrajectoryDataset ds;
  ds.system = m.value("system", "");
  ds.gamma = m.at("gamma").get<double>();
  ds.tau_s = m.at("tau_s").get<double>();
  ds.domain = box_from_json(m.at("domain"));
  ds.seed = m.value<std::uint64_t>("seed", 0);

  std::ifstream in(csv);
  if (!in) throw ConfigError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("traj_id,t", 0) != 0)
    throw ConfigError(csv.string() + ": expected header traj_id,t,x1,...");
  const auto n = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
  if (n < 1) throw ConfigError(csv.string() + ": no state columns");

  std::map<long, Trajectory> by_id;
  std::size_t lineno = 1;
  std::vector<std::string_view> cols;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    cols.clear();
    std::string_view rest(line);
    for (;;) {
      const auto pos = rest.find(',');
      cols.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (static_cast<int>(cols.size()) != n + 2) throw ConfigError(csv.string() + ":" + std::to_string(lineno) + ": wrong column count");
    const long id = static_cast<long>(parse_double(cols[0], csv, lineno));
    auto& tr = by_id[id];
    State x(n);
    for (int i = 0; i < n; ++i) x(i) = parse_double(cols[i + 2], csv, lineno);
    tr.times.push_back(parse_double(cols[1], csv, lineno));
    tr.states.push_back(std::move(x));
  }
  for (auto& [id, tr] : by_id) {
    if (tr.times.empty() || tr.times.front() != 0.0) throw ConfigError(csv.string() + ": trajectory " + std::to_string(id) + " does not start at t = 0");
    for (std::size_t k = 1; k < tr.times.size(); ++k)
      if (!(tr.times[k] > tr.times[k - 1])) throw ConfigError(csv.string() + ": non-increasing times in trajectory " + std::to_string(id));
    tr.x0 = tr.states.front();
    ds.trajectories.push_back(std::move(tr));
  }
  if (ds.trajectories.empty()) throw ConfigError(csv.string() + ": no trajectories");
  return ds;
}

void write_cover_csv(const fs::path& path, const CertificationReport& r) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  const int n = r.P.rows() ? static_cast<int>(r.P.rows()) : 0;
  out << "check,proved,bound";
  for (int i = 1; i <= n; ++i) out << ",lo" << i << ",hi" << i;
  out << '\n';
  char buf[64];
  auto dump = [&](const Verdict& v) {
    for (const auto& e : v.cover) {
      out << v.check << ',' << (e.proved ? 1 : 0);
      std::snprintf(buf, sizeof buf, ",%.17g", e.bound);
      out << buf;
      for (const auto& d : e.box) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", d.lo(), d.hi());
        out << buf;
      }
      out << '\n';
    }
  };
  dump(r.quadratic.decrease);
  for (const auto& v : r.verdicts) dump(v);
}

}  // namespace kz
