#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "koopzubov/certificates.hpp"
#include "koopzubov/dictionary.hpp"
#include "koopzubov/dynamics.hpp"
#include "koopzubov/koopman.hpp"
#include "koopzubov/verify.hpp"

namespace kz {

using Json = nlohmann::json;

// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

// Stamped into every file written by the pipeline so outputs can be traced
// back to the exact config and seeds that produced them.
struct Provenance {
  std::string config_hash;
  Json seeds = Json::object();
};

Json to_json(const Provenance& p);

// --- primitive conversions --------------------------------------------------

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);
Json box_to_json(const Box& b);
Box box_from_json(const Json& j);

// --- model objects ----------------------------------------------------------

Json dictionary_to_json(const Dictionary& d);
Dictionary dictionary_from_json(const Json& j);

Json generator_to_json(const GeneratorModel& g);
GeneratorModel generator_from_json(const Json& j);

// Dictionary is stored alongside; pass it in to share data with the generator.
Json vector_field_to_json(const VectorFieldModel& v);
VectorFieldModel vector_field_from_json(const Json& j, const Dictionary& d);

Json candidate_to_json(const LyapunovCandidate& c);
LyapunovCandidate candidate_from_json(const Json& j);

Json verdict_to_json(const Verdict& v);
Json report_to_json(const CertificationReport& r);

// --- files ------------------------------------------------------------------

Json read_json(const std::filesystem::path& path);
// Pretty-printed, trailing newline. Parent directories are created.
void write_json(const std::filesystem::path& path, const Json& j);

// CSV with header traj_id,t,x1,...,xn plus a JSON sidecar holding
// {gamma, tau_s, domain, seed, system}.
void write_dataset(const std::filesystem::path& csv, const std::filesystem::path& meta, const TrajectoryDataset& ds,
                   const Provenance& prov);
TrajectoryDataset read_dataset(const std::filesystem::path& csv, const std::filesystem::path& meta);

// Sidecar path used when only the CSV is named: data.csv -> data.json.
std::filesystem::path dataset_meta_path(const std::filesystem::path& csv);

// One row per cover box: check,proved,bound,lo1,hi1,...
void write_cover_csv(const std::filesystem::path& path, const CertificationReport& r);

}  // namespace kz
