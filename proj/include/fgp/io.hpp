#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fgp/funspace.hpp"
#include "fgp/linalg.hpp"

namespace fgp::io {

using linalg::Matrix;

// All floating-point output is serialized with 17 significant digits so
// files round-trip exactly.
std::string format_double(double value);
double parse_double(const std::string& text, const std::string& context);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

// FNV-1a 64-bit content hash, reported as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::filesystem::path& path);

// Channel CSV: header row of time stamps, one row per scenario.
void write_channel_csv(const std::filesystem::path& path, const std::vector<double>& grid,
                       const Matrix& values);
funspace::ScenarioInputs::Channel read_channel_csv(const std::filesystem::path& path,
                                                   const std::string& channel_id);

// Location CSV: "id,x1,x2" rows; ids are the row indices used elsewhere.
void write_locations_csv(const std::filesystem::path& path, const Matrix& locations);
Matrix read_locations_csv(const std::filesystem::path& path,
                          std::vector<std::int64_t>* ids_out = nullptr);

// Observation CSV, either dense (header "scenario_id,<loc ids...>", one row
// per scenario) or triplet form (header "scenario_id,location_id,value").
// Readers detect the form from the header.
void write_observations_csv(const std::filesystem::path& path, const Matrix& observations,
                            bool dense_form = true);
Matrix read_observations_csv(const std::filesystem::path& path);

struct Triplet {
    std::int64_t scenario = 0;
    std::int64_t location = 0;
    double value = 0.0;
};
std::vector<Triplet> read_observation_triplets(const std::filesystem::path& path);

// Prediction CSV: scenario_id, location_id, x1, x2, mean, sd, clamped.
struct PredictionRow {
    std::int64_t scenario = 0;
    std::int64_t location = 0;
    double x1 = 0.0;
    double x2 = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    int clamped = 0;
};
void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path);

}  // namespace fgp::io
