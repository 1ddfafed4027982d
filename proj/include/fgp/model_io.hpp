#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fgp/gp.hpp"

namespace fgp::model_io {

// Where the training data lives on disk; paths are stored as given and
// resolved against the model file's directory when relative.
struct TrainingReference {
    std::vector<std::string> channel_paths;
    std::vector<std::string> channel_ids;
    std::string locations_path;
    std::string observations_path;
    double noise_variance = 0.0;
};

// Single-document JSON serialization of a fitted model: hyperparameters,
// kernel kinds, PCA bases, training references with content hashes, and fit
// diagnostics. Factors are not stored; load_model recomputes them and
// verifies the stored likelihood to 1e-8.
void save_model(const std::filesystem::path& path, const gp::FittedModel& model,
                const TrainingReference& training);

gp::FittedModel load_model(const std::filesystem::path& path);

}  // namespace fgp::model_io
