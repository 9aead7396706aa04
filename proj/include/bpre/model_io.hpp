// model_io.hpp — JSON model files.
//
// Schema:
// {
//   "states":     ["a", "b", ...],
//   "transition": [[...], ...],            row-stochastic
//   "offspring":  [{"kind": "geometric", "params": {"r": 0.7}},
//                  {"kind": "poisson-truncated", "params": {"mean": 2.0, "cutoff": 40}},
//                  {"kind": "finite-pmf", "params": {"p": [0.2, 0.5, 0.3]}}],
//   "shift_c":    0.25                      optional uniform mean shift e^{-c}
// }
//
// Unknown keys are rejected. shift_c lets a calibrated fixture be stored as
// its base model plus the shift that produced it.

#pragma once

#include <string>

#include "bpre/envmodel.hpp"

#include "json.hpp"

namespace bpre {

struct ModelFile {
    std::vector<std::string> states;
    Matrix transition;
    std::vector<OffspringLaw> offspring;
    double shift_c = 0.0;
    bool has_shift = false;
};

ModelFile model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelFile& file);

ModelFile load_model_file(const std::string& path);
void save_model_file(const ModelFile& file, const std::string& path);

// builds the model, applying shift_c when present
EnvironmentModel instantiate(const ModelFile& file);

// FNV-1a over the raw file bytes; logged so runs can be tied to inputs
std::uint64_t file_hash(const std::string& path);

}  // namespace bpre
