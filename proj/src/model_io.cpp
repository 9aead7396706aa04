#include "bpre/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bpre {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw std::invalid_argument("model file: unknown key '" + key + "' in " + where);
    }
}

double get_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number())
        throw std::invalid_argument("model file: missing numeric '" + std::string(key) + "' in " +
                                    where);
    return j[key].get<double>();
}

OffspringLaw offspring_from_json(const json& j, const std::string& state) {
    const std::string where = "offspring entry for state " + state;
    if (!j.is_object() || !j.contains("kind") || !j.contains("params"))
        throw std::invalid_argument("model file: " + where + " needs {kind, params}");
    reject_unknown_keys(j, {"kind", "params"}, where);
    const std::string kind = j["kind"].get<std::string>();
    const json& p = j["params"];
    if (kind == "geometric") {
        reject_unknown_keys(p, {"r"}, where);
        return OffspringLaw::geometric(get_number(p, "r", where));
    }
    if (kind == "poisson-truncated") {
        reject_unknown_keys(p, {"mean", "cutoff"}, where);
        return OffspringLaw::poisson_truncated(get_number(p, "mean", where),
                                               static_cast<int>(get_number(p, "cutoff", where)));
    }
    if (kind == "finite-pmf") {
        reject_unknown_keys(p, {"p"}, where);
        if (!p.contains("p") || !p["p"].is_array())
            throw std::invalid_argument("model file: " + where + " needs a pmf array 'p'");
        return OffspringLaw::finite_pmf(p["p"].get<std::vector<double>>());
    }
    throw std::invalid_argument("model file: unknown offspring kind '" + kind + "' in " + where);
}

json offspring_to_json(const OffspringLaw& law) {
    json j;
    switch (law.kind()) {
        case OffspringKind::geometric:
            j["kind"] = "geometric";
            j["params"] = {{"r", law.param_r()}};
            break;
        case OffspringKind::poisson_truncated:
            j["kind"] = "poisson-truncated";
            j["params"] = {{"mean", law.param_mean()}, {"cutoff", law.param_cutoff()}};
            break;
        case OffspringKind::finite_pmf:
            j["kind"] = "finite-pmf";
            j["params"] = {{"p", law.param_pmf()}};
            break;
    }
    return j;
}

}  // namespace

ModelFile model_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"states", "transition", "offspring", "shift_c"}, "the model document");
    if (!j.contains("states") || !j["states"].is_array())
        throw std::invalid_argument("model file: missing 'states' array");
    ModelFile file;
    file.states = j["states"].get<std::vector<std::string>>();
    const std::size_t d = file.states.size();
    if (d == 0) throw std::invalid_argument("model file: 'states' is empty");

    if (!j.contains("transition") || !j["transition"].is_array() || j["transition"].size() != d)
        throw std::invalid_argument("model file: 'transition' must have one row per state");
    file.transition = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        const auto& row = j["transition"][i];
        if (!row.is_array() || row.size() != d)
            throw std::invalid_argument("model file: transition row " + std::to_string(i) +
                                        " must have " + std::to_string(d) + " entries");
        for (std::size_t k = 0; k < d; ++k) file.transition(i, k) = row[k].get<double>();
    }

    if (!j.contains("offspring") || !j["offspring"].is_array() || j["offspring"].size() != d)
        throw std::invalid_argument(
            "model file: 'offspring' must have one entry per state (missing entries are a parse "
            "error)");
    for (std::size_t i = 0; i < d; ++i)
        file.offspring.push_back(offspring_from_json(j["offspring"][i], file.states[i]));

    if (j.contains("shift_c")) {
        if (!j["shift_c"].is_number())
            throw std::invalid_argument("model file: 'shift_c' must be a number");
        file.shift_c = j["shift_c"].get<double>();
        file.has_shift = true;
    }
    return file;
}

nlohmann::json model_to_json(const ModelFile& file) {
    json j;
    j["states"] = file.states;
    json rows = json::array();
    for (std::size_t i = 0; i < file.transition.rows(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < file.transition.cols(); ++k) row.push_back(file.transition(i, k));
        rows.push_back(row);
    }
    j["transition"] = rows;
    json laws = json::array();
    for (const auto& law : file.offspring) laws.push_back(offspring_to_json(law));
    j["offspring"] = laws;
    if (file.has_shift) j["shift_c"] = file.shift_c;
    return j;
}

ModelFile load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("model file " + path + ": " + e.what());
    }
    return model_from_json(j);
}

void save_model_file(const ModelFile& file, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << model_to_json(file).dump(2) << "\n";
}

EnvironmentModel instantiate(const ModelFile& file) {
    EnvironmentModel model =
        EnvironmentModel::make(file.states, file.transition, file.offspring);
    if (file.has_shift && file.shift_c != 0.0) model = shift_means(model, file.shift_c);
    return model;
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace bpre
