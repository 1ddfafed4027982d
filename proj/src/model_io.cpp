#include "fgp/model_io.hpp"

#include <cmath>

#include <json.hpp>

#include "fgp/io.hpp"

namespace fgp::model_io {

using nlohmann::json;

namespace {

json basis_to_json(const funspace::PcaBasis& basis) {
    json rows = json::array();
    for (std::size_t t = 0; t < basis.basis.rows(); ++t) {
        json row = json::array();
        for (std::size_t j = 0; j < basis.basis.cols(); ++j) row.push_back(basis.basis(t, j));
        rows.push_back(std::move(row));
    }
    return json{{"channel_id", basis.channel_id},
                {"mean_curve", basis.mean_curve},
                {"eigenvalues", basis.eigenvalues},
                {"total_variance", basis.total_variance},
                {"inertia_target", basis.inertia_target},
                {"basis", std::move(rows)}};
}

funspace::PcaBasis basis_from_json(const json& j) {
    funspace::PcaBasis basis;
    basis.channel_id = j.at("channel_id").get<std::string>();
    basis.mean_curve = j.at("mean_curve").get<std::vector<double>>();
    basis.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    basis.total_variance = j.at("total_variance").get<double>();
    basis.inertia_target = j.at("inertia_target").get<double>();
    const json& rows = j.at("basis");
    const std::size_t tau = rows.size();
    const std::size_t p = basis.eigenvalues.size();
    basis.basis = linalg::Matrix(tau, p);
    for (std::size_t t = 0; t < tau; ++t) {
        if (rows[t].size() != p) throw data_error("model: basis row length mismatch");
        for (std::size_t k = 0; k < p; ++k) basis.basis(t, k) = rows[t][k].get<double>();
    }
    if (basis.mean_curve.size() != tau) throw data_error("model: basis mean length mismatch");
    return basis;
}

json file_ref(const std::filesystem::path& base, const std::string& path) {
    const std::filesystem::path as_path(path);
    const std::filesystem::path resolved = as_path.is_absolute() ? as_path : base / as_path;
    return json{{"path", path}, {"hash", io::hash_file(resolved)}};
}

std::filesystem::path resolve(const std::filesystem::path& base, const json& ref) {
    const std::string p = ref.at("path").get<std::string>();
    const std::filesystem::path resolved =
        std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p;
    const std::string hash = io::hash_file(resolved);
    if (hash != ref.at("hash").get<std::string>())
        throw data_error("model: content hash mismatch for '" + resolved.string() + "'");
    return resolved;
}

}  // namespace

void save_model(const std::filesystem::path& path, const gp::FittedModel& model,
                const TrainingReference& training) {
    const std::filesystem::path base =
        path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    json doc;
    doc["format"] = "fgp-model";
    doc["version"] = 1;
    doc["path_kind"] = model.path == gp::ModelPath::Kronecker ? "kronecker" : "dense";

    const gp::Hyperparameters& hyp = model.hyperparameters;
    doc["hyperparameters"] = {
        {"functional_kind", kernels::to_string(hyp.functional_kind)},
        {"spatial_kind", kernels::to_string(hyp.spatial_kind)},
        {"functional_lengthscales", hyp.functional_lengthscales},
        {"spatial_lengthscales", {hyp.spatial_lengthscales[0], hyp.spatial_lengthscales[1]}},
        {"spatial_variance", hyp.spatial_variance}};

    json bases = json::array();
    for (const funspace::PcaBasis& b : model.projected_inputs().bases)
        bases.push_back(basis_to_json(b));
    doc["pca_bases"] = std::move(bases);

    json channels = json::array();
    for (std::size_t c = 0; c < training.channel_paths.size(); ++c) {
        json ref = file_ref(base, training.channel_paths[c]);
        ref["channel_id"] =
            c < training.channel_ids.size() ? training.channel_ids[c] : ("ch" + std::to_string(c));
        channels.push_back(std::move(ref));
    }
    doc["training"] = {{"channels", std::move(channels)},
                       {"locations", file_ref(base, training.locations_path)},
                       {"observations", file_ref(base, training.observations_path)},
                       {"noise_variance", training.noise_variance}};

    json restart_table = json::array();
    for (const gp::RestartRecord& r : model.diagnostics.restart_table)
        restart_table.push_back({{"log_likelihood", r.log_likelihood},
                                 {"evaluations", r.evaluations},
                                 {"converged", r.converged},
                                 {"failed", r.failed}});
    doc["diagnostics"] = {{"log_likelihood", model.diagnostics.log_likelihood},
                          {"evaluations", model.diagnostics.evaluations},
                          {"restarts", model.diagnostics.restarts_run},
                          {"converged", model.diagnostics.converged},
                          {"restart_table", std::move(restart_table)}};
    doc["stored_log_likelihood"] = model.diagnostics.log_likelihood;

    io::write_file(path, doc.dump(2) + "\n");
}

gp::FittedModel load_model(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw io_error("model '" + path.string() + "': " + e.what());
    }
    if (doc.value("format", "") != "fgp-model")
        throw data_error("model '" + path.string() + "': not a model document");
    const std::filesystem::path base =
        path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    gp::Hyperparameters hyp;
    const json& h = doc.at("hyperparameters");
    hyp.functional_kind = kernels::kernel_kind_from_string(h.at("functional_kind"));
    hyp.spatial_kind = kernels::kernel_kind_from_string(h.at("spatial_kind"));
    hyp.functional_lengthscales = h.at("functional_lengthscales").get<std::vector<double>>();
    hyp.spatial_lengthscales = {h.at("spatial_lengthscales")[0].get<double>(),
                                h.at("spatial_lengthscales")[1].get<double>()};
    hyp.spatial_variance = h.at("spatial_variance").get<double>();

    funspace::ProjectedInputs projected;
    for (const json& jb : doc.at("pca_bases")) projected.bases.push_back(basis_from_json(jb));

    const json& training = doc.at("training");
    funspace::ScenarioInputs inputs;
    std::size_t c = 0;
    for (const json& ref : training.at("channels")) {
        const std::filesystem::path channel_path = resolve(base, ref);
        inputs.channels.push_back(
            io::read_channel_csv(channel_path, ref.value("channel_id", "ch" + std::to_string(c))));
        ++c;
    }
    inputs.validate();
    if (inputs.channel_count() != projected.bases.size())
        throw data_error("model: channel count differs from stored bases");

    const std::size_t r = inputs.scenario_count();
    for (std::size_t ch = 0; ch < inputs.channel_count(); ++ch) {
        const funspace::PcaBasis& basis = projected.bases[ch];
        linalg::Matrix coeffs(r, basis.component_count());
        for (std::size_t i = 0; i < r; ++i) {
            const std::vector<double> a =
                funspace::project(basis, inputs.channels[ch].values.row(i));
            std::copy(a.begin(), a.end(), coeffs.row(i).begin());
        }
        projected.coefficients.push_back(std::move(coeffs));
    }

    linalg::Matrix locations = io::read_locations_csv(resolve(base, training.at("locations")));
    const std::filesystem::path obs_path = resolve(base, training.at("observations"));

    const std::string path_kind = doc.at("path_kind").get<std::string>();
    gp::FittedModel model;
    if (path_kind == "kronecker") {
        gp::TensorTrainingSet set;
        set.inputs = std::move(projected);
        set.locations = std::move(locations);
        set.observations = io::read_observations_csv(obs_path);
        model = gp::condition(set, hyp);
    } else {
        // triplet observations need not cover the scenario x location grid
        gp::DenseTrainingSet set;
        set.inputs = std::move(projected);
        set.noise_variance = training.value("noise_variance", 0.0);
        for (const io::Triplet& t : io::read_observation_triplets(obs_path)) {
            const auto loc = static_cast<std::size_t>(t.location);
            if (loc >= locations.rows())
                throw data_error("model: triplet location index out of range");
            set.points.push_back({static_cast<std::size_t>(t.scenario),
                                  {locations(loc, 0), locations(loc, 1)},
                                  t.value});
        }
        model = gp::condition(set, hyp);
    }

    const double stored = doc.at("stored_log_likelihood").get<double>();
    const double recomputed = model.diagnostics.log_likelihood;
    if (std::abs(recomputed - stored) > 1e-8 * std::max(1.0, std::abs(stored)))
        throw numeric_error("model: recomputed likelihood deviates from the stored value");

    const json& d = doc.at("diagnostics");
    model.diagnostics.evaluations = d.value("evaluations", 0L);
    model.diagnostics.restarts_run = d.value("restarts", 0);
    model.diagnostics.converged = d.value("converged", false);
    return model;
}

}  // namespace fgp::model_io
