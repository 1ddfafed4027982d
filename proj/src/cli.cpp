#include "fgp/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "fgp/design.hpp"
#include "fgp/eval.hpp"
#include "fgp/gp.hpp"
#include "fgp/io.hpp"
#include "fgp/model_io.hpp"
#include "fgp/synth.hpp"

namespace fgp::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path out_dir_of(const json& config) {
    if (!config.contains("out_dir") || !config.at("out_dir").is_string())
        throw parameter_error("config: 'out_dir' is required");
    fs::path dir = config.at("out_dir").get<std::string>();
    fs::create_directories(dir);
    return dir;
}

void apply_default(json& config, const std::string& key, const json& value) {
    if (!config.contains(key)) config[key] = value;
}

// Written next to every subcommand's outputs: the resolved configuration and
// a manifest listing seed, input hashes and output hashes. Volatile fields
// (timestamps) live only in the manifest.
void write_run_records(const fs::path& dir, const std::string& command, const json& resolved,
                       const std::map<std::string, std::string>& input_hashes,
                       const std::vector<fs::path>& outputs, double wall_time_s) {
    io::write_file(dir / "resolved_config.json", resolved.dump(2) + "\n");

    json manifest;
    manifest["command"] = command;
    manifest["seed"] = resolved.value("seed", json());
    manifest["inputs"] = json::object();
    for (const auto& [path, hash] : input_hashes) manifest["inputs"][path] = hash;
    manifest["outputs"] = json::object();
    for (const fs::path& p : outputs) manifest["outputs"][p.filename().string()] = io::hash_file(p);
    manifest["outputs"]["resolved_config.json"] = io::hash_file(dir / "resolved_config.json");
    manifest["wall_time_s"] = wall_time_s;
    manifest["created_unix"] = static_cast<std::int64_t>(std::time(nullptr));
    io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

kernels::KernelKind kind_field(const json& j, const std::string& key,
                               const std::string& fallback) {
    return kernels::kernel_kind_from_string(j.value(key, fallback));
}

gp::OptimizerConfig optimizer_config(const json& config) {
    gp::OptimizerConfig opt;
    if (config.contains("optimizer")) {
        const json& o = config.at("optimizer");
        opt.max_evaluations = o.value("max_evaluations", opt.max_evaluations);
        opt.restarts = o.value("restarts", opt.restarts);
        opt.seed = o.value("seed", opt.seed);
        opt.tolerance = o.value("tolerance", opt.tolerance);
        opt.restart_jitter_sd = o.value("restart_jitter_sd", opt.restart_jitter_sd);
    }
    return opt;
}

json optimizer_json(const gp::OptimizerConfig& opt) {
    return json{{"max_evaluations", opt.max_evaluations},
                {"restarts", opt.restarts},
                {"seed", opt.seed},
                {"tolerance", opt.tolerance},
                {"restart_jitter_sd", opt.restart_jitter_sd}};
}

struct LoadedData {
    funspace::ScenarioInputs inputs;
    linalg::Matrix locations;
    std::vector<std::string> channel_paths;
    std::vector<std::string> channel_ids;
    std::string locations_path;
    std::string observations_path;
    std::map<std::string, std::string> hashes;
};

LoadedData load_inputs_and_locations(const json& config) {
    LoadedData data;
    if (!config.contains("inputs") || !config.at("inputs").is_array() ||
        config.at("inputs").empty())
        throw parameter_error("config: 'inputs' must list at least one channel CSV");
    std::size_t c = 0;
    for (const json& entry : config.at("inputs")) {
        const std::string path = entry.get<std::string>();
        std::string id = "ch" + std::to_string(c);
        if (config.contains("channel_ids") && c < config.at("channel_ids").size())
            id = config.at("channel_ids")[c].get<std::string>();
        data.inputs.channels.push_back(io::read_channel_csv(path, id));
        data.channel_paths.push_back(path);
        data.channel_ids.push_back(id);
        data.hashes[path] = io::hash_file(path);
        ++c;
    }
    data.inputs.validate();

    data.locations_path = config.value("locations", "");
    if (data.locations_path.empty()) throw parameter_error("config: 'locations' is required");
    data.locations = io::read_locations_csv(data.locations_path);
    data.hashes[data.locations_path] = io::hash_file(data.locations_path);

    data.observations_path = config.value("observations", "");
    return data;
}

// Tensor set when the observation file covers the full scenario x location
// grid, dense tuples otherwise.
struct LoadedTraining {
    bool tensor = true;
    gp::TensorTrainingSet tensor_set;
    gp::DenseTrainingSet dense_set;
};

LoadedTraining load_training(const json& config, LoadedData& data, double inertia) {
    if (data.observations_path.empty())
        throw parameter_error("config: 'observations' is required");
    data.hashes[data.observations_path] = io::hash_file(data.observations_path);

    funspace::ProjectedInputs projected = funspace::project_scenarios(data.inputs, inertia);
    const std::string forced = config.value("path", "auto");

    LoadedTraining out;
    bool full_grid = true;
    linalg::Matrix observations;
    std::vector<io::Triplet> triplets;
    try {
        observations = io::read_observations_csv(data.observations_path);
    } catch (const io_error&) {
        full_grid = false;
        triplets = io::read_observation_triplets(data.observations_path);
    }
    if (full_grid && (observations.rows() != data.inputs.scenario_count() ||
                      observations.cols() != data.locations.rows()))
        throw shape_error("observations shape does not match inputs x locations");

    if (full_grid && forced != "dense") {
        out.tensor = true;
        out.tensor_set.inputs = std::move(projected);
        out.tensor_set.locations = data.locations;
        out.tensor_set.observations = std::move(observations);
        out.tensor_set.validate();
        return out;
    }

    out.tensor = false;
    out.dense_set.inputs = std::move(projected);
    out.dense_set.noise_variance = config.value("noise_variance", 0.0);
    if (full_grid) {
        for (std::size_t i = 0; i < observations.rows(); ++i)
            for (std::size_t j = 0; j < observations.cols(); ++j)
                out.dense_set.points.push_back(
                    {i, {data.locations(j, 0), data.locations(j, 1)}, observations(i, j)});
    } else {
        for (const io::Triplet& t : triplets) {
            const auto loc = static_cast<std::size_t>(t.location);
            if (loc >= data.locations.rows())
                throw data_error("observations: location index out of range");
            if (static_cast<std::size_t>(t.scenario) >= data.inputs.scenario_count())
                throw data_error("observations: scenario index out of range");
            out.dense_set.points.push_back({static_cast<std::size_t>(t.scenario),
                                            {data.locations(loc, 0), data.locations(loc, 1)},
                                            t.value});
        }
    }
    out.dense_set.validate();
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void cmd_synth(json config) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = out_dir_of(config);

    const std::string preset = config.value("preset", "");
    synth::SynthConfig base;
    if (preset == "multioutput") {
        base.channels = 8;
        base.scenarios = 20;
        base.time_points = 37;
        base.centered = false;
    } else if (preset == "forecast") {
        base.channels = 8;
        base.scenarios = 1001;
        base.time_points = 37;
        base.centered = true;
        base.sigma2_obs = 4e-2;
    } else if (!preset.empty()) {
        throw parameter_error("synth: unknown preset '" + preset + "'");
    }

    synth::SynthConfig cfg = base;
    cfg.channels = config.value("channels", base.channels);
    cfg.scenarios = config.value("scenarios", base.scenarios);
    cfg.time_points = config.value("time_points", base.time_points);
    cfg.centered = config.value("centered", base.centered);
    cfg.sigma2_obs = config.value("sigma2_obs", base.sigma2_obs);
    cfg.ell_obs = config.value("ell_obs", base.ell_obs);
    if (config.contains("sigma2_mean"))
        cfg.sigma2_mean = config.at("sigma2_mean").get<std::vector<double>>();
    if (config.contains("ell_mean")) cfg.ell_mean = config.at("ell_mean").get<std::vector<double>>();
    if (config.contains("spatial")) {
        const json& s = config.at("spatial");
        cfg.map_spatial.kind = kind_field(s, "kind", "matern52");
        cfg.map_spatial.lengthscale_x1 = s.value("ell_x1", cfg.map_spatial.lengthscale_x1);
        cfg.map_spatial.lengthscale_x2 = s.value("ell_x2", cfg.map_spatial.lengthscale_x2);
        cfg.map_spatial.variance = s.value("variance", cfg.map_spatial.variance);
    }
    if (config.contains("functional")) {
        const json& f = config.at("functional");
        cfg.map_functional_kind = kind_field(f, "kind", "matern52");
        if (f.contains("lengthscales"))
            cfg.map_functional_lengthscales = f.at("lengthscales").get<std::vector<double>>();
    }
    cfg.inertia_target = config.value("inertia", 0.999);
    cfg.seed = config.value("seed", 0);
    cfg.fill_defaults();

    json layout = config.value("layout", json{{"type", "grid"}, {"nx", 10}, {"ny", 10}});
    linalg::Matrix locations;
    const std::string layout_type = layout.value("type", "grid");
    if (layout_type == "grid") {
        locations = synth::unit_grid(layout.value("nx", 10), layout.value("ny", 10));
    } else if (layout_type == "lhd") {
        locations = design::maximin_lhd(layout.value("n", 35), 2, layout.value("restarts", 20),
                                        cfg.seed ^ 0x6c6179ULL);
    } else {
        throw parameter_error("synth: unknown layout '" + layout_type + "'");
    }

    funspace::ScenarioInputs inputs = synth::gen_inputs(cfg);
    linalg::Matrix maps = synth::gen_maps(inputs, locations, cfg, cfg.seed ^ 0x59ULL);

    const json transform = config.value("map_transform", json{{"type", "none"}});
    if (transform.value("type", "none") == "relu") {
        const double offset = transform.value("offset", 0.0);
        for (std::size_t i = 0; i < maps.size(); ++i)
            maps.data()[i] = std::max(0.0, maps.data()[i] - offset);
    }

    std::vector<fs::path> outputs;
    for (std::size_t c = 0; c < cfg.channels; ++c) {
        const fs::path p = dir / ("input_ch" + std::to_string(c) + ".csv");
        io::write_channel_csv(p, inputs.channels[c].grid, inputs.channels[c].values);
        outputs.push_back(p);
    }
    io::write_locations_csv(dir / "locations.csv", locations);
    outputs.push_back(dir / "locations.csv");
    io::write_observations_csv(dir / "observations.csv", maps, true);
    outputs.push_back(dir / "observations.csv");

    json resolved = config;
    resolved["preset"] = preset;
    resolved["channels"] = cfg.channels;
    resolved["scenarios"] = cfg.scenarios;
    resolved["time_points"] = cfg.time_points;
    resolved["centered"] = cfg.centered;
    resolved["sigma2_obs"] = cfg.sigma2_obs;
    resolved["ell_obs"] = cfg.ell_obs;
    resolved["sigma2_mean"] = cfg.sigma2_mean;
    resolved["ell_mean"] = cfg.ell_mean;
    resolved["spatial"] = {{"kind", kernels::to_string(cfg.map_spatial.kind)},
                           {"ell_x1", cfg.map_spatial.lengthscale_x1},
                           {"ell_x2", cfg.map_spatial.lengthscale_x2},
                           {"variance", cfg.map_spatial.variance}};
    resolved["functional"] = {{"kind", kernels::to_string(cfg.map_functional_kind)},
                              {"lengthscales", cfg.map_functional_lengthscales}};
    resolved["inertia"] = cfg.inertia_target;
    resolved["seed"] = cfg.seed;
    resolved["layout"] = layout;
    resolved["map_transform"] = transform;
    write_run_records(dir, "synth", resolved, {}, outputs, elapsed_seconds(start));
}

void cmd_fit(json config) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = out_dir_of(config);
    apply_default(config, "inertia", 0.999);
    apply_default(config, "functional_kind", "matern52");
    apply_default(config, "spatial_kind", "matern52");
    apply_default(config, "path", "auto");
    apply_default(config, "noise_variance", 0.0);

    LoadedData data = load_inputs_and_locations(config);
    LoadedTraining training = load_training(config, data, config.at("inertia").get<double>());

    const kernels::KernelKind fkind = kind_field(config, "functional_kind", "matern52");
    const kernels::KernelKind skind = kind_field(config, "spatial_kind", "matern52");
    const gp::OptimizerConfig opt = optimizer_config(config);

    gp::FittedModel model =
        training.tensor
            ? gp::fit_ml(training.tensor_set, gp::default_init(training.tensor_set, fkind, skind),
                         opt)
            : gp::fit_ml(training.dense_set, gp::default_init(training.dense_set, fkind, skind),
                         opt);

    // stored paths must stay valid wherever the model file lives
    const auto absolutize = [](const std::string& p) {
        return fs::absolute(p).lexically_normal().string();
    };
    model_io::TrainingReference ref;
    for (const std::string& p : data.channel_paths) ref.channel_paths.push_back(absolutize(p));
    ref.channel_ids = data.channel_ids;
    ref.locations_path = absolutize(data.locations_path);
    ref.observations_path = absolutize(data.observations_path);
    ref.noise_variance = config.at("noise_variance").get<double>();
    model_io::save_model(dir / "model.json", model, ref);

    json report;
    report["path_kind"] = model.path == gp::ModelPath::Kronecker ? "kronecker" : "dense";
    report["log_likelihood"] = model.diagnostics.log_likelihood;
    report["evaluations"] = model.diagnostics.evaluations;
    report["converged"] = model.diagnostics.converged;
    report["hyperparameters"] = {
        {"functional_lengthscales", model.hyperparameters.functional_lengthscales},
        {"spatial_lengthscales",
         {model.hyperparameters.spatial_lengthscales[0],
          model.hyperparameters.spatial_lengthscales[1]}},
        {"spatial_variance", model.hyperparameters.spatial_variance}};
    json table = json::array();
    for (const gp::RestartRecord& r : model.diagnostics.restart_table)
        table.push_back({{"log_likelihood", r.log_likelihood},
                         {"evaluations", r.evaluations},
                         {"converged", r.converged},
                         {"failed", r.failed}});
    report["restart_table"] = table;
    report["wall_time_s"] = elapsed_seconds(start);
    io::write_file(dir / "fit_report.json", report.dump(2) + "\n");

    json resolved = config;
    resolved["optimizer"] = optimizer_json(opt);
    resolved["seed"] = opt.seed;
    write_run_records(dir, "fit", resolved, data.hashes, {dir / "model.json"},
                      elapsed_seconds(start));
}

void cmd_predict(json config) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = out_dir_of(config);
    apply_default(config, "clamp", true);
    apply_default(config, "compute_variance", true);

    const std::string model_path = config.value("model", "");
    if (model_path.empty()) throw parameter_error("config: 'model' is required");
    gp::FittedModel model = model_io::load_model(model_path);

    std::map<std::string, std::string> hashes;
    hashes[model_path] = io::hash_file(model_path);

    funspace::ScenarioInputs queries;
    if (!config.contains("inputs") || config.at("inputs").empty())
        throw parameter_error("config: 'inputs' must list the query channel CSVs");
    std::size_t c = 0;
    for (const json& entry : config.at("inputs")) {
        const std::string path = entry.get<std::string>();
        queries.channels.push_back(io::read_channel_csv(path, "ch" + std::to_string(c)));
        hashes[path] = io::hash_file(path);
        ++c;
    }
    queries.validate();
    if (queries.channel_count() != model.projected_inputs().channel_count())
        throw data_error("predict: query channel count does not match the model");

    linalg::Matrix locations;
    if (config.contains("locations") && config.at("locations").is_string()) {
        const std::string lpath = config.at("locations").get<std::string>();
        locations = io::read_locations_csv(lpath);
        hashes[lpath] = io::hash_file(lpath);
    } else if (model.path == gp::ModelPath::Kronecker) {
        locations = model.tensor.locations;
    } else {
        throw parameter_error("predict: 'locations' is required for dense-path models");
    }

    gp::PredictOptions popts;
    popts.clamp_negative = config.at("clamp").get<bool>();
    popts.compute_variance = config.at("compute_variance").get<bool>();

    std::vector<io::PredictionRow> rows;
    for (std::size_t r = 0; r < queries.scenario_count(); ++r) {
        std::vector<std::vector<double>> curves(queries.channel_count());
        for (std::size_t ch = 0; ch < queries.channel_count(); ++ch) {
            auto row = queries.channels[ch].values.row(r);
            curves[ch].assign(row.begin(), row.end());
        }
        const gp::MapPrediction pred = gp::forecast_map(model, curves, locations, popts);
        for (std::size_t j = 0; j < locations.rows(); ++j) {
            io::PredictionRow out;
            out.scenario = static_cast<std::int64_t>(r);
            out.location = static_cast<std::int64_t>(j);
            out.x1 = locations(j, 0);
            out.x2 = locations(j, 1);
            out.mean = pred.mean[j];
            out.sd = std::sqrt(std::max(0.0, pred.variance[j]));
            out.clamped = pred.clamped[j];
            rows.push_back(out);
        }
    }
    io::write_predictions_csv(dir / "predictions.csv", rows);

    json resolved = config;
    write_run_records(dir, "predict", resolved, hashes, {dir / "predictions.csv"},
                      elapsed_seconds(start));
}

void cmd_loo(json config) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = out_dir_of(config);
    apply_default(config, "inertia", 0.999);
    apply_default(config, "functional_kind", "matern52");
    apply_default(config, "spatial_kind", "matern52");
    apply_default(config, "reuse_hyperparameters", false);
    apply_default(config, "ca_multiplier", 2.0);
    apply_default(config, "clamp", true);
    apply_default(config, "wet_threshold", 0.0);
    apply_default(config, "workers", 1);

    LoadedData data = load_inputs_and_locations(config);
    LoadedTraining training = load_training(config, data, config.at("inertia").get<double>());
    if (!training.tensor)
        throw data_error("loo: needs tensor-structured observations (full grid)");

    gp::LooConfig loo_cfg;
    loo_cfg.optimizer = optimizer_config(config);
    loo_cfg.reuse_hyperparameters = config.at("reuse_hyperparameters").get<bool>();
    loo_cfg.ca_multiplier = config.at("ca_multiplier").get<double>();
    loo_cfg.clamp_negative = config.at("clamp").get<bool>();
    loo_cfg.wet_threshold = config.at("wet_threshold").get<double>();
    loo_cfg.workers = config.at("workers").get<int>();

    const gp::LooResult result = gp::loo(training.tensor_set, loo_cfg);

    std::ostringstream folds;
    folds << "fold,rmse,q2,q2_pooled,ca,fit_failed\n";
    for (const gp::LooFold& f : result.folds) {
        folds << f.fold << ',' << io::format_double(f.rmse) << ','
              << (std::isfinite(f.q2) ? io::format_double(f.q2) : "nan") << ','
              << io::format_double(f.q2_pooled) << ',' << io::format_double(f.ca) << ','
              << (f.fit_failed ? 1 : 0) << '\n';
    }
    io::write_file(dir / "loo_folds.csv", folds.str());

    json summary;
    summary["folds"] = result.folds.size();
    summary["fits_run"] = result.fits_run;
    summary["pooled_variance"] = result.pooled_variance;
    summary["pooled_location_count"] = result.pooled_location_count;
    summary["median_rmse"] = result.median_rmse;
    summary["median_q2"] = result.median_q2;
    summary["median_q2_pooled"] = result.median_q2_pooled;
    summary["median_ca"] = result.median_ca;
    io::write_file(dir / "loo_summary.json", summary.dump(2) + "\n");

    json resolved = config;
    resolved["optimizer"] = optimizer_json(loo_cfg.optimizer);
    resolved["seed"] = loo_cfg.optimizer.seed;
    write_run_records(dir, "loo", resolved, data.hashes,
                      {dir / "loo_folds.csv", dir / "loo_summary.json"}, elapsed_seconds(start));
}

void cmd_doe(json config) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = out_dir_of(config);
    apply_default(config, "wet_threshold", 0.0);
    apply_default(config, "efp_split", 0.4);
    apply_default(config, "seed", 0);
    apply_default(config, "mandatory", json::array());

    const std::string loc_path = config.value("locations", "");
    const std::string obs_path = config.value("observations", "");
    if (loc_path.empty() || obs_path.empty())
        throw parameter_error("config: 'locations' and 'observations' are required");
    linalg::Matrix locations = io::read_locations_csv(loc_path);
    linalg::Matrix observations = io::read_observations_csv(obs_path);
    if (observations.cols() != locations.rows())
        throw shape_error("doe: observation columns != location count");

    std::map<std::string, std::string> hashes;
    hashes[loc_path] = io::hash_file(loc_path);
    hashes[obs_path] = io::hash_file(obs_path);

    const std::vector<double> efp =
        design::compute_efp(observations, config.at("wet_threshold").get<double>());

    std::vector<std::size_t> mandatory;
    for (const json& m : config.at("mandatory"))
        mandatory.push_back(m.get<std::size_t>());

    const design::DoeResult doe = design::select_doe(
        locations, efp, config.value("kappa1", 0), config.value("kappa2", 0),
        config.at("efp_split").get<double>(), mandatory, config.at("seed").get<std::uint64_t>());

    std::ostringstream efp_csv;
    efp_csv << "location_id,efp\n";
    for (std::size_t j = 0; j < efp.size(); ++j)
        efp_csv << j << ',' << io::format_double(efp[j]) << '\n';
    io::write_file(dir / "efp.csv", efp_csv.str());

    std::ostringstream doe_csv;
    doe_csv << "rank,location_id,x1,x2,efp,class,mandatory\n";
    for (std::size_t i = 0; i < doe.selected.size(); ++i) {
        const std::size_t idx = doe.selected[i];
        const bool is_mandatory =
            std::find(doe.mandatory.begin(), doe.mandatory.end(), idx) != doe.mandatory.end();
        doe_csv << i << ',' << idx << ',' << io::format_double(locations(idx, 0)) << ','
                << io::format_double(locations(idx, 1)) << ',' << io::format_double(efp[idx])
                << ',' << doe.class_labels[i] << ',' << (is_mandatory ? 1 : 0) << '\n';
    }
    io::write_file(dir / "doe.csv", doe_csv.str());

    json resolved = config;
    write_run_records(dir, "doe", resolved, hashes, {dir / "efp.csv", dir / "doe.csv"},
                      elapsed_seconds(start));
}

void cmd_metrics(json config) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = out_dir_of(config);
    apply_default(config, "ca_multipliers", json::array({1.0, 2.0, 3.0}));
    apply_default(config, "wet_threshold", 0.0);
    apply_default(config, "categories", true);

    const std::string truth_path = config.value("truth", "");
    const std::string pred_path = config.value("predictions", "");
    if (truth_path.empty() || pred_path.empty())
        throw parameter_error("config: 'truth' and 'predictions' are required");

    const linalg::Matrix truth = io::read_observations_csv(truth_path);
    const std::vector<io::PredictionRow> rows = io::read_predictions_csv(pred_path);

    std::map<std::string, std::string> hashes;
    hashes[truth_path] = io::hash_file(truth_path);
    hashes[pred_path] = io::hash_file(pred_path);

    // regroup prediction rows per scenario
    std::map<std::int64_t, std::vector<io::PredictionRow>> by_scenario;
    for (const io::PredictionRow& r : rows) by_scenario[r.scenario].push_back(r);

    const std::vector<double> efp =
        design::compute_efp(truth, config.at("wet_threshold").get<double>());
    std::vector<std::size_t> wet;
    for (std::size_t j = 0; j < efp.size(); ++j)
        if (efp[j] > 0.0) wet.push_back(j);
    if (wet.empty())
        for (std::size_t j = 0; j < efp.size(); ++j) wet.push_back(j);

    double pooled_mean = 0.0;
    for (std::size_t i = 0; i < truth.rows(); ++i)
        for (std::size_t j : wet) pooled_mean += truth(i, j);
    pooled_mean /= static_cast<double>(truth.rows() * wet.size());
    double pooled_variance = 0.0;
    for (std::size_t i = 0; i < truth.rows(); ++i)
        for (std::size_t j : wet) {
            const double d = truth(i, j) - pooled_mean;
            pooled_variance += d * d;
        }
    pooled_variance /= static_cast<double>(truth.rows() * wet.size());

    const std::vector<double> cs = config.at("ca_multipliers").get<std::vector<double>>();

    json per_scenario = json::array();
    std::vector<double> all_truth_wet, all_pred_wet;
    for (const auto& [scenario, preds] : by_scenario) {
        if (scenario < 0 || static_cast<std::size_t>(scenario) >= truth.rows())
            throw data_error("metrics: prediction scenario_id out of range of the truth file");
        std::vector<double> t, m, sd;
        std::vector<double> t_wet, m_wet;
        for (const io::PredictionRow& r : preds) {
            if (r.location < 0 || static_cast<std::size_t>(r.location) >= truth.cols())
                throw data_error("metrics: prediction location_id out of range");
            const double tv = truth(static_cast<std::size_t>(scenario),
                                    static_cast<std::size_t>(r.location));
            t.push_back(tv);
            m.push_back(r.mean);
            sd.push_back(r.sd);
            if (efp[static_cast<std::size_t>(r.location)] > 0.0 || wet.size() == efp.size()) {
                t_wet.push_back(tv);
                m_wet.push_back(r.mean);
            }
        }
        json entry;
        entry["scenario_id"] = scenario;
        entry["n"] = t.size();
        entry["rmse"] = eval::rmse(t, m);
        double mean = 0.0;
        for (double v : t) mean += v;
        mean /= static_cast<double>(t.size());
        double sstot = 0.0;
        for (double v : t) sstot += (v - mean) * (v - mean);
        if (sstot > 0.0 && t.size() >= 2)
            entry["q2"] = eval::q2(t, m);
        else
            entry["q2"] = nullptr;
        if (!t_wet.empty() && pooled_variance > 0.0)
            entry["q2_pooled"] = eval::q2_pooled(t_wet, m_wet, pooled_variance);
        json ca_map = json::object();
        for (double c : cs) ca_map[io::format_double(c)] = eval::ca(t, m, sd, c);
        entry["ca"] = ca_map;
        per_scenario.push_back(entry);
        all_truth_wet.insert(all_truth_wet.end(), t_wet.begin(), t_wet.end());
        all_pred_wet.insert(all_pred_wet.end(), m_wet.begin(), m_wet.end());
    }

    json report;
    report["pooled_variance"] = pooled_variance;
    report["pooled_location_count"] = wet.size();
    report["per_scenario"] = per_scenario;

    if (config.at("categories").get<bool>() && !all_truth_wet.empty()) {
        bool nonnegative = true;
        for (double v : all_truth_wet)
            if (v < 0.0) nonnegative = false;
        for (double v : all_pred_wet)
            if (v < 0.0) nonnegative = false;
        if (nonnegative) {
            const std::array<double, 4> pt = eval::category_proportions(all_truth_wet);
            const std::array<double, 4> pp = eval::category_proportions(all_pred_wet);
            report["category_proportions"] = {
                {"labels", {"minor", "moderate", "serious", "severe"}},
                {"truth", {pt[0], pt[1], pt[2], pt[3]}},
                {"predicted", {pp[0], pp[1], pp[2], pp[3]}}};
        } else {
            report["category_proportions"] = nullptr;
        }
    }
    io::write_file(dir / "metrics.json", report.dump(2) + "\n");

    json resolved = config;
    write_run_records(dir, "metrics", resolved, hashes, {dir / "metrics.json"},
                      elapsed_seconds(start));
}

// ---------------------------------------------------------------------------

namespace {

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        return json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw io_error("config '" + path + "': " + e.what());
    }
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Gaussian-process map emulation with functional inputs"};
    app.require_subcommand(1);

    struct CommonArgs {
        std::string config_path;
        std::string out_dir;
        std::int64_t seed = -1;
    };

    std::map<std::string, CommonArgs> args;
    std::map<std::string, json> overrides;

    auto add_common = [&](CLI::App* sub, const std::string& name) {
        CommonArgs& a = args[name];
        sub->add_option("--config", a.config_path, "JSON run configuration");
        sub->add_option("--out", a.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", a.seed, "seed override");
    };

    std::vector<std::string> fit_inputs, predict_inputs, loo_inputs;
    std::string fit_locations, fit_observations, loo_locations, loo_observations;
    std::string predict_model, predict_locations;
    std::string doe_locations, doe_observations;
    std::string metrics_truth, metrics_predictions;
    std::string synth_preset;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, "synth");
    synth->add_option("--preset", synth_preset, "multioutput | forecast");

    CLI::App* fit = app.add_subcommand("fit", "fit a model by maximum likelihood");
    add_common(fit, "fit");
    fit->add_option("--inputs", fit_inputs, "channel CSV paths");
    fit->add_option("--locations", fit_locations, "locations CSV");
    fit->add_option("--observations", fit_observations, "observations CSV");

    CLI::App* predict = app.add_subcommand("predict", "forecast maps for new scenarios");
    add_common(predict, "predict");
    predict->add_option("--model", predict_model, "model JSON path");
    predict->add_option("--inputs", predict_inputs, "query channel CSV paths");
    predict->add_option("--locations", predict_locations, "locations CSV (optional)");

    CLI::App* loo_cmd = app.add_subcommand("loo", "leave-one-scenario-out cross-validation");
    add_common(loo_cmd, "loo");
    loo_cmd->add_option("--inputs", loo_inputs, "channel CSV paths");
    loo_cmd->add_option("--locations", loo_locations, "locations CSV");
    loo_cmd->add_option("--observations", loo_observations, "observations CSV");
    int loo_workers = 0;
    loo_cmd->add_option("--workers", loo_workers, "parallel fold workers");

    CLI::App* doe = app.add_subcommand("doe", "EFP-stratified design of experiments");
    add_common(doe, "doe");
    doe->add_option("--locations", doe_locations, "locations CSV");
    doe->add_option("--observations", doe_observations, "map stack CSV");

    CLI::App* metrics = app.add_subcommand("metrics", "recompute indicators from files");
    add_common(metrics, "metrics");
    metrics->add_option("--truth", metrics_truth, "truth observations CSV");
    metrics->add_option("--predictions", metrics_predictions, "predictions CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        const CommonArgs& a = args.at(name);
        json config = load_config_file(a.config_path);
        if (!a.out_dir.empty()) config["out_dir"] = a.out_dir;
        if (a.seed >= 0) {
            config["seed"] = a.seed;
            if (name == "fit" || name == "loo") config["optimizer"]["seed"] = a.seed;
        }

        auto set_if = [&](const std::string& key, const std::string& value) {
            if (!value.empty()) config[key] = value;
        };
        auto set_list_if = [&](const std::string& key, const std::vector<std::string>& values) {
            if (!values.empty()) config[key] = values;
        };

        if (name == "synth") {
            set_if("preset", synth_preset);
            cmd_synth(config);
        } else if (name == "fit") {
            set_list_if("inputs", fit_inputs);
            set_if("locations", fit_locations);
            set_if("observations", fit_observations);
            cmd_fit(config);
        } else if (name == "predict") {
            set_list_if("inputs", predict_inputs);
            set_if("model", predict_model);
            set_if("locations", predict_locations);
            cmd_predict(config);
        } else if (name == "loo") {
            set_list_if("inputs", loo_inputs);
            set_if("locations", loo_locations);
            set_if("observations", loo_observations);
            if (loo_workers > 0) config["workers"] = loo_workers;
            cmd_loo(config);
        } else if (name == "doe") {
            set_if("locations", doe_locations);
            set_if("observations", doe_observations);
            cmd_doe(config);
        } else if (name == "metrics") {
            set_if("truth", metrics_truth);
            set_if("predictions", metrics_predictions);
            cmd_metrics(config);
        }
    } catch (const factorization_error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const fit_error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace fgp::cli
