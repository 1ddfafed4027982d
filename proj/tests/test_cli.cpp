#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fgp/cli.hpp"
#include "fgp/gp.hpp"
#include "fgp/io.hpp"
#include "fgp/model_io.hpp"
#include "fgp/prng.hpp"

using namespace fgp;
using nlohmann::json;
namespace fs = std::filesystem;
using linalg::Matrix;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "fgp_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json tiny_synth_config(const fs::path& dir, std::uint64_t seed) {
    return json{{"out_dir", dir.string()},
                {"channels", 2},
                {"scenarios", 5},
                {"time_points", 12},
                {"centered", true},
                {"sigma2_mean", {0.5, 0.5}},
                {"ell_mean", {0.3, 0.5}},
                {"layout", {{"type", "grid"}, {"nx", 3}, {"ny", 3}}},
                {"functional", {{"kind", "matern52"}, {"lengthscales", {2.0, 2.0}}}},
                {"seed", seed}};
}

json fit_config(const fs::path& data, const fs::path& out) {
    return json{{"out_dir", out.string()},
                {"inputs", {(data / "input_ch0.csv").string(), (data / "input_ch1.csv").string()}},
                {"locations", (data / "locations.csv").string()},
                {"observations", (data / "observations.csv").string()},
                {"optimizer",
                 {{"max_evaluations", 60}, {"restarts", 1}, {"seed", 7}, {"tolerance", 1e-7}}}};
}

}  // namespace

TEST_CASE("csv round-trips preserve doubles exactly") {
    const fs::path dir = fresh_dir("io_roundtrip");
    rng::SplitMix64 stream(1);

    std::vector<double> grid(7);
    for (std::size_t t = 0; t < 7; ++t) grid[t] = 0.1 * static_cast<double>(t) + stream.uniform01() * 1e-3;
    std::sort(grid.begin(), grid.end());
    Matrix values(4, 7);
    for (std::size_t i = 0; i < values.size(); ++i) values.data()[i] = stream.normal() * 1e3;

    io::write_channel_csv(dir / "ch.csv", grid, values);
    const auto ch = io::read_channel_csv(dir / "ch.csv", "ch");
    REQUIRE(ch.grid.size() == 7);
    for (std::size_t t = 0; t < 7; ++t) CHECK(ch.grid[t] == grid[t]);
    for (std::size_t i = 0; i < values.size(); ++i)
        CHECK(ch.values.data()[i] == values.data()[i]);

    Matrix locations(5, 2);
    for (std::size_t i = 0; i < locations.size(); ++i) locations.data()[i] = stream.normal();
    io::write_locations_csv(dir / "loc.csv", locations);
    const Matrix loc_back = io::read_locations_csv(dir / "loc.csv");
    for (std::size_t i = 0; i < locations.size(); ++i)
        CHECK(loc_back.data()[i] == locations.data()[i]);

    Matrix obs(3, 5);
    for (std::size_t i = 0; i < obs.size(); ++i) obs.data()[i] = stream.normal() / 7.0;
    io::write_observations_csv(dir / "obs_dense.csv", obs, true);
    io::write_observations_csv(dir / "obs_trip.csv", obs, false);
    const Matrix dense_back = io::read_observations_csv(dir / "obs_dense.csv");
    const Matrix trip_back = io::read_observations_csv(dir / "obs_trip.csv");
    for (std::size_t i = 0; i < obs.size(); ++i) {
        CHECK(dense_back.data()[i] == obs.data()[i]);
        CHECK(trip_back.data()[i] == obs.data()[i]);
    }
}

TEST_CASE("corrupt csv rows are reported with their line number") {
    const fs::path dir = fresh_dir("io_corrupt");
    io::write_file(dir / "bad.csv", "id,x1,x2\n0,0.0,0.0\n1,oops,1.0\n");
    try {
        io::read_locations_csv(dir / "bad.csv");
        FAIL("expected an io_error");
    } catch (const io_error& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }

    io::write_file(dir / "short.csv", "id,x1,x2\n0,0.0\n");
    CHECK_THROWS_AS(io::read_locations_csv(dir / "short.csv"), io_error);

    // triplet coverage check
    io::write_file(dir / "partial.csv", "scenario_id,location_id,value\n0,0,1.0\n1,1,2.0\n");
    CHECK_THROWS_AS(io::read_observations_csv(dir / "partial.csv"), io_error);
}

TEST_CASE("cmd_synth writes a complete, reproducible dataset") {
    const fs::path a = fresh_dir("synth_a");
    const fs::path b = fresh_dir("synth_b");
    cli::cmd_synth(tiny_synth_config(a, 99));
    cli::cmd_synth(tiny_synth_config(b, 99));

    for (const char* name :
         {"input_ch0.csv", "input_ch1.csv", "locations.csv", "observations.csv"}) {
        CHECK(fs::exists(a / name));
        CHECK(io::hash_file(a / name) == io::hash_file(b / name));
    }
    CHECK(fs::exists(a / "manifest.json"));
    CHECK(fs::exists(a / "resolved_config.json"));

    // idempotence: re-running the identical config into the same directory
    // leaves every output byte-identical (timestamps live in the manifest)
    std::map<std::string, std::string> before;
    for (const auto& entry : fs::directory_iterator(a))
        if (entry.path().filename() != "manifest.json")
            before[entry.path().filename().string()] = io::hash_file(entry.path());
    cli::cmd_synth(tiny_synth_config(a, 99));
    for (const auto& [name, hash] : before) CHECK(io::hash_file(a / name) == hash);

    // different seed, different data
    const fs::path c = fresh_dir("synth_c");
    cli::cmd_synth(tiny_synth_config(c, 100));
    CHECK(io::hash_file(a / "observations.csv") != io::hash_file(c / "observations.csv"));

    const Matrix obs = io::read_observations_csv(a / "observations.csv");
    CHECK(obs.rows() == 5);
    CHECK(obs.cols() == 9);

    // single-scenario run emits a one-row observation matrix
    const fs::path d = fresh_dir("synth_one");
    json one = tiny_synth_config(d, 5);
    one["scenarios"] = 1;
    cli::cmd_synth(one);
    CHECK(io::read_observations_csv(d / "observations.csv").rows() == 1);
}

TEST_CASE("forecast preset emits 8 channels x 1001 scenarios on a 10x10 grid") {
    const fs::path dir = fresh_dir("synth_forecast");
    cli::cmd_synth(json{{"out_dir", dir.string()}, {"preset", "forecast"}, {"seed", 2}});

    for (int c = 0; c < 8; ++c)
        CHECK(fs::exists(dir / ("input_ch" + std::to_string(c) + ".csv")));
    CHECK_FALSE(fs::exists(dir / "input_ch8.csv"));
    const auto ch0 = io::read_channel_csv(dir / "input_ch0.csv", "ch0");
    CHECK(ch0.values.rows() == 1001);
    CHECK(ch0.grid.size() == 37);
    const Matrix obs = io::read_observations_csv(dir / "observations.csv");
    CHECK(obs.rows() == 1001);
    CHECK(obs.cols() == 100);
    CHECK(io::read_locations_csv(dir / "locations.csv").rows() == 100);
}

TEST_CASE("fit -> model round-trip and byte-identical refits") {
    const fs::path data = fresh_dir("fit_data");
    cli::cmd_synth(tiny_synth_config(data, 42));

    const fs::path out1 = fresh_dir("fit_out1");
    const fs::path out2 = fresh_dir("fit_out2");
    cli::cmd_fit(fit_config(data, out1));
    cli::cmd_fit(fit_config(data, out2));

    REQUIRE(fs::exists(out1 / "model.json"));
    CHECK(io::hash_file(out1 / "model.json") == io::hash_file(out2 / "model.json"));

    // the stored likelihood must match a library recomputation on load
    const gp::FittedModel model = model_io::load_model(out1 / "model.json");
    const json report = json::parse(io::read_file(out1 / "fit_report.json"));
    CHECK(model.diagnostics.log_likelihood ==
          doctest::Approx(report.at("log_likelihood").get<double>()).epsilon(1e-8));

    // tampering with a referenced training file breaks the content hash
    std::ofstream append(data / "observations.csv", std::ios::app);
    append << "\n";
    append.close();
    CHECK_THROWS_AS(model_io::load_model(out1 / "model.json"), data_error);
}

TEST_CASE("predict on a training scenario reproduces its stored map") {
    const fs::path data = fresh_dir("pred_data");
    cli::cmd_synth(tiny_synth_config(data, 7));
    const fs::path fit_out = fresh_dir("pred_fit");
    cli::cmd_fit(fit_config(data, fit_out));

    const fs::path pred_out = fresh_dir("pred_out");
    json pconfig{{"out_dir", pred_out.string()},
                 {"model", (fit_out / "model.json").string()},
                 {"inputs",
                  {(data / "input_ch0.csv").string(), (data / "input_ch1.csv").string()}},
                 {"clamp", false}};
    cli::cmd_predict(pconfig);

    const auto rows = io::read_predictions_csv(pred_out / "predictions.csv");
    const Matrix obs = io::read_observations_csv(data / "observations.csv");
    REQUIRE(rows.size() == obs.rows() * obs.cols());
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i)
        scale = std::max(scale, std::abs(obs.data()[i]));
    for (const io::PredictionRow& r : rows) {
        const double truth = obs(static_cast<std::size_t>(r.scenario),
                                 static_cast<std::size_t>(r.location));
        worst = std::max(worst, std::abs(r.mean - truth));
    }
    CHECK(worst <= 1e-4 * scale);  // jitter-limited interpolation through files
}

TEST_CASE("loo command on duplicated scenarios is near-exact") {
    const fs::path data = fresh_dir("loo_data");
    // two identical scenarios with identical maps, written by hand
    std::vector<double> grid(8);
    for (std::size_t t = 0; t < 8; ++t) grid[t] = static_cast<double>(t) / 7.0;
    rng::SplitMix64 stream(3);
    Matrix row(1, 8);
    for (std::size_t t = 0; t < 8; ++t) row(0, t) = stream.normal();
    Matrix values(2, 8);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t t = 0; t < 8; ++t) values(i, t) = row(0, t);
    io::write_channel_csv(data / "input_ch0.csv", grid, values);

    Matrix locations(4, 2);
    for (std::size_t i = 0; i < locations.size(); ++i) locations.data()[i] = stream.uniform01();
    io::write_locations_csv(data / "locations.csv", locations);

    Matrix obs(2, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        obs(0, j) = stream.normal();
        obs(1, j) = obs(0, j);
    }
    io::write_observations_csv(data / "observations.csv", obs);

    const fs::path out = fresh_dir("loo_out");
    json config{{"out_dir", out.string()},
                {"inputs", {(data / "input_ch0.csv").string()}},
                {"locations", (data / "locations.csv").string()},
                {"observations", (data / "observations.csv").string()},
                {"clamp", false},
                {"optimizer", {{"max_evaluations", 40}, {"restarts", 1}, {"seed", 1}}}};
    cli::cmd_loo(config);

    const json summary = json::parse(io::read_file(out / "loo_summary.json"));
    CHECK(summary.at("folds").get<int>() == 2);
    CHECK(summary.at("median_rmse").get<double>() <= 1e-3);
    CHECK(summary.at("median_ca").get<double>() == doctest::Approx(1.0));
    CHECK(fs::exists(out / "loo_folds.csv"));
}

TEST_CASE("doe command keeps mandatory locations") {
    const fs::path data = fresh_dir("doe_data");
    rng::SplitMix64 stream(4);
    const std::size_t g = 64;
    Matrix locations(g, 2);
    for (std::size_t i = 0; i < g; ++i) {
        locations(i, 0) = static_cast<double>(i % 8) / 7.0;
        locations(i, 1) = static_cast<double>(i / 8) / 7.0;
    }
    io::write_locations_csv(data / "locations.csv", locations);
    Matrix obs(6, g);
    for (std::size_t i = 0; i < obs.size(); ++i)
        obs.data()[i] = std::max(0.0, stream.normal());
    io::write_observations_csv(data / "observations.csv", obs);

    const fs::path out = fresh_dir("doe_out");
    json config{{"out_dir", out.string()},
                {"locations", (data / "locations.csv").string()},
                {"observations", (data / "observations.csv").string()},
                {"kappa1", 3},
                {"kappa2", 4},
                {"efp_split", 0.4},
                {"mandatory", {0, 63}},
                {"seed", 11}};
    cli::cmd_doe(config);

    CHECK(fs::exists(out / "efp.csv"));

    // parse doe.csv: mandatory ids 0 and 63 must appear with the flag set
    std::istringstream in(io::read_file(out / "doe.csv"));
    std::string line;
    std::getline(in, line);  // header
    std::set<long> flagged, all_ids;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::string f;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(f);
                f.clear();
            } else
                f += ch;
        }
        fields.push_back(f);
        REQUIRE(fields.size() == 7);
        const long id = std::stol(fields[1]);
        all_ids.insert(id);
        if (fields[6] == "1") flagged.insert(id);
    }
    CHECK(flagged == std::set<long>{0, 63});
    CHECK(all_ids.size() == 3 + 4 + 2);
}

TEST_CASE("metrics on truth == prediction files") {
    const fs::path data = fresh_dir("metrics_data");
    rng::SplitMix64 stream(5);
    Matrix obs(3, 6);
    for (std::size_t i = 0; i < obs.size(); ++i)
        obs.data()[i] = std::max(0.0, stream.normal());
    io::write_observations_csv(data / "truth.csv", obs);

    std::vector<io::PredictionRow> rows;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            io::PredictionRow r;
            r.scenario = static_cast<std::int64_t>(i);
            r.location = static_cast<std::int64_t>(j);
            r.mean = obs(i, j);
            r.sd = 0.01;
            rows.push_back(r);
        }
    io::write_predictions_csv(data / "predictions.csv", rows);

    const fs::path out = fresh_dir("metrics_out");
    json config{{"out_dir", out.string()},
                {"truth", (data / "truth.csv").string()},
                {"predictions", (data / "predictions.csv").string()}};
    cli::cmd_metrics(config);

    const json report = json::parse(io::read_file(out / "metrics.json"));
    for (const json& entry : report.at("per_scenario")) {
        CHECK(entry.at("rmse").get<double>() == 0.0);
        if (!entry.at("q2").is_null()) CHECK(entry.at("q2").get<double>() == doctest::Approx(1.0));
        for (const auto& [c, v] : entry.at("ca").items())
            CHECK(v.get<double>() == doctest::Approx(1.0));
    }
    // truth == prediction: identical category proportions
    const json& cats = report.at("category_proportions");
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(cats.at("truth")[k].get<double>() ==
              doctest::Approx(cats.at("predicted")[k].get<double>()));
}

TEST_CASE("argv entry maps errors to exit codes") {
    const fs::path out = fresh_dir("cli_exit");

    {
        std::vector<std::string> args{"fgp", "doe", "--locations", "/nonexistent.csv",
                                      "--observations", "/nonexistent.csv", "--out",
                                      out.string()};
        std::vector<char*> argv;
        for (std::string& a : args) argv.push_back(a.data());
        CHECK(cli::run(static_cast<int>(argv.size()), argv.data()) == 1);
    }

    {
        // every location always flooded: stratification class 2 is empty -> exit 1
        const fs::path data = fresh_dir("cli_exit_data");
        Matrix locations(9, 2);
        for (std::size_t i = 0; i < 9; ++i) {
            locations(i, 0) = static_cast<double>(i % 3);
            locations(i, 1) = static_cast<double>(i / 3);
        }
        io::write_locations_csv(data / "locations.csv", locations);
        io::write_observations_csv(data / "observations.csv", Matrix(2, 9, 1.0));
        const json config{{"locations", (data / "locations.csv").string()},
                          {"observations", (data / "observations.csv").string()},
                          {"kappa1", 2},
                          {"kappa2", 2}};
        io::write_file(data / "doe.json", config.dump());

        std::vector<std::string> args{"fgp",  "doe", "--config", (data / "doe.json").string(),
                                      "--out", out.string()};
        std::vector<char*> argv;
        for (std::string& a : args) argv.push_back(a.data());
        CHECK(cli::run(static_cast<int>(argv.size()), argv.data()) == 1);
    }
}
