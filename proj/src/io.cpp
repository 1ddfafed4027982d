#include "fgp/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fgp::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    fields.push_back(field);
    return fields;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path.string() + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw io_error("'" + path.string() + "' is empty");
    return lines;
}

std::int64_t parse_int(const std::string& text, const std::string& context) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(text.c_str(), &end, 10);
    if (errno != 0 || end == text.c_str() || *end != '\0')
        throw io_error(context + ": invalid integer '" + text + "'");
    return static_cast<std::int64_t>(v);
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

double parse_double(const std::string& text, const std::string& context) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (errno != 0 || end == text.c_str() || *end != '\0')
        throw io_error(context + ": invalid number '" + text + "'");
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw io_error("failed writing '" + path.string() + "'");
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_file(const std::filesystem::path& path) { return fnv1a_hex(read_file(path)); }

void write_channel_csv(const std::filesystem::path& path, const std::vector<double>& grid,
                       const Matrix& values) {
    if (values.cols() != grid.size()) throw shape_error("write_channel_csv: grid length mismatch");
    std::ostringstream out;
    for (std::size_t t = 0; t < grid.size(); ++t) {
        if (t > 0) out << ',';
        out << format_double(grid[t]);
    }
    out << '\n';
    for (std::size_t i = 0; i < values.rows(); ++i) {
        for (std::size_t t = 0; t < values.cols(); ++t) {
            if (t > 0) out << ',';
            out << format_double(values(i, t));
        }
        out << '\n';
    }
    write_file(path, out.str());
}

funspace::ScenarioInputs::Channel read_channel_csv(const std::filesystem::path& path,
                                                   const std::string& channel_id) {
    const std::vector<std::string> lines = read_lines(path);
    funspace::ScenarioInputs::Channel ch;
    ch.id = channel_id;

    const std::vector<std::string> header = split_csv_line(lines[0]);
    for (std::size_t t = 0; t < header.size(); ++t)
        ch.grid.push_back(parse_double(header[t], path.string() + ":1"));
    if (lines.size() < 2) throw io_error("'" + path.string() + "' has no scenario rows");

    ch.values = Matrix(lines.size() - 1, ch.grid.size());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        const std::string ctx = path.string() + ":" + std::to_string(i + 1);
        if (fields.size() != ch.grid.size())
            throw io_error(ctx + ": expected " + std::to_string(ch.grid.size()) + " fields, got " +
                           std::to_string(fields.size()));
        for (std::size_t t = 0; t < fields.size(); ++t)
            ch.values(i - 1, t) = parse_double(fields[t], ctx);
    }
    return ch;
}

void write_locations_csv(const std::filesystem::path& path, const Matrix& locations) {
    if (locations.cols() != 2) throw shape_error("write_locations_csv: locations must be S x 2");
    std::ostringstream out;
    out << "id,x1,x2\n";
    for (std::size_t i = 0; i < locations.rows(); ++i)
        out << i << ',' << format_double(locations(i, 0)) << ',' << format_double(locations(i, 1))
            << '\n';
    write_file(path, out.str());
}

Matrix read_locations_csv(const std::filesystem::path& path,
                          std::vector<std::int64_t>* ids_out) {
    const std::vector<std::string> lines = read_lines(path);
    if (split_csv_line(lines[0]) != std::vector<std::string>{"id", "x1", "x2"})
        throw io_error("'" + path.string() + "': expected header 'id,x1,x2'");
    Matrix locations(lines.size() - 1, 2);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        const std::string ctx = path.string() + ":" + std::to_string(i + 1);
        if (fields.size() != 3) throw io_error(ctx + ": expected 3 fields");
        if (ids_out != nullptr) ids_out->push_back(parse_int(fields[0], ctx));
        locations(i - 1, 0) = parse_double(fields[1], ctx);
        locations(i - 1, 1) = parse_double(fields[2], ctx);
    }
    return locations;
}

void write_observations_csv(const std::filesystem::path& path, const Matrix& observations,
                            bool dense_form) {
    std::ostringstream out;
    if (dense_form) {
        out << "scenario_id";
        for (std::size_t j = 0; j < observations.cols(); ++j) out << ',' << j;
        out << '\n';
        for (std::size_t i = 0; i < observations.rows(); ++i) {
            out << i;
            for (std::size_t j = 0; j < observations.cols(); ++j)
                out << ',' << format_double(observations(i, j));
            out << '\n';
        }
    } else {
        out << "scenario_id,location_id,value\n";
        for (std::size_t i = 0; i < observations.rows(); ++i)
            for (std::size_t j = 0; j < observations.cols(); ++j)
                out << i << ',' << j << ',' << format_double(observations(i, j)) << '\n';
    }
    write_file(path, out.str());
}

Matrix read_observations_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    const std::vector<std::string> header = split_csv_line(lines[0]);
    if (header.empty() || header[0] != "scenario_id")
        throw io_error("'" + path.string() + "': expected a scenario_id observation header");

    if (header.size() == 3 && header[1] == "location_id" && header[2] == "value") {
        const std::vector<Triplet> trips = read_observation_triplets(path);
        std::int64_t max_s = -1, max_l = -1;
        for (const Triplet& t : trips) {
            max_s = std::max(max_s, t.scenario);
            max_l = std::max(max_l, t.location);
        }
        Matrix obs(static_cast<std::size_t>(max_s + 1), static_cast<std::size_t>(max_l + 1));
        Matrix seen(obs.rows(), obs.cols());
        for (const Triplet& t : trips) {
            obs(static_cast<std::size_t>(t.scenario), static_cast<std::size_t>(t.location)) =
                t.value;
            seen(static_cast<std::size_t>(t.scenario), static_cast<std::size_t>(t.location)) = 1.0;
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (seen.data()[i] == 0.0)
                throw io_error("'" + path.string() +
                               "': triplet observations do not cover the full grid");
        return obs;
    }

    Matrix obs(lines.size() - 1, header.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        const std::string ctx = path.string() + ":" + std::to_string(i + 1);
        if (fields.size() != header.size())
            throw io_error(ctx + ": expected " + std::to_string(header.size()) + " fields");
        for (std::size_t j = 1; j < fields.size(); ++j)
            obs(i - 1, j - 1) = parse_double(fields[j], ctx);
    }
    return obs;
}

std::vector<Triplet> read_observation_triplets(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    const std::vector<std::string> header = split_csv_line(lines[0]);
    if (header != std::vector<std::string>{"scenario_id", "location_id", "value"})
        throw io_error("'" + path.string() + "': expected header 'scenario_id,location_id,value'");
    std::vector<Triplet> out;
    out.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        const std::string ctx = path.string() + ":" + std::to_string(i + 1);
        if (fields.size() != 3) throw io_error(ctx + ": expected 3 fields");
        Triplet t;
        t.scenario = parse_int(fields[0], ctx);
        t.location = parse_int(fields[1], ctx);
        t.value = parse_double(fields[2], ctx);
        if (t.scenario < 0 || t.location < 0) throw io_error(ctx + ": negative index");
        out.push_back(t);
    }
    return out;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRow>& rows) {
    std::ostringstream out;
    out << "scenario_id,location_id,x1,x2,mean,sd,clamped\n";
    for (const PredictionRow& r : rows)
        out << r.scenario << ',' << r.location << ',' << format_double(r.x1) << ','
            << format_double(r.x2) << ',' << format_double(r.mean) << ',' << format_double(r.sd)
            << ',' << r.clamped << '\n';
    write_file(path, out.str());
}

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines[0] != "scenario_id,location_id,x1,x2,mean,sd,clamped")
        throw io_error("'" + path.string() + "': unexpected prediction header");
    std::vector<PredictionRow> rows;
    rows.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> fields = split_csv_line(lines[i]);
        const std::string ctx = path.string() + ":" + std::to_string(i + 1);
        if (fields.size() != 7) throw io_error(ctx + ": expected 7 fields");
        PredictionRow r;
        r.scenario = parse_int(fields[0], ctx);
        r.location = parse_int(fields[1], ctx);
        r.x1 = parse_double(fields[2], ctx);
        r.x2 = parse_double(fields[3], ctx);
        r.mean = parse_double(fields[4], ctx);
        r.sd = parse_double(fields[5], ctx);
        r.clamped = static_cast<int>(parse_int(fields[6], ctx));
        rows.push_back(r);
    }
    return rows;
}

}  // namespace fgp::io
