#include "spinspec/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spinspec/units.hpp"

namespace spinspec {

using nlohmann::json;

std::vector<double> make_log_t_grid(double t_min, double t_max, int n_points) {
    if (!(t_min > 0.0) || !(t_max > t_min) || n_points < 2)
        throw ConfigError("make_log_t_grid: need 0 < t_min < t_max and n_points >= 2");
    std::vector<double> out(n_points);
    const double lo = std::log(t_min), hi = std::log(t_max);
    for (int i = 0; i < n_points; ++i)
        out[i] = std::exp(lo + (hi - lo) * i / (n_points - 1));
    return out;
}

ExperimentConfig default_config() {
    ExperimentConfig config;
    const std::vector<double> t_grid = make_log_t_grid(0.003, 3.0, 72);
    for (int n : {1, 2, 4, 8}) config.sequences.push_back({SequenceKind::Cpmg, n, t_grid});
    return config;
}

namespace {

json species_to_json(const NuclearSpecies& sp) {
    return json{{"name", sp.name},
                {"gyro_mhz_per_t", sp.gyro_mhz_per_t},
                {"spin", sp.spin},
                {"abundance", sp.abundance},
                {"hyperfine_scale_rad_per_us", sp.hyperfine_scale}};
}

NuclearSpecies species_from_json(const json& j) {
    NuclearSpecies sp;
    sp.name = j.at("name").get<std::string>();
    sp.gyro_mhz_per_t = j.at("gyro_mhz_per_t").get<double>();
    sp.spin = j.at("spin").get<double>();
    sp.abundance = j.at("abundance").get<double>();
    sp.hyperfine_scale = j.at("hyperfine_scale_rad_per_us").get<double>();
    return sp;
}

std::vector<double> t_grid_from_json(const json& j) {
    if (j.contains("values")) return j.at("values").get<std::vector<double>>();
    const double t_min = j.at("t_min_us").get<double>();
    const double t_max = j.at("t_max_us").get<double>();
    const int n = j.at("n_points").get<int>();
    const std::string spacing = j.value("spacing", "log");
    if (spacing == "log") return make_log_t_grid(t_min, t_max, n);
    if (spacing == "linear") {
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) out[i] = t_min + (t_max - t_min) * i / (n - 1.0);
        return out;
    }
    throw ConfigError("sequence t_grid spacing must be 'log' or 'linear'");
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
    json j;
    json species = json::array();
    for (const auto& sp : config.bath.species) species.push_back(species_to_json(sp));
    j["bath"] = {{"species", species},
                 {"n_nuclei", config.bath.n_nuclei},
                 {"field_b_tesla", config.bath.field_b_tesla},
                 {"strain_width", config.bath.strain_width},
                 {"harmonic_weights", config.bath.harmonic_weights},
                 {"perp_amplitude_rad_per_us", config.bath.perp_amplitude},
                 {"perp_cutoff_rad_per_us", config.bath.perp_cutoff}};
    j["grid"] = {{"omega_max_rad_per_us", config.grid.omega_max},
                 {"n_points", config.grid.n_points},
                 {"kernel_width_rad_per_us", config.grid.kernel_width}};
    json seqs = json::array();
    for (const auto& s : config.sequences)
        seqs.push_back({{"kind", s.kind == SequenceKind::Ramsey ? "ramsey" : "cpmg"},
                        {"n_pi", s.n_pi},
                        {"t_grid_us", {{"values", s.t_grid}}}});
    j["sequences"] = seqs;
    j["envelopes"] = {{"t1_us", config.envelopes.t1_us},
                      {"quasistatic_sigma_rad_per_us", config.envelopes.quasistatic_sigma}};
    j["inversion"] = {{"k_max", config.inversion.k_max},
                      {"omega_cutoff_rad_per_us", config.inversion.omega_cutoff},
                      {"lambda", config.inversion.lambda},
                      {"c_floor", config.inversion.c_floor}};
    j["output_dir"] = config.output_dir;
    j["seed"] = config.seed;
    j["mc_realizations"] = config.mc_realizations;
    return j.dump(2);
}

ExperimentConfig parse_config_json(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": invalid JSON: " + e.what());
    }
    ExperimentConfig config = default_config();
    try {
        if (j.contains("bath")) {
            const json& b = j.at("bath");
            if (b.contains("species")) {
                config.bath.species.clear();
                for (const auto& sp : b.at("species"))
                    config.bath.species.push_back(species_from_json(sp));
            }
            config.bath.n_nuclei = b.value("n_nuclei", config.bath.n_nuclei);
            config.bath.field_b_tesla = b.value("field_b_tesla", config.bath.field_b_tesla);
            config.bath.strain_width = b.value("strain_width", config.bath.strain_width);
            if (b.contains("harmonic_weights"))
                config.bath.harmonic_weights =
                    b.at("harmonic_weights").get<std::vector<double>>();
            config.bath.perp_amplitude =
                b.value("perp_amplitude_rad_per_us", config.bath.perp_amplitude);
            config.bath.perp_cutoff =
                b.value("perp_cutoff_rad_per_us", config.bath.perp_cutoff);
        }
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            config.grid.omega_max = g.value("omega_max_rad_per_us", config.grid.omega_max);
            config.grid.n_points = g.value("n_points", config.grid.n_points);
            config.grid.kernel_width =
                g.value("kernel_width_rad_per_us", config.grid.kernel_width);
        }
        if (j.contains("sequences")) {
            config.sequences.clear();
            for (const auto& s : j.at("sequences")) {
                SequenceSpec spec;
                const std::string kind = s.value("kind", "cpmg");
                if (kind == "ramsey")
                    spec.kind = SequenceKind::Ramsey;
                else if (kind == "cpmg")
                    spec.kind = SequenceKind::Cpmg;
                else
                    throw ConfigError("sequence kind must be 'ramsey' or 'cpmg'");
                spec.n_pi = s.value("n_pi", spec.kind == SequenceKind::Cpmg ? 1 : 0);
                spec.t_grid = t_grid_from_json(s.at("t_grid_us"));
                config.sequences.push_back(spec);
            }
        }
        if (j.contains("envelopes")) {
            const json& e = j.at("envelopes");
            config.envelopes.t1_us = e.value("t1_us", config.envelopes.t1_us);
            config.envelopes.quasistatic_sigma = e.value(
                "quasistatic_sigma_rad_per_us", config.envelopes.quasistatic_sigma);
        }
        if (j.contains("inversion")) {
            const json& inv = j.at("inversion");
            config.inversion.k_max = inv.value("k_max", config.inversion.k_max);
            config.inversion.omega_cutoff =
                inv.value("omega_cutoff_rad_per_us", config.inversion.omega_cutoff);
            config.inversion.lambda = inv.value("lambda", config.inversion.lambda);
            config.inversion.c_floor = inv.value("c_floor", config.inversion.c_floor);
        }
        config.output_dir = j.value("output_dir", config.output_dir);
        config.seed = j.value("seed", config.seed);
        config.mc_realizations = j.value("mc_realizations", config.mc_realizations);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }

    config.bath.seed = config.seed;
    validate(config.bath);
    if (!(config.envelopes.t1_us > 0.0)) throw ConfigError("envelopes: t1_us must be > 0");
    if (config.envelopes.quasistatic_sigma < 0.0)
        throw ConfigError("envelopes: quasistatic_sigma must be >= 0");
    if (config.grid.n_points < 2) throw ConfigError("grid: n_points must be >= 2");
    if (!(config.grid.omega_max > 0.0)) throw ConfigError("grid: omega_max must be > 0");
    if (config.inversion.k_max < 1 || config.inversion.k_max % 2 == 0)
        throw ConfigError("inversion: k_max must be odd and >= 1");
    for (const auto& s : config.sequences) {
        if (s.t_grid.empty()) throw ConfigError("sequence with empty t_grid");
        for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
            if (s.t_grid[i] < 0.0) throw ConfigError("sequence t_grid must be >= 0");
            if (i > 0 && !(s.t_grid[i] > s.t_grid[i - 1]))
                throw ConfigError("sequence t_grid must be strictly increasing");
        }
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_json(buf.str(), path);
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string dump = config_to_json(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<NuclearSpecies> load_species_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open species table " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    std::vector<NuclearSpecies> out;
    try {
        for (const auto& sp : j.at("species")) out.push_back(species_from_json(sp));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return out;
}

}  // namespace spinspec
