// Experiment configuration: one JSON file with per-stage sections.  CLI
// flags override individual keys after loading.  Defaults reproduce the
// 2 T reference model without any file at all.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spinspec/bath.hpp"
#include "spinspec/forward.hpp"
#include "spinspec/inversion.hpp"

namespace spinspec {

struct SequenceSpec {
    SequenceKind kind = SequenceKind::Cpmg;
    int n_pi = 1;
    std::vector<double> t_grid;  // us, strictly increasing
};

struct GridSpec {
    double omega_max = 753.98;  // 2*pi*120 rad/us
    int n_points = 1206;
    double kernel_width = 0.0;  // 0 -> twice the grid spacing
};

struct InversionParams {
    int k_max = 11;
    double omega_cutoff = 753.98;
    double lambda = 1e-3;
    double c_floor = 0.02;
};

struct ExperimentConfig {
    BathConfig bath;
    GridSpec grid;
    std::vector<SequenceSpec> sequences;
    EnvelopeParams envelopes;
    InversionParams inversion;
    std::string output_dir = "out";
    std::uint64_t seed = 20220901;
    int mc_realizations = 20'000;
};

// log-spaced T grid, us
std::vector<double> make_log_t_grid(double t_min, double t_max, int n_points);

ExperimentConfig default_config();

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text, const std::string& origin);
std::string config_to_json(const ExperimentConfig& config);

// FNV-1a over the canonical JSON dump; stamped into run manifests.
std::string config_hash(const ExperimentConfig& config);

// species table (constants file) I/O
std::vector<NuclearSpecies> load_species_table(const std::string& path);

}  // namespace spinspec
