// CSV artifacts.  Every file starts with a `# schema: <name>-v1` comment
// line; readers validate the schema line and the column header and raise
// SchemaError naming the offending column otherwise.  Numbers are written
// with 17 significant digits so identical runs produce identical bytes.

#pragma once

#include <string>
#include <vector>

#include "spinspec/forward.hpp"
#include "spinspec/inversion.hpp"

namespace spinspec {

inline constexpr const char* kSpectrumSchema = "spinspec-spectrum-v1";
inline constexpr const char* kCoherenceSchema = "spinspec-coherence-v1";
inline constexpr const char* kDecompositionSchema = "spinspec-decomposition-v1";

std::string format_double(double v);

// omega_rad_per_us,S_rad_per_us,component
void write_spectrum_csv(const std::string& path, const NoiseSpectrum& spectrum);
NoiseSpectrum read_spectrum_csv(const std::string& path);

// T_us,C,sigma_C with a comment block (kind, n_pi, field, seed, provenance);
// when `oracle` is given its samples append C_mc,sigma_C_mc columns.
void write_coherence_csv(const std::string& path, const CoherenceCurve& curve,
                         const CoherenceCurve* oracle = nullptr);
CoherenceCurve read_coherence_csv(const std::string& path);

// f_MHz,S_rad_per_us,sigma_S; rows flagged missing by the decomposition are
// omitted and counted in a comment line.
void write_decomposition_csv(const std::string& path, const DecompositionResult& result);
DecompositionResult read_decomposition_csv(const std::string& path);

}  // namespace spinspec
