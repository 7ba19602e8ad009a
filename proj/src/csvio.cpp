#include "spinspec/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spinspec/units.hpp"

namespace spinspec {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& path) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw SchemaError(path + ": malformed numeric field '" + s + "'");
    }
}

struct CsvFile {
    std::vector<std::pair<std::string, std::string>> meta;  // comment key/value lines
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

CsvFile read_csv(const std::string& path, const char* expected_schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    CsvFile file;
    std::string line;
    bool header_seen = false;
    bool schema_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                std::string key = line.substr(1, colon - 1);
                std::string value = line.substr(colon + 1);
                auto trim = [](std::string& s) {
                    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
                    while (!s.empty() && s.back() == ' ') s.pop_back();
                };
                trim(key);
                trim(value);
                if (key == "schema") {
                    schema_seen = true;
                    if (value != expected_schema)
                        throw SchemaError(path + ": schema '" + value + "' does not match '" +
                                          expected_schema + "'");
                }
                file.meta.emplace_back(key, value);
            }
            continue;
        }
        if (!header_seen) {
            file.columns = split(line, ',');
            header_seen = true;
            continue;
        }
        file.rows.push_back(split(line, ','));
    }
    if (!schema_seen) throw SchemaError(path + ": missing '# schema:' header line");
    if (!header_seen) throw SchemaError(path + ": missing column header");
    return file;
}

void require_columns(const CsvFile& file, const std::vector<std::string>& expected,
                     const std::string& path, bool allow_extra = false) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i >= file.columns.size())
            throw SchemaError(path + ": missing column '" + expected[i] + "'");
        if (file.columns[i] != expected[i])
            throw SchemaError(path + ": expected column '" + expected[i] + "' but found '" +
                              file.columns[i] + "'");
    }
    if (!allow_extra && file.columns.size() > expected.size())
        throw SchemaError(path + ": unexpected column '" + file.columns[expected.size()] +
                          "'");
}

std::string meta_value(const CsvFile& file, const std::string& key) {
    for (const auto& [k, v] : file.meta)
        if (k == key) return v;
    return {};
}

}  // namespace

void write_spectrum_csv(const std::string& path, const NoiseSpectrum& spectrum) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# schema: " << kSpectrumSchema << "\n";
    out << "omega_rad_per_us,S_rad_per_us,component\n";
    const char* comp = spectrum.component == SpectrumComponent::Parallel ? "parallel"
                       : spectrum.component == SpectrumComponent::Perpendicular
                           ? "perpendicular"
                           : "total";
    for (std::size_t i = 0; i < spectrum.grid.size(); ++i)
        out << format_double(spectrum.grid[i]) << ',' << format_double(spectrum.values[i])
            << ',' << comp << "\n";
}

NoiseSpectrum read_spectrum_csv(const std::string& path) {
    const CsvFile file = read_csv(path, kSpectrumSchema);
    require_columns(file, {"omega_rad_per_us", "S_rad_per_us", "component"}, path);
    NoiseSpectrum spectrum;
    for (const auto& row : file.rows) {
        if (row.size() != 3) throw SchemaError(path + ": row with wrong field count");
        spectrum.grid.push_back(parse_double(row[0], path));
        spectrum.values.push_back(parse_double(row[1], path));
        if (row[2] == "parallel")
            spectrum.component = SpectrumComponent::Parallel;
        else if (row[2] == "perpendicular")
            spectrum.component = SpectrumComponent::Perpendicular;
        else if (row[2] == "total")
            spectrum.component = SpectrumComponent::Total;
        else
            throw SchemaError(path + ": unknown component '" + row[2] + "'");
    }
    if (spectrum.grid.size() < 2) throw SchemaError(path + ": spectrum has < 2 rows");
    return spectrum;
}

void write_coherence_csv(const std::string& path, const CoherenceCurve& curve,
                         const CoherenceCurve* oracle) {
    if (oracle && oracle->samples.size() != curve.samples.size())
        throw ConfigError("write_coherence_csv: oracle sample count differs");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "# schema: " << kCoherenceSchema << "\n";
    out << "# kind: " << (curve.kind == SequenceKind::Ramsey ? "ramsey" : "cpmg") << "\n";
    out << "# n_pi: " << curve.n_pi << "\n";
    out << "# field_b_tesla: " << format_double(curve.field_b_tesla) << "\n";
    out << "# seed: " << curve.seed << "\n";
    const char* prov = curve.provenance == Provenance::Quadrature    ? "quadrature"
                       : curve.provenance == Provenance::MonteCarlo ? "monte-carlo"
                                                                    : "external";
    out << "# provenance: " << prov << "\n";
    out << "T_us,C,sigma_C";
    if (oracle) out << ",C_mc,sigma_C_mc";
    out << "\n";
    for (std::size_t i = 0; i < curve.samples.size(); ++i) {
        const auto& s = curve.samples[i];
        out << format_double(s.time_us) << ',' << format_double(s.coherence) << ','
            << format_double(s.sigma);
        if (oracle)
            out << ',' << format_double(oracle->samples[i].coherence) << ','
                << format_double(oracle->samples[i].sigma);
        out << "\n";
    }
}

CoherenceCurve read_coherence_csv(const std::string& path) {
    const CsvFile file = read_csv(path, kCoherenceSchema);
    require_columns(file, {"T_us", "C", "sigma_C"}, path, /*allow_extra=*/true);
    if (file.columns.size() > 3) {
        const std::vector<std::string> oracle_cols = {"C_mc", "sigma_C_mc"};
        for (std::size_t i = 3; i < file.columns.size(); ++i) {
            if (i - 3 >= oracle_cols.size() || file.columns[i] != oracle_cols[i - 3])
                throw SchemaError(path + ": unexpected column '" + file.columns[i] + "'");
        }
    }

    CoherenceCurve curve;
    const std::string kind = meta_value(file, "kind");
    if (kind == "ramsey")
        curve.kind = SequenceKind::Ramsey;
    else if (kind == "cpmg")
        curve.kind = SequenceKind::Cpmg;
    else
        throw SchemaError(path + ": missing or unknown '# kind:' header");
    if (const std::string n = meta_value(file, "n_pi"); !n.empty())
        curve.n_pi = static_cast<int>(parse_double(n, path));
    if (const std::string b = meta_value(file, "field_b_tesla"); !b.empty())
        curve.field_b_tesla = parse_double(b, path);
    if (const std::string s = meta_value(file, "seed"); !s.empty())
        curve.seed = static_cast<std::uint64_t>(std::stoull(s));
    const std::string prov = meta_value(file, "provenance");
    curve.provenance = prov == "monte-carlo" ? Provenance::MonteCarlo
                       : prov == "quadrature" ? Provenance::Quadrature
                                              : Provenance::External;
    for (const auto& row : file.rows) {
        if (row.size() < 3) throw SchemaError(path + ": row with wrong field count");
        curve.samples.push_back({parse_double(row[0], path), parse_double(row[1], path),
                                 parse_double(row[2], path)});
    }
    return curve;
}

void write_decomposition_csv(const std::string& path, const DecompositionResult& result) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    long skipped = 0;
    for (char v : result.valid)
        if (!v) ++skipped;
    out << "# schema: " << kDecompositionSchema << "\n";
    out << "# method: "
        << (result.method == DecompositionMethod::Recursive ? "recursive" : "lsq") << "\n";
    if (!result.inputs.empty()) {
        out << "# inputs: ";
        for (std::size_t i = 0; i < result.inputs.size(); ++i)
            out << (i ? ";" : "") << result.inputs[i];
        out << "\n";
    }
    if (skipped > 0) out << "# skipped_missing_coverage: " << skipped << "\n";
    out << "f_MHz,S_rad_per_us,sigma_S\n";
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        if (!result.valid[i]) continue;
        out << format_double(rad_per_us_to_mhz(result.grid[i])) << ','
            << format_double(result.s_hat[i]) << ',' << format_double(result.sigma_s[i])
            << "\n";
    }
}

DecompositionResult read_decomposition_csv(const std::string& path) {
    const CsvFile file = read_csv(path, kDecompositionSchema);
    require_columns(file, {"f_MHz", "S_rad_per_us", "sigma_S"}, path);
    DecompositionResult result;
    result.method = meta_value(file, "method") == "lsq" ? DecompositionMethod::Lsq
                                                        : DecompositionMethod::Recursive;
    for (const auto& row : file.rows) {
        if (row.size() != 3) throw SchemaError(path + ": row with wrong field count");
        result.grid.push_back(mhz_to_rad_per_us(parse_double(row[0], path)));
        result.s_hat.push_back(parse_double(row[1], path));
        result.sigma_s.push_back(parse_double(row[2], path));
        result.s_raw.push_back(result.s_hat.back());
        result.valid.push_back(1);
    }
    return result;
}

}  // namespace spinspec
