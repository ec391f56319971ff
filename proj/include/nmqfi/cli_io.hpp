#pragma once

// Run configuration, command dispatch and CSV/JSON persistence for the
// command-line front end.

#include "nmqfi/bath_kernels.hpp"
#include "nmqfi/gaussian_dynamics.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace nmqfi {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Command { Kernels, Green, QfiCurve, ProtocolScan, Fit, Asymptotics, Figure };
enum class OutputFormat { Csv, Json };

std::string to_string(Command command);
Command parse_command(const std::string& text);

using Settings = std::map<std::string, std::string>;

struct RunConfig {
    Command command{Command::QfiCurve};
    BathSpec bath;
    BathBranch branch{BathBranch::NonMarkovian};
    std::string shape{"constant"};
    double r{5.0};
    double r_min{3.0};
    double r_max{4.5};
    double r_step{0.1};
    double t_tot{1.5707963267948966};
    double step{0.0}; // 0: default_kernel_step(bath)
    int n_max{0};     // 0: command-specific default
    std::string out;  // empty: stdout
    OutputFormat format{OutputFormat::Csv};
    std::string which{"fig1a"};
    unsigned threads{0};

    double resolved_step() const;
    ForceShape force_shape() const;
    std::vector<double> r_values() const;

    /// Every setting as key -> text; the inverse of from_settings().
    Settings settings() const;
    /// Validates each key; throws ConfigError naming the offending key.
    static RunConfig from_settings(const Settings& settings);
};

/// Flat `key = value` lines; '#' starts a comment. Throws ConfigError.
Settings read_config_file(const std::filesystem::path& path);

/// Parses `<command> [--flags]`; values from --config are overridden by flags.
RunConfig parse_command_line(int argc, const char* const* argv);

/// Column-oriented scan output.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    Settings extra; // additional metadata (fit coefficients, optimum, ...)
};

/// Computes the table for any command except Figure.
Table compute_table(const RunConfig& config);

/// Figure bundles: series name -> table.
std::map<std::string, Table> emit_figure_data(const RunConfig& config);

/// CSV: "# key=value ..." line, header line, then full-precision rows.
void write_csv(std::ostream& os, const Table& table, const Settings& config);
void write_json(std::ostream& os, const Table& table, const Settings& config);

/// Writes `path` via a temporary file and rename, plus `path.meta.json`.
void write_table_file(const std::filesystem::path& path, OutputFormat format, const Table& table,
                      const RunConfig& config);

/// Parses a CSV written by write_csv (comment line skipped).
Table read_csv(std::istream& is);

/// Reconstructs the run configuration recorded in a sidecar metadata file.
RunConfig config_from_metadata(const std::filesystem::path& meta_path);

std::filesystem::path metadata_path(const std::filesystem::path& data_path);

/// Executes the configured command; returns the process exit status.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full entry point: parse, run, map errors to exit codes (2: config, 1: numerical).
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace nmqfi
