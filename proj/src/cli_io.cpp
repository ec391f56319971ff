#include "nmqfi/cli_io.hpp"

#include "nmqfi/errors.hpp"
#include "nmqfi/protocol_optimizer.hpp"
#include "nmqfi/qfi_engine.hpp"
#include "nmqfi/scaling_fit.hpp"
#include "nmqfi/volterra_green.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <unistd.h>

namespace nmqfi {

namespace {

const std::vector<std::string> kKeys{"command", "gamma", "lambda", "temperature", "bath",    "shape",
                                     "r",       "r-min", "r-max",  "r-step",      "t-tot",   "step",
                                     "n-max",   "out",   "format", "which",       "threads"};

const std::map<std::string, std::string> kKeyHelp{
    {"gamma", "damping strength (0.1)"},
    {"lambda", "bath cutoff frequency (10)"},
    {"temperature", "bath temperature (0)"},
    {"bath", "nonmarkovian | markovian | ideal"},
    {"shape", "force profile: constant | resonant"},
    {"r", "squeeze magnitude (5)"},
    {"r-min", "sweep start (3)"},
    {"r-max", "sweep end (4.5)"},
    {"r-step", "sweep step (0.1)"},
    {"t-tot", "total probing time (pi/2)"},
    {"step", "grid step; 0 picks min(0.005, 0.2/lambda)"},
    {"n-max", "largest window count; 0 picks a default"},
    {"out", "output file, or directory for figure; stdout if empty"},
    {"format", "csv | json"},
    {"which", "figure bundle: fig1a | fig1b | fig2a | fig2b"},
    {"threads", "worker threads; 0 uses all cores"},
};

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_cell(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", v);
    return buf;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + text + "'");
    }
}

long parse_integer(const std::string& key, const std::string& text)
{
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + text + "'");
    }
}

void require(bool ok, const std::string& key, const std::string& what)
{
    if (!ok) throw ConfigError(key, what);
}

ProtocolConfig protocol_config(const RunConfig& config, BathBranch branch, const ForceShape& shape, double r)
{
    ProtocolConfig pc;
    pc.bath = config.bath;
    pc.branch = branch;
    pc.shape = shape;
    pc.r = r;
    pc.t_tot = config.t_tot;
    pc.max_step = config.resolved_step();
    pc.n_max = config.n_max;
    return pc;
}

Table kernels_table(const RunConfig& config)
{
    const auto table = tabulate_kernels(config.bath, config.resolved_step(), config.t_tot);
    Table out;
    out.columns = {"t", "gamma", "nu"};
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out.rows.push_back({table.time(i), table.gamma_of_t[k], table.nu_of_t[k]});
    }
    const auto moments = nu_moments(config.bath);
    out.extra["nu0"] = format_double(moments.nu0);
    out.extra["nu2"] = format_double(moments.nu2);
    return out;
}

Table green_table(const RunConfig& config)
{
    const auto kernels = tabulate_kernels(config.bath, config.resolved_step(), config.t_tot);
    const auto green = solve_green(config.bath, kernels, config.t_tot);
    Table out;
    out.columns = {"t", "G", "Gdot", "Gddot"};
    for (std::size_t i = 0; i < green.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out.rows.push_back({green.time(i), green.g[k], green.gdot[k], green.gddot[k]});
    }
    if (green.size() > 10) out.extra["g3"] = format_double(series_coefficients(green).g3);
    return out;
}

Table qfi_curve_table(const RunConfig& config, BathBranch branch, const ForceShape& shape, double r)
{
    const double h = config.resolved_step();
    Table out;
    out.columns = {"t", "H_opt", "theta_opt"};
    std::shared_ptr<const GreenTable> green;
    std::shared_ptr<const NoiseMoments> moments;
    std::size_t points = 0;
    if (branch == BathBranch::NonMarkovian) {
        const auto kernels = tabulate_kernels(config.bath, h, config.t_tot);
        green = std::make_shared<const GreenTable>(solve_green(config.bath, kernels, config.t_tot));
        moments = std::make_shared<const NoiseMoments>(accumulate_noise_moments(*green, kernels));
        points = green->size();
    } else {
        points = static_cast<std::size_t>(std::ceil(config.t_tot / h - 1e-9)) + 1;
    }
    for (std::size_t i = 0; i < points; ++i) {
        const double t = static_cast<double>(i) * h;
        const WindowDynamics window = branch == BathBranch::NonMarkovian ? WindowDynamics::nonmarkovian(green, moments, i)
                                      : branch == BathBranch::Markovian  ? WindowDynamics::markovian(config.bath, t)
                                                                         : WindowDynamics::ideal(t);
        const QfiResult res = optimize_theta(window, shape, 0.0, r);
        out.rows.push_back({t, res.h, res.theta_opt});
    }
    return out;
}

Table protocol_scan_table(const RunConfig& config, BathBranch branch, const ForceShape& shape, double r)
{
    const ProtocolConfig pc = protocol_config(config, branch, shape, r);
    const int n_max = pc.n_max > 0 ? pc.n_max : default_n_max(pc);
    std::vector<int> ns(static_cast<std::size_t>(n_max));
    for (int n = 1; n <= n_max; ++n) ns[static_cast<std::size_t>(n - 1)] = n;
    WindowCache cache(pc.bath, pc.t_tot, pc.max_step);
    const auto curve = protocol_curve(pc, ns, cache, config.threads);
    Table out;
    out.columns = {"N", "tau", "H"};
    std::pair<int, double> best{1, -1.0};
    for (const auto& [n, h] : curve) {
        out.rows.push_back({static_cast<double>(n), pc.t_tot / n, h});
        if (h > best.second) best = {n, h};
    }
    out.extra["n_opt"] = std::to_string(best.first);
    out.extra["h_opt"] = format_double(best.second);
    out.extra["n_max"] = std::to_string(n_max);
    return out;
}

std::vector<SweepPoint> sweep(const RunConfig& config, BathBranch branch, const ForceShape& shape,
                              WindowCache& cache)
{
    return sweep_squeezing(protocol_config(config, branch, shape, 0.0), config.r_values(), cache, config.threads);
}

Table fit_table(const RunConfig& config)
{
    WindowCache cache(config.bath, config.t_tot, config.resolved_step());
    const auto points = sweep(config, config.branch, config.force_shape(), cache);
    Table out;
    out.columns = {"r", "E", "N_opt", "H_opt", "converged"};
    std::vector<double> e, n, h;
    for (const auto& p : points) {
        out.rows.push_back({p.r, p.energy, static_cast<double>(p.n_opt), p.h_opt, p.converged ? 1.0 : 0.0});
        e.push_back(p.energy);
        n.push_back(p.n_opt);
        h.push_back(p.h_opt);
    }
    if (points.size() < 6) {
        out.extra["fit"] = "skipped: fewer than 6 sweep points";
        return out;
    }
    auto record = [&](const std::string& name, double value) { out.extra[name] = format_double(value); };
    switch (config.branch) {
    case BathBranch::NonMarkovian: {
        const auto fn = fit_scaling(e, n, ScalingModel::PowerLaw, 0.5);
        const auto fh = fit_scaling(e, h, ScalingModel::PowerLaw, 0.5);
        record("d0", fn.coefficients[0]);
        record("d1", fh.coefficients[0]);
        record("d0_r_squared", fn.r_squared);
        record("d1_r_squared", fh.r_squared);
        break;
    }
    case BathBranch::Markovian: {
        const auto fn = fit_scaling(e, n, ScalingModel::PowerLaw, 1.0 / 3.0);
        const auto fh = fit_scaling(e, h, ScalingModel::ShiftedPower, -2.0 / 3.0);
        record("c0", fn.coefficients[0]);
        record("c1", fh.coefficients[0]);
        record("c2", fh.coefficients[1]);
        record("c1_prime", total_energy_coefficients(1.0, 0.0, fn.coefficients[0], fh.coefficients[0],
                                                     fh.coefficients[1]).c1_prime);
        break;
    }
    case BathBranch::Ideal: {
        const auto fh = fit_scaling(e, h, ScalingModel::PowerLaw, 1.0);
        record("h_per_energy", fh.coefficients[0]);
        break;
    }
    }
    return out;
}

Table asymptotics_table(const RunConfig& config)
{
    const double nu0 = nu_moments(config.bath).nu0;
    if (!(nu0 > 0.0)) throw ConfigError("gamma", "asymptotics need a bath with nu0 > 0");
    const ForceShape shape = config.force_shape();
    Table out;
    out.columns = {"r", "E", "xi", "N_asym", "H_asym", "tau_opt", "valid"};
    for (const double r : config.r_values()) {
        const double xi = std::exp(2.0 * r);
        const auto a = asymptotic_qfi(config.t_tot, shape, xi, nu0, config.bath);
        out.rows.push_back({r, squeeze_energy(r), xi, a.n_opt, a.h_opt, a.tau_opt, a.valid ? 1.0 : 0.0});
    }
    out.extra["nu0"] = format_double(nu0);
    return out;
}

} // namespace

std::string to_string(Command command)
{
    switch (command) {
    case Command::Kernels:
        return "kernels";
    case Command::Green:
        return "green";
    case Command::QfiCurve:
        return "qfi-curve";
    case Command::ProtocolScan:
        return "protocol-scan";
    case Command::Fit:
        return "fit";
    case Command::Asymptotics:
        return "asymptotics";
    case Command::Figure:
        return "figure";
    }
    return "unknown";
}

Command parse_command(const std::string& text)
{
    for (const Command c : {Command::Kernels, Command::Green, Command::QfiCurve, Command::ProtocolScan, Command::Fit,
                            Command::Asymptotics, Command::Figure})
        if (to_string(c) == text) return c;
    throw ConfigError("command", "unknown command '" + text + "'");
}

double RunConfig::resolved_step() const { return step > 0.0 ? step : default_kernel_step(bath); }

ForceShape RunConfig::force_shape() const
{
    return shape == "resonant" ? ForceShape::resonant() : ForceShape::constant();
}

std::vector<double> RunConfig::r_values() const
{
    std::vector<double> rs;
    const auto count = static_cast<long>(std::floor((r_max - r_min) / r_step + 1e-9));
    for (long i = 0; i <= count; ++i) rs.push_back(r_min + static_cast<double>(i) * r_step);
    return rs;
}

Settings RunConfig::settings() const
{
    Settings s;
    s["command"] = to_string(command);
    s["gamma"] = format_double(bath.gamma);
    s["lambda"] = format_double(bath.lambda);
    s["temperature"] = format_double(bath.temperature);
    s["bath"] = to_string(branch);
    s["shape"] = shape;
    s["r"] = format_double(r);
    s["r-min"] = format_double(r_min);
    s["r-max"] = format_double(r_max);
    s["r-step"] = format_double(r_step);
    s["t-tot"] = format_double(t_tot);
    s["step"] = format_double(step);
    s["n-max"] = std::to_string(n_max);
    s["out"] = out;
    s["format"] = format == OutputFormat::Json ? "json" : "csv";
    s["which"] = which;
    s["threads"] = std::to_string(threads);
    return s;
}

RunConfig RunConfig::from_settings(const Settings& settings)
{
    RunConfig c;
    for (const auto& [key, value] : settings) {
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) throw ConfigError(key, "unknown key");
        if (key == "command") {
            c.command = parse_command(value);
        } else if (key == "gamma") {
            c.bath.gamma = parse_number(key, value);
            require(c.bath.gamma >= 0.0, key, "must be >= 0");
        } else if (key == "lambda") {
            c.bath.lambda = parse_number(key, value);
            require(c.bath.lambda > 0.0, key, "must be > 0");
        } else if (key == "temperature") {
            c.bath.temperature = parse_number(key, value);
            require(c.bath.temperature >= 0.0, key, "must be >= 0");
        } else if (key == "bath") {
            try {
                c.branch = parse_branch(value);
            } catch (const std::invalid_argument&) {
                throw ConfigError(key, "expected ideal, markovian or nonmarkovian, got '" + value + "'");
            }
        } else if (key == "shape") {
            require(value == "constant" || value == "resonant", key, "expected constant or resonant");
            c.shape = value;
        } else if (key == "r") {
            c.r = parse_number(key, value);
            require(c.r >= 0.0, key, "must be >= 0");
        } else if (key == "r-min") {
            c.r_min = parse_number(key, value);
            require(c.r_min >= 0.0, key, "must be >= 0");
        } else if (key == "r-max") {
            c.r_max = parse_number(key, value);
        } else if (key == "r-step") {
            c.r_step = parse_number(key, value);
            require(c.r_step > 0.0, key, "must be > 0");
        } else if (key == "t-tot") {
            c.t_tot = parse_number(key, value);
            require(c.t_tot > 0.0, key, "must be > 0");
        } else if (key == "step") {
            c.step = parse_number(key, value);
            require(c.step >= 0.0, key, "must be >= 0 (0 selects the default)");
        } else if (key == "n-max") {
            const long n = parse_integer(key, value);
            require(n >= 0 && n <= 10'000'000, key, "must be in [0, 1e7] (0 selects the default)");
            c.n_max = static_cast<int>(n);
        } else if (key == "out") {
            c.out = value;
        } else if (key == "format") {
            require(value == "csv" || value == "json", key, "expected csv or json");
            c.format = value == "json" ? OutputFormat::Json : OutputFormat::Csv;
        } else if (key == "which") {
            require(value == "fig1a" || value == "fig1b" || value == "fig2a" || value == "fig2b", key,
                    "expected fig1a, fig1b, fig2a or fig2b");
            c.which = value;
        } else if (key == "threads") {
            const long n = parse_integer(key, value);
            require(n >= 0 && n <= 1024, key, "must be in [0, 1024]");
            c.threads = static_cast<unsigned>(n);
        }
    }
    require(c.r_max >= c.r_min, "r-max", "must be >= r-min");
    require(c.resolved_step() < c.t_tot, "step", "must be smaller than t-tot");
    return c;
}

Settings read_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
    Settings s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config", path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) throw ConfigError(key, "unknown key");
        s[key] = trim(line.substr(eq + 1));
    }
    return s;
}

namespace {

struct HelpRequested {
    std::string text;
};

RunConfig parse_arguments(int argc, const char* const* argv)
{
    CLI::App app{"Optimal force-estimation limits for a damped oscillator in a memory-kernel bath", "nmqfi"};
    std::string command;
    std::string config_file;
    std::map<std::string, std::string> values;
    app.add_option("command", command, "kernels | green | qfi-curve | protocol-scan | fit | asymptotics | figure");
    app.add_option("--config", config_file, "flat key = value file; flags take precedence");
    std::map<std::string, CLI::Option*> options;
    for (const auto& key : kKeys) {
        if (key == "command") continue;
        options[key] = app.add_option("--" + key, values[key], kKeyHelp.at(key));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::ParseError& e) {
        throw ConfigError("arguments", e.what());
    }

    Settings settings;
    if (!config_file.empty()) settings = read_config_file(config_file);
    for (const auto& [key, opt] : options)
        if (opt->count() > 0) settings[key] = values[key];
    if (!command.empty()) settings["command"] = command;
    if (!settings.count("command")) throw ConfigError("command", "no command given");
    return RunConfig::from_settings(settings);
}

} // namespace

RunConfig parse_command_line(int argc, const char* const* argv) { return parse_arguments(argc, argv); }

Table compute_table(const RunConfig& config)
{
    switch (config.command) {
    case Command::Kernels:
        return kernels_table(config);
    case Command::Green:
        return green_table(config);
    case Command::QfiCurve:
        return qfi_curve_table(config, config.branch, config.force_shape(), config.r);
    case Command::ProtocolScan:
        return protocol_scan_table(config, config.branch, config.force_shape(), config.r);
    case Command::Fit:
        return fit_table(config);
    case Command::Asymptotics:
        return asymptotics_table(config);
    case Command::Figure:
        break;
    }
    throw ConfigError("command", "figure output is produced by emit_figure_data");
}

std::map<std::string, Table> emit_figure_data(const RunConfig& config)
{
    std::map<std::string, Table> series;
    const ForceShape constant = ForceShape::constant();
    if (config.which == "fig1a") {
        for (const BathBranch b : {BathBranch::NonMarkovian, BathBranch::Markovian})
            for (const ForceShape& s : {ForceShape::constant(), ForceShape::resonant()})
                series["fig1a_" + to_string(b) + "_" + s.name()] = qfi_curve_table(config, b, s, config.r);
    } else if (config.which == "fig1b") {
        RunConfig c = config;
        if (c.n_max == 0) c.n_max = 80;
        for (const double r : {2.50, 2.66, 2.80}) {
            char name[32];
            std::snprintf(name, sizeof name, "fig1b_r%.2f", r);
            series[name] = protocol_scan_table(c, BathBranch::NonMarkovian, constant, r);
        }
    } else {
        const bool fig2b = config.which == "fig2b";
        WindowCache cache(config.bath, config.t_tot, config.resolved_step());
        std::vector<BathBranch> branches{BathBranch::NonMarkovian, BathBranch::Markovian};
        if (fig2b) branches.insert(branches.begin(), BathBranch::Ideal);
        for (const BathBranch b : branches) {
            Table t;
            t.columns = {"r", "E", fig2b ? "H_opt" : "N_opt"};
            for (const auto& p : sweep(config, b, constant, cache))
                t.rows.push_back({p.r, p.energy, fig2b ? p.h_opt : static_cast<double>(p.n_opt)});
            series[config.which + "_" + to_string(b)] = std::move(t);
        }
    }
    return series;
}

void write_csv(std::ostream& os, const Table& table, const Settings& config)
{
    os << '#';
    for (const auto& [k, v] : config) os << ' ' << k << '=' << v;
    os << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << '\n';
    }
}

void write_json(std::ostream& os, const Table& table, const Settings& config)
{
    nlohmann::json j;
    j["config"] = config;
    j["columns"] = table.columns;
    j["rows"] = table.rows;
    j["extra"] = table.extra;
    os << j.dump(1) << '\n';
}

std::filesystem::path metadata_path(const std::filesystem::path& data_path)
{
    return std::filesystem::path(data_path.string() + ".meta.json");
}

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& contents)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        f << contents;
        if (!f.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

void write_table_file(const std::filesystem::path& path, OutputFormat format, const Table& table,
                      const RunConfig& config)
{
    const Settings settings = config.settings();
    std::ostringstream data;
    if (format == OutputFormat::Json)
        write_json(data, table, settings);
    else
        write_csv(data, table, settings);
    atomic_write(path, data.str());

    nlohmann::json meta;
    meta["tool"] = "nmqfi";
    meta["version"] = kToolVersion;
    meta["command"] = to_string(config.command);
    meta["config"] = settings;
    meta["grid_step"] = config.resolved_step();
    meta["columns"] = table.columns;
    meta["rows"] = table.rows.size();
    meta["extra"] = table.extra;
    atomic_write(metadata_path(path), meta.dump(1) + "\n");
}

Table read_csv(std::istream& is)
{
    Table t;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header) {
            t.columns = cells;
            header = true;
            continue;
        }
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
        t.rows.push_back(std::move(row));
    }
    return t;
}

RunConfig config_from_metadata(const std::filesystem::path& meta_path)
{
    std::ifstream in(meta_path);
    if (!in) throw ConfigError("config", "cannot open '" + meta_path.string() + "'");
    const auto meta = nlohmann::json::parse(in);
    return RunConfig::from_settings(meta.at("config").get<Settings>());
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err)
{
    if (config.command == Command::Figure) {
        const std::filesystem::path dir = config.out.empty() ? "." : config.out;
        const char* ext = config.format == OutputFormat::Json ? ".json" : ".csv";
        for (const auto& [name, table] : emit_figure_data(config)) {
            const auto path = dir / (name + ext);
            write_table_file(path, config.format, table, config);
            out << "wrote " << path.string() << " (" << table.rows.size() << " rows)\n";
        }
        return 0;
    }
    const Table table = compute_table(config);
    if (config.out.empty()) {
        if (config.format == OutputFormat::Json)
            write_json(out, table, config.settings());
        else
            write_csv(out, table, config.settings());
    } else {
        write_table_file(config.out, config.format, table, config);
        out << "wrote " << config.out << " (" << table.rows.size() << " rows)\n";
    }
    for (const auto& [k, v] : table.extra) err << k << " = " << v << '\n';
    return 0;
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    try {
        return run(parse_arguments(argc, argv), out, err);
    } catch (const HelpRequested& h) {
        out << h.text;
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace nmqfi
