#pragma once

// Run configuration (JSON, strict, explicit units), experiment dispatch and
// deterministic CSV/JSON emission for the command-line tool.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rifling/dressed.hpp"
#include "rifling/errors.hpp"
#include "rifling/experiments.hpp"
#include "rifling/fit.hpp"
#include "rifling/model.hpp"
#include "rifling/peaks.hpp"
#include "rifling/presets.hpp"
#include "rifling/tomo.hpp"
#include "rifling/units.hpp"

#ifndef RIFLING_VERSION
#define RIFLING_VERSION "0.1.0"
#endif

namespace rifling::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitPartial = 4;

/// Invalid configuration; `path` locates the offending key (e.g. params.qubits[0].chi).
class ConfigError : public InvalidArgument {
public:
    ConfigError(std::string path, const std::string& what)
        : InvalidArgument(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// ---------------------------------------------------------------- numbers

/// Shortest decimal that round-trips.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // no "-0"
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

/// Axis values converted from config units, rounded to 12 significant
/// digits so that "2 MHz" prints as 2 rather than 1.9999999999999998.
inline std::string format_axis(double v) {
    if (!std::isfinite(v)) return format_number(v);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return format_number(std::strtod(buf, nullptr));
}

enum class Dimension { Frequency, Rate, Time, Angle };

inline const char* dimension_name(Dimension d) {
    switch (d) {
        case Dimension::Frequency: return "frequency (Hz, kHz, MHz, GHz, rad/s, rad/us, rad/ns)";
        case Dimension::Rate: return "rate (1/s, 1/ms, 1/us, 1/ns)";
        case Dimension::Time: return "time (s, ms, us, ns)";
        case Dimension::Angle: return "angle (rad, deg, pi)";
    }
    return "";
}

/// "4.1 MHz" -> internal units (rad/us, 1/us, us, rad). Frequencies are f = omega/2pi.
inline double parse_quantity(const std::string& text, Dimension dim, const std::string& path) {
    static const std::map<std::string, double> freq{{"Hz", units::kTwoPi * 1e-6}, {"kHz", units::kTwoPi * 1e-3},
                                                    {"MHz", units::kTwoPi},        {"GHz", units::kTwoPi * 1e3},
                                                    {"rad/s", 1e-6},               {"rad/us", 1.0},
                                                    {"rad/ns", 1e3}};
    static const std::map<std::string, double> rate{{"1/s", 1e-6}, {"1/ms", 1e-3}, {"1/us", 1.0}, {"1/ns", 1e3}};
    static const std::map<std::string, double> time{{"s", 1e6}, {"ms", 1e3}, {"us", 1.0}, {"ns", 1e-3}};
    static const std::map<std::string, double> angle{{"rad", 1.0}, {"deg", std::numbers::pi / 180.0}, {"pi", std::numbers::pi}};

    const auto first = text.find_first_not_of(" \t");
    if (first == std::string::npos) throw ConfigError(path, "empty quantity");
    const auto sep = text.find_first_of(" \t", first);
    if (sep == std::string::npos) throw ConfigError(path, "missing unit in \"" + text + "\"; expected " + dimension_name(dim));
    const auto ufirst = text.find_first_not_of(" \t", sep);
    const auto ulast = text.find_last_not_of(" \t");
    if (ufirst == std::string::npos) throw ConfigError(path, "missing unit in \"" + text + "\"");
    const std::string num = text.substr(first, sep - first);
    const std::string unit = text.substr(ufirst, ulast - ufirst + 1);

    double v = 0.0;
    const char* b = num.data();
    if (!num.empty() && num[0] == '+') ++b;
    const auto r = std::from_chars(b, num.data() + num.size(), v);
    if (r.ec != std::errc{} || r.ptr != num.data() + num.size() || !std::isfinite(v))
        throw ConfigError(path, "bad number \"" + num + "\"");

    const auto& table = dim == Dimension::Frequency ? freq : dim == Dimension::Rate ? rate : dim == Dimension::Time ? time : angle;
    const auto it = table.find(unit);
    if (it == table.end()) throw ConfigError(path, "unknown unit \"" + unit + "\"; expected " + dimension_name(dim));
    return v * it->second;
}

// ---------------------------------------------------------------- strict reader

class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    [[nodiscard]] std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    const json& get(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(key_path(key), "missing required key");
        used_.insert(key);
        return j_.at(key);
    }

    double quantity(const std::string& key, Dimension d) {
        const json& v = get(key);
        if (!v.is_string()) throw ConfigError(key_path(key), "expected a quantity string with a unit, e.g. \"4.1 MHz\"");
        return parse_quantity(v.get<std::string>(), d, key_path(key));
    }
    double quantity_or(const std::string& key, Dimension d, double fallback) { return has(key) ? quantity(key, d) : fallback; }
    std::optional<double> optional_quantity(const std::string& key, Dimension d) {
        if (!has(key)) return std::nullopt;
        return quantity(key, d);
    }

    double number(const std::string& key) {
        const json& v = get(key);
        if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
        return v.get<double>();
    }
    double number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::int64_t integer(const std::string& key) {
        const json& v = get(key);
        if (!v.is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
        return v.get<std::int64_t>();
    }
    std::size_t count(const std::string& key) {
        const auto v = integer(key);
        if (v < 0) throw ConfigError(key_path(key), "must be >= 0");
        return static_cast<std::size_t>(v);
    }
    std::size_t count_or(const std::string& key, std::size_t fallback) { return has(key) ? count(key) : fallback; }

    std::string string(const std::string& key) {
        const json& v = get(key);
        if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
        return v.get<std::string>();
    }
    std::string choice(const std::string& key, const std::vector<std::string>& allowed) {
        const std::string s = string(key);
        if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(key_path(key), "unknown value \"" + s + "\"; expected one of " + list);
        }
        return s;
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = get(key);
        if (!v.is_array() || v.empty()) throw ConfigError(key_path(key), "expected a non-empty array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    /// Either a list of quantities or {"start", "stop", "count" | "step", "spacing": "linear" | "log"}.
    std::vector<double> grid(const std::string& key, Dimension d) {
        const json& v = get(key);
        const std::string p = key_path(key);
        std::vector<double> out;
        if (v.is_array()) {
            if (v.empty()) throw ConfigError(p, "empty grid");
            for (std::size_t i = 0; i < v.size(); ++i) {
                const std::string ip = p + "[" + std::to_string(i) + "]";
                if (!v[i].is_string()) throw ConfigError(ip, "expected a quantity string with a unit");
                out.push_back(parse_quantity(v[i].get<std::string>(), d, ip));
            }
            return out;
        }
        Section r(v, p);
        const double start = r.quantity("start", d), stop = r.quantity("stop", d);
        const std::string spacing = r.has("spacing") ? r.choice("spacing", {"linear", "log"}) : "linear";
        std::size_t n = 0;
        if (r.has("count") == r.has("step")) throw ConfigError(p, "give exactly one of count or step");
        if (r.has("count")) {
            n = r.count("count");
        } else {
            if (spacing == "log") throw ConfigError(p + ".step", "log grids take a count");
            const double step = r.quantity("step", d);
            if (!(step > 0)) throw ConfigError(p + ".step", "must be positive");
            const double k = (stop - start) / step;
            if (k < 0 || std::abs(k - std::round(k)) > 1e-6) throw ConfigError(p + ".step", "does not divide stop - start");
            n = static_cast<std::size_t>(std::llround(k)) + 1;
        }
        r.finish();
        if (n == 0) throw ConfigError(p + ".count", "must be >= 1");
        if (n > 1000000) throw ConfigError(p + ".count", "grid too large");
        if (spacing == "log" && !(start > 0 && stop > 0)) throw ConfigError(p, "log grid needs positive bounds");
        for (std::size_t i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            out.push_back(spacing == "log" ? start * std::pow(stop / start, f) : start + f * (stop - start));
        }
        if (n > 1) out.back() = stop;
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

// ---------------------------------------------------------------- config

enum class Experiment { Spectroscopy, Incoherent, RabiCurve, Ramsey, Tomo, Dressed, SteadyState };

inline const std::vector<std::pair<std::string, Experiment>>& experiment_names() {
    static const std::vector<std::pair<std::string, Experiment>> v{
        {"spectroscopy", Experiment::Spectroscopy}, {"incoherent", Experiment::Incoherent},
        {"rabi-curve", Experiment::RabiCurve},       {"ramsey", Experiment::Ramsey},
        {"tomo", Experiment::Tomo},                  {"dressed", Experiment::Dressed},
        {"steady-state", Experiment::SteadyState}};
    return v;
}

inline std::string experiment_name(Experiment e) {
    for (const auto& [n, x] : experiment_names())
        if (x == e) return n;
    return "";
}

struct SweepConfig {
    std::vector<double> detuning;  // rad/us
    std::vector<double> axis;      // Rabi (rad/us) or Gamma_updown (1/us)
    double drive_amp = 0.0;
    std::size_t qubit = 0;
    double prominence = kDefaultPeakProminence;
};

struct RabiCurveConfig {
    std::vector<double> rabi;
    std::vector<double> photons;
    RifledRabiOptions options;
};

struct RamseyConfig {
    std::vector<double> theta;
    RiflingAxis axis = RiflingAxis::None;
    RamseyOptions options;
};

struct TomoConfig {
    RifleTarget target = RifleTarget::None;
    double duration = 0.0;
    TomographyOptions options;
};

struct DressedConfig {
    std::vector<double> rabi;
    std::size_t qubit = 0;
};

struct SteadyStateConfig {};

struct RunConfig {
    Experiment experiment = Experiment::SteadyState;
    SystemParams params;
    std::variant<SweepConfig, RabiCurveConfig, RamseyConfig, TomoConfig, DressedConfig, SteadyStateConfig> protocol;
    std::size_t workers = 0;
    std::string output;
    std::int64_t seed = 0;
    std::string hash;  // of the canonical configuration text
};

/// FNV-1a 64 of the canonical (sorted-key) serialization, as 16 hex digits.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline QubitParams parse_qubit(const json& j, const std::string& path) {
    Section s(j, path);
    QubitParams q;
    q.chi = s.quantity("chi", Dimension::Frequency);
    q.gamma_down = s.quantity("gamma_down", Dimension::Rate);
    q.gamma_up = s.quantity("gamma_up", Dimension::Rate);
    q.gamma_phi = s.quantity("gamma_phi", Dimension::Rate);
    q.delta_omega_q = s.quantity_or("delta_omega_q", Dimension::Frequency, 0.0);
    q.rabi = s.quantity_or("rabi", Dimension::Frequency, 0.0);
    q.rabi_phase = s.quantity_or("rabi_phase", Dimension::Angle, 0.0);
    q.n_levels = s.count_or("n_levels", 2);
    if (q.n_levels > 2) {
        q.anharmonicity = s.quantity("anharmonicity", Dimension::Frequency);
        q.g0 = s.quantity("g0", Dimension::Frequency);
    }
    s.finish();
    return q;
}

inline SystemParams parse_params(const json& j, const std::string& path) {
    Section s(j, path);
    SystemParams p;
    const json& qs = s.get("qubits");
    if (!qs.is_array() || qs.empty()) throw ConfigError(s.key_path("qubits"), "expected a non-empty array");
    for (std::size_t i = 0; i < qs.size(); ++i) p.qubits.push_back(parse_qubit(qs[i], s.key_path("qubits") + "[" + std::to_string(i) + "]"));
    Section r(s.get("resonator"), s.key_path("resonator"));
    p.resonator.kappa = r.quantity("kappa", Dimension::Frequency);
    p.resonator.fock_levels = r.count("fock_levels");
    p.resonator.delta_omega_r = r.quantity_or("delta_omega_r", Dimension::Frequency, 0.0);
    p.resonator.drive_amp = r.quantity_or("drive_amp", Dimension::Frequency, 0.0);
    r.finish();
    s.finish();
    try {
        validate(p);
    } catch (const InvalidArgument& e) {
        throw ConfigError(path, e.what());
    }
    return p;
}

inline std::size_t qubit_index(Section& s, const SystemParams& p) {
    const std::size_t q = s.count_or("qubit", 0);
    if (q >= p.qubits.size()) throw ConfigError(s.key_path("qubit"), "qubit index out of range");
    return q;
}

inline RunConfig parse_config(const json& root) {
    RunConfig c;
    c.hash = config_hash(root);
    Section s(root, "");
    const std::string exp = s.string("experiment");
    bool known = false;
    for (const auto& [n, e] : experiment_names())
        if (n == exp) {
            c.experiment = e;
            known = true;
        }
    if (!known) {
        std::string list;
        for (const auto& [n, e] : experiment_names()) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("experiment", "unknown experiment \"" + exp + "\"; expected one of " + list);
    }
    c.params = parse_params(s.get("params"), "params");
    c.workers = s.count_or("workers", 0);
    c.output = s.has("output") ? s.string("output") : exp;
    c.seed = s.has("seed") ? s.integer("seed") : 0;

    const bool has_section = s.has(exp);
    static const json empty = json::object();
    Section e(has_section ? s.get(exp) : empty, exp);
    switch (c.experiment) {
        case Experiment::Spectroscopy:
        case Experiment::Incoherent: {
            SweepConfig sw;
            sw.detuning = e.grid("detuning", Dimension::Frequency);
            sw.axis = c.experiment == Experiment::Spectroscopy ? e.grid("rabi", Dimension::Frequency)
                                                               : e.grid("gamma_updown", Dimension::Rate);
            sw.drive_amp = e.quantity("drive_amp", Dimension::Frequency);
            sw.qubit = qubit_index(e, c.params);
            sw.prominence = e.number_or("peak_prominence", kDefaultPeakProminence);
            if (!(sw.prominence >= 0 && sw.prominence <= 1)) throw ConfigError(e.key_path("peak_prominence"), "must lie in [0, 1]");
            c.protocol = sw;
            break;
        }
        case Experiment::RabiCurve: {
            RabiCurveConfig r;
            r.rabi = e.grid("rabi", Dimension::Frequency);
            r.photons = e.numbers("photons");
            for (double n : r.photons)
                if (!(n >= 0)) throw ConfigError(e.key_path("photons"), "photon setpoints must be >= 0");
            r.options.t_max = e.quantity("t_max", Dimension::Time);
            r.options.dt = e.quantity_or("dt", Dimension::Time, r.options.dt);
            r.options.fit.t_start = e.quantity_or("fit_start", Dimension::Time, r.options.fit.t_start);
            r.options.probe_detuning = e.optional_quantity("probe_detuning", Dimension::Frequency);
            r.options.timing.cavity_delay = e.quantity_or("cavity_delay", Dimension::Time, r.options.timing.cavity_delay);
            r.options.timing.cavity_early_stop = e.quantity_or("cavity_early_stop", Dimension::Time, r.options.timing.cavity_early_stop);
            r.options.workers = c.workers;
            if (!(r.options.t_max > 0 && r.options.dt > 0)) throw ConfigError(e.key_path("t_max"), "t_max and dt must be positive");
            c.protocol = r;
            break;
        }
        case Experiment::Ramsey: {
            RamseyConfig r;
            r.theta = e.grid("theta", Dimension::Angle);
            const std::string axis = e.choice("axis", {"x", "y", "none"});
            r.axis = axis == "x" ? RiflingAxis::X : axis == "y" ? RiflingAxis::Y : RiflingAxis::None;
            auto& o = r.options;
            o.photons = e.number("photons");
            if (!(o.photons >= 0)) throw ConfigError(e.key_path("photons"), "must be >= 0");
            o.probe_detuning = e.optional_quantity("probe_detuning", Dimension::Frequency);
            o.rifle_rabi = e.quantity_or("rifle_rabi", Dimension::Frequency, o.rifle_rabi);
            o.rifle_start = e.quantity_or("rifle_start", Dimension::Time, o.rifle_start);
            o.rifle_duration = e.quantity_or("rifle_duration", Dimension::Time, o.rifle_duration);
            o.hold = e.quantity_or("hold", Dimension::Time, o.hold);
            o.cavity_start = e.quantity_or("cavity_start", Dimension::Time, o.cavity_start);
            o.cavity_duration = e.quantity_or("cavity_duration", Dimension::Time, o.cavity_duration);
            o.first_phase = e.quantity_or("first_phase", Dimension::Angle, o.first_phase);
            o.qubit = qubit_index(e, c.params);
            c.protocol = r;
            break;
        }
        case Experiment::Tomo: {
            TomoConfig t;
            const std::string target = e.choice("target", {"qubit1", "qubit2", "none"});
            t.target = target == "qubit1" ? RifleTarget::Qubit1 : target == "qubit2" ? RifleTarget::Qubit2 : RifleTarget::None;
            t.duration = e.quantity("duration", Dimension::Time);
            auto& o = t.options;
            o.photons = e.number("photons");
            if (!(o.photons >= 0)) throw ConfigError(e.key_path("photons"), "must be >= 0");
            o.probe_detuning = e.optional_quantity("probe_detuning", Dimension::Frequency);
            o.rifle_rabi = e.quantity_or("rifle_rabi", Dimension::Frequency, o.rifle_rabi);
            o.rifle_start = e.quantity_or("rifle_start", Dimension::Time, o.rifle_start);
            o.rifle_duration = e.quantity_or("rifle_duration", Dimension::Time, o.rifle_duration);
            o.cavity_start = e.quantity_or("cavity_start", Dimension::Time, o.cavity_start);
            o.cavity_duration = e.quantity_or("cavity_duration", Dimension::Time, o.cavity_duration);
            if (c.params.qubits.size() != 2) throw ConfigError("params.qubits", "tomo needs exactly two qubits");
            c.protocol = t;
            break;
        }
        case Experiment::Dressed: {
            DressedConfig d;
            d.rabi = e.grid("rabi", Dimension::Frequency);
            d.qubit = qubit_index(e, c.params);
            c.protocol = d;
            break;
        }
        case Experiment::SteadyState:
            c.protocol = SteadyStateConfig{};
            break;
    }
    e.finish();
    s.finish();
    return c;
}

inline json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
}

inline RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("", "cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(parse_json_text(ss.str()));
}

// ---------------------------------------------------------------- output

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { line(header); }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw InvalidArgument("CsvWriter: row width differs from header");
        line(cells);
    }
    [[nodiscard]] const std::string& text() const { return text_; }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += quote(cells[i]);
        }
        text_ += '\n';
    }
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }

    std::size_t columns_;
    std::string text_;
};

inline std::string num(double v) { return format_number(v); }

struct RunOutcome {
    int exit_code = kExitOk;
    std::size_t failures = 0;
    std::vector<std::string> files;  // relative to the output directory
};

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + (dir_ / name).string());
        out << content;
        files_.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
    [[nodiscard]] const std::vector<std::string>& files() const { return files_; }
    [[nodiscard]] const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline json matrix_json(const ComplexMatrix& m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array(), c = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            r.push_back(m(i, j).real());
            c.push_back(m(i, j).imag());
        }
        re.push_back(r);
        im.push_back(c);
    }
    return {{"real", re}, {"imag", im}};
}

inline json fit_json(const FitResult& f) {
    return {{"amplitude", f.amplitude},
            {"decay_rate_per_us", f.decay_rate},
            {"decay_rate_stderr_per_us", f.decay_rate_stderr},
            {"frequency_mhz", units::to_mhz(f.frequency)},
            {"phase_rad", f.phase},
            {"offset", f.offset},
            {"residual_norm", f.residual_norm},
            {"signal_norm", f.signal_norm},
            {"iterations", f.iterations},
            {"converged", f.converged}};
}

// ---------------------------------------------------------------- experiments

namespace detail {

inline RunOutcome run_sweep(const RunConfig& c, const SweepConfig& sw, OutputDir& out) {
    SystemParams p = c.params;
    p.resonator.drive_amp = sw.drive_amp;
    SweepOptions so{c.workers, sw.qubit};
    const SweepGrid g = c.experiment == Experiment::Spectroscopy ? spectroscopy_sweep(p, sw.detuning, sw.axis, so)
                                                                 : incoherent_sweep(p, sw.axis, sw.detuning, so);
    const std::size_t cols = g.x.values.size();

    CsvWriter grid({g.y.name + " [" + g.y.unit + "]", g.x.name + " [" + g.x.unit + "]", "|<a>| [normalized]", "error"});
    for (std::size_t i = 0; i < g.y.values.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j)
            grid.row({format_axis(g.y.values[i]), format_axis(g.x.values[j]),
                      num(g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))), g.errors[i * cols + j]});
    out.write("sweep.csv", grid.text());

    CsvWriter peaks({g.y.name + " [" + g.y.unit + "]", "peak_count [1]", "peak_positions [" + g.x.unit + "]"});
    json counts = json::array();
    for (std::size_t i = 0; i < g.y.values.size(); ++i) {
        const auto row = g.row(i);
        bool ok = true;
        for (double v : row) ok = ok && std::isfinite(v);
        if (!ok) {
            peaks.row({format_axis(g.y.values[i]), "nan", ""});
            counts.push_back(nullptr);
            continue;
        }
        const auto found = find_peaks(row, g.x.values, sw.prominence);
        std::string pos;
        for (const auto& pk : found) pos += (pos.empty() ? "" : ";") + num(pk.x);
        peaks.row({format_axis(g.y.values[i]), std::to_string(found.size()), pos});
        counts.push_back(found.size());
    }
    out.write("peaks.csv", peaks.text());

    out.write_json("summary.json", {{"config_hash", c.hash},
                                    {"experiment", experiment_name(c.experiment)},
                                    {"anchor_value", g.anchor_value},
                                    {"anchor_x_mhz", g.anchor_x},
                                    {"peak_prominence", sw.prominence},
                                    {"peak_counts", counts},
                                    {"failures", g.failures()}});
    RunOutcome o;
    o.failures = g.failures();
    return o;
}

inline RunOutcome run_rabi_curve(const RunConfig& c, const RabiCurveConfig& r, OutputDir& out) {
    const auto pts = rifled_rabi_curve(c.params, r.rabi, r.photons, r.options);
    CsvWriter csv({"Omega_R/2pi [MHz]", "photons [1]", "drive_amp/2pi [MHz]", "Gamma_R [1/us]", "Gamma_R_stderr [1/us]",
                   "Omega_fit/2pi [MHz]", "relative_residual [1]", "converged [bool]", "fock_levels [1]", "error"});
    json fits = json::array();
    RunOutcome o;
    for (const auto& pt : pts) {
        if (!pt.error.empty()) {
            ++o.failures;
            csv.row({format_axis(units::to_mhz(pt.rabi)), num(pt.photons), num(units::to_mhz(pt.drive_amp)), "nan", "nan", "nan", "nan",
                     "false", "0", pt.error});
            fits.push_back({{"rabi_mhz", units::to_mhz(pt.rabi)}, {"photons", pt.photons}, {"error", pt.error}});
            continue;
        }
        csv.row({format_axis(units::to_mhz(pt.rabi)), num(pt.photons), num(units::to_mhz(pt.drive_amp)), num(pt.fit.decay_rate),
                 num(pt.fit.decay_rate_stderr), num(units::to_mhz(pt.fit.frequency)), num(pt.fit.relative_residual()),
                 pt.fit.converged ? "true" : "false", std::to_string(pt.fock_levels), ""});
        fits.push_back({{"rabi_mhz", units::to_mhz(pt.rabi)}, {"photons", pt.photons}, {"fit", fit_json(pt.fit)}});
    }
    out.write("rabi_curve.csv", csv.text());
    out.write_json("fits.json", {{"config_hash", c.hash}, {"points", fits}});
    return o;
}

inline RunOutcome run_ramsey(const RunConfig& c, const RamseyConfig& r, OutputDir& out) {
    const RamseyResult res = ramsey_phase_sweep(c.params, r.theta, r.axis, r.options);
    CsvWriter csv({"theta [rad]", "P_e [1]"});
    for (std::size_t i = 0; i < res.theta.size(); ++i) csv.row({format_axis(res.theta[i]), num(res.p_excited[i])});
    out.write("ramsey.csv", csv.text());
    out.write_json("summary.json", {{"config_hash", c.hash},
                                    {"contrast", res.contrast()},
                                    {"drive_amp_mhz", units::to_mhz(res.drive_amp)}});
    return {};
}

inline RunOutcome run_tomo(const RunConfig& c, const TomoConfig& t, OutputDir& out) {
    const TomographyResult r = rifled_tomography_protocol(c.params, t.target, t.duration, t.options);
    json reduced = json::array();
    for (const auto& m : r.reduced) reduced.push_back(matrix_json(m));
    out.write_json("tomo.json", {{"config_hash", c.hash},
                                 {"basis", {"gg", "ge", "eg", "ee"}},
                                 {"joint", matrix_json(r.joint.matrix())},
                                 {"reduced", reduced},
                                 {"coherences", r.coherences},
                                 {"fidelity_vs_ideal", r.fidelity_vs_ideal},
                                 {"target_fidelity", r.target_fidelity},
                                 {"drive_amp_mhz", units::to_mhz(r.drive_amp)},
                                 {"probe_detuning_mhz", units::to_mhz(r.probe_detuning)},
                                 {"fock_levels", r.fock_levels},
                                 {"peak_photons", r.peak_photons}});
    return {};
}

inline RunOutcome run_dressed(const RunConfig& c, const DressedConfig& d, OutputDir& out) {
    const double chi = c.params.qubits[d.qubit].chi;
    auto label = [](int s) { return s > 0 ? std::string("+") : std::string("-"); };
    std::vector<std::string> header{"Omega_R/2pi [MHz]", "E_0-/2pi [MHz]", "E_0+/2pi [MHz]", "E_1-/2pi [MHz]", "E_1+/2pi [MHz]"};
    const DressedSpectrum first = dressed_spectrum(chi, d.rabi.front());
    for (const auto& tr : first.transitions) {
        const std::string name = "0" + label(tr.from) + "->1" + label(tr.to);
        header.push_back("f(" + name + ")/2pi [MHz]");
        header.push_back("w(" + name + ") [1]");
    }
    CsvWriter csv(header);
    for (double w : d.rabi) {
        const DressedSpectrum s = dressed_spectrum(chi, w);
        std::vector<std::string> row{format_axis(units::to_mhz(w)), num(units::to_mhz(s.e0_minus)), num(units::to_mhz(s.e0_plus)),
                                     num(units::to_mhz(s.e1_minus)), num(units::to_mhz(s.e1_plus))};
        for (const auto& tr : s.transitions) {
            row.push_back(num(units::to_mhz(tr.frequency)));
            row.push_back(num(tr.weight));
        }
        csv.row(row);
    }
    out.write("dressed.csv", csv.text());
    out.write_json("summary.json", {{"config_hash", c.hash},
                                    {"chi_mhz", units::to_mhz(chi)},
                                    {"rifling_threshold_mhz", units::to_mhz(rifling_threshold(chi, c.params.resonator.kappa))}});
    return {};
}

inline RunOutcome run_steady_state(const RunConfig& c, OutputDir& out) {
    const SteadyStateResult r = steady_state_adaptive(c.params);
    json pe = json::array();
    for (std::size_t q = 0; q < c.params.qubits.size(); ++q)
        pe.push_back(expect(qubit_projector(r.params, q, 1), r.rho).real());
    out.write_json("steady_state.json", {{"config_hash", c.hash},
                                         {"a", {{"real", r.amplitude.real()}, {"imag", r.amplitude.imag()}}},
                                         {"abs_a", std::abs(r.amplitude)},
                                         {"photons", r.photons},
                                         {"P_e", pe},
                                         {"fock_levels", r.params.resonator.fock_levels},
                                         {"fock_tail", r.fock_tail},
                                         {"residual", r.residual}});
    return {};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

/// Runs the experiment and writes its artifacts plus manifest.txt into `dir`.
inline RunOutcome run(const RunConfig& c, const std::filesystem::path& dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = detail::utc_timestamp();
    OutputDir out(dir);
    RunOutcome o = std::visit(
        [&](const auto& proto) -> RunOutcome {
            using T = std::decay_t<decltype(proto)>;
            if constexpr (std::is_same_v<T, SweepConfig>)
                return detail::run_sweep(c, proto, out);
            else if constexpr (std::is_same_v<T, RabiCurveConfig>)
                return detail::run_rabi_curve(c, proto, out);
            else if constexpr (std::is_same_v<T, RamseyConfig>)
                return detail::run_ramsey(c, proto, out);
            else if constexpr (std::is_same_v<T, TomoConfig>)
                return detail::run_tomo(c, proto, out);
            else if constexpr (std::is_same_v<T, DressedConfig>)
                return detail::run_dressed(c, proto, out);
            else
                return detail::run_steady_state(c, out);
        },
        c.protocol);
    o.exit_code = o.failures ? kExitPartial : kExitOk;
    o.files = out.files();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ostringstream m;
    m << "config_hash " << c.hash << "\n"
      << "toolkit_version " << RIFLING_VERSION << "\n"
      << "experiment " << experiment_name(c.experiment) << "\n"
      << "seed " << c.seed << "\n"
      << "started " << started << "\n"
      << "wall_time_s " << format_number(wall) << "\n"
      << "failures " << o.failures << "\n"
      << "exit_code " << o.exit_code << "\n";
    for (const auto& f : o.files) m << "file " << f << "\n";
    out.write("manifest.txt", m.str());
    o.files.push_back("manifest.txt");
    return o;
}

// ---------------------------------------------------------------- presets

namespace detail {

inline std::string q(double v, const char* unit) { return format_number(v) + " " + unit; }

inline json qubit_json(double chi_mhz, double t1_us, double t2_us, bool dephasing = true) {
    const QubitParams p = presets::qubit_from(chi_mhz, t1_us, t2_us);
    return {{"chi", q(chi_mhz, "MHz")},
            {"gamma_down", q(p.gamma_down, "1/us")},
            {"gamma_up", "0 1/us"},
            {"gamma_phi", q(dephasing ? p.gamma_phi : 0.0, "1/us")}};
}

inline json resonator_json(std::size_t fock) { return {{"kappa", q(presets::kKappaMHz, "MHz")}, {"fock_levels", fock}}; }

inline json qubit1_json() { return qubit_json(presets::kQubit1ChiMHz, presets::kQubit1T1, presets::kQubit1T2); }
inline json qubit2_json() { return qubit_json(presets::kQubit2ChiMHz, presets::kQubit2T1, presets::kQubit2T2); }

inline json transmon1_json() {
    json j = qubit1_json();
    j["n_levels"] = 3;
    j["anharmonicity"] = q(presets::kAnharmonicityMHz, "MHz");
    j["g0"] = q(presets::kQubit1G0MHz, "MHz");
    return j;
}

inline json range(const std::string& start, const std::string& stop, std::size_t count, bool log = false) {
    json j{{"start", start}, {"stop", stop}, {"count", count}};
    if (log) j["spacing"] = "log";
    return j;
}

inline json weak_drive() { return q(presets::kKappaMHz / 1000.0, "MHz"); }

}  // namespace detail

struct Preset {
    std::string name;
    std::string description;
    json config;
};

inline std::vector<Preset> all_presets() {
    using namespace detail;
    std::vector<Preset> v;
    const json one_q1{{"qubits", {qubit1_json()}}, {"resonator", resonator_json(6)}};
    const json one_q2{{"qubits", {qubit2_json()}}, {"resonator", resonator_json(6)}};
    const json trans1{{"qubits", {transmon1_json()}}, {"resonator", resonator_json(6)}};
    const json two_t1{{"qubits", {qubit_json(presets::kQubit1ChiMHz, presets::kQubit1T1, presets::kQubit1T2, false),
                                  qubit_json(presets::kQubit2ChiMHz, presets::kQubit2T1, presets::kQubit2T2, false)}},
                      {"resonator", resonator_json(30)}};

    v.push_back({"fig2b", "spectroscopy vs Rabi drive, Qubit 1 as a three-level transmon, weak probe",
                 {{"experiment", "spectroscopy"},
                  {"params", trans1},
                  {"spectroscopy",
                   {{"detuning", range("-15 MHz", "15 MHz", 151)}, {"rabi", range("0 MHz", "120 MHz", 61)}, {"drive_amp", weak_drive()}}},
                  {"output", "fig2b"}}});
    v.push_back({"fig2c", "spectroscopy linecuts, Qubit 1 two-level, weak probe",
                 {{"experiment", "spectroscopy"},
                  {"params", one_q1},
                  {"spectroscopy",
                   {{"detuning", range("-15 MHz", "15 MHz", 301)},
                    {"rabi", {"0 MHz", "1 MHz", "5 MHz", "16 MHz", "30 MHz", "60 MHz"}},
                    {"drive_amp", weak_drive()}}},
                  {"output", "fig2c"}}});
    v.push_back({"figS4", "incoherent-drive spectroscopy, Qubit 1, Gamma_updown over six decades",
                 {{"experiment", "incoherent"},
                  {"params", one_q1},
                  {"incoherent",
                   {{"detuning", range("-15 MHz", "15 MHz", 301)},
                    {"gamma_updown", range("0.001 1/us", "1000 1/us", 25, true)},
                    {"drive_amp", weak_drive()}}},
                  {"output", "figS4"}}});
    v.push_back({"fig3c", "rifled Rabi decay rate vs Rabi frequency, Qubit 1, four photon setpoints",
                 {{"experiment", "rabi-curve"},
                  {"params", one_q1},
                  {"rabi-curve",
                   {{"rabi", {"2 MHz", "4 MHz", "8 MHz", "12 MHz", "16 MHz", "20 MHz", "30 MHz", "40 MHz", "60 MHz"}},
                    {"photons", presets::kPhotonSetpoints},
                    {"t_max", "8000 ns"},
                    {"dt", "1 ns"},
                    {"fit_start", "10 ns"}}},
                  {"output", "fig3c"}}});
    for (const char* axis : {"x", "y", "none"})
        v.push_back({std::string("ramsey-") + axis, std::string("Ramsey phase sweep, Qubit 2, rifling axis ") + axis + ", 6.8 photons",
                     {{"experiment", "ramsey"},
                      {"params", one_q2},
                      {"ramsey",
                       {{"theta", range("0 pi", "2 pi", 25)},
                        {"axis", axis},
                        {"photons", presets::kReadoutPhotons},
                        {"rifle_rabi", q(presets::kRiflingRabiMHz, "MHz")},
                        {"rifle_duration", q(presets::kRiflingDurationNs, "ns")},
                        {"hold", q(presets::kProtocolDurationNs, "ns")},
                        {"cavity_duration", q(presets::kCavityPulseNs, "ns")}}},
                      {"output", std::string("ramsey-") + axis}}});
    for (const char* target : {"qubit1", "qubit2", "none"})
        v.push_back({std::string("tomo-") + target, std::string("two-qubit tomography, rifle target ") + target + ", T1 decay only",
                     {{"experiment", "tomo"},
                      {"params", two_t1},
                      {"tomo",
                       {{"target", target},
                        {"duration", q(presets::kProtocolDurationNs, "ns")},
                        {"photons", presets::kReadoutPhotons},
                        {"rifle_rabi", q(presets::kRiflingRabiMHz, "MHz")},
                        {"rifle_duration", q(presets::kRiflingDurationNs, "ns")},
                        {"cavity_duration", q(presets::kCavityPulseNs, "ns")}}},
                      {"output", std::string("tomo-") + target}}});
    v.push_back({"dressed", "one-photon dressed spectrum vs Rabi frequency, Qubit 1",
                 {{"experiment", "dressed"},
                  {"params", one_q1},
                  {"dressed", {{"rabi", range("0 MHz", "60 MHz", 121)}}},
                  {"output", "dressed"}}});
    json ss = one_q1;
    ss["resonator"]["delta_omega_r"] = q(-presets::kQubit1ChiMHz, "MHz");
    ss["resonator"]["drive_amp"] = weak_drive();
    v.push_back({"steady-state", "single steady state, Qubit 1 probed on its ground-state resonance",
                 {{"experiment", "steady-state"}, {"params", ss}, {"output", "steady-state"}}});
    return v;
}

inline const Preset& find_preset(const std::string& name) {
    static const std::vector<Preset> all = all_presets();
    for (const auto& p : all)
        if (p.name == name) return p;
    throw ConfigError("", "unknown preset \"" + name + "\"");
}

// ---------------------------------------------------------------- errors

inline json error_report(const std::string& kind, const std::string& message, const std::string& path = "") {
    json e{{"status", "error"}, {"kind", kind}, {"message", message}};
    if (!path.empty()) e["key"] = path;
    return e;
}

}  // namespace rifling::cli
