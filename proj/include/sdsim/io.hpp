#pragma once

// Configuration files, CSV output, binary state snapshots, and the directory
// -producing run driver. Everything here is deterministic: the same config
// and code produce byte-identical outputs, which is what the persistence
// tests assert.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "experiments.hpp"

namespace sdsim {

static_assert(std::endian::native == std::endian::little,
              "snapshot files are defined little-endian; big-endian hosts are unsupported");

// ---------------------------------------------------------------------------
// Configuration.

namespace detail {

inline double json_number(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

inline int json_int(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    return v.get<int>();
}

inline bool json_bool(const nlohmann::json& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
    return v.get<bool>();
}

inline std::vector<double> json_number_list(const nlohmann::json& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(json_number(e, key));
    return out;
}

} // namespace detail

// Strict parse: unknown keys are errors, every value is type-checked, and the
// assembled config passes full validation before it is returned.
inline ScenarioConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    ScenarioConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "dim")
            cfg.dim = detail::json_int(value, key);
        else if (key == "n")
            cfg.n = detail::json_int(value, key);
        else if (key == "box_length")
            cfg.box_length = detail::json_number(value, key);
        else if (key == "mu")
            cfg.params.mu = detail::json_number(value, key);
        else if (key == "lambda")
            cfg.params.lambda = detail::json_int(value, key);
        else if (key == "dt")
            cfg.step.dt = detail::json_number(value, key);
        else if (key == "t_end")
            cfg.step.t_end = detail::json_number(value, key);
        else if (key == "output_stride")
            cfg.step.output_stride = detail::json_int(value, key);
        else if (key == "filter_fraction")
            cfg.step.filter_fraction =
                value.is_null() ? std::nullopt
                                : std::optional<double>(detail::json_number(value, key));
        else if (key == "amplitude_u")
            cfg.amplitude_u = detail::json_number(value, key);
        else if (key == "sigma_u")
            cfg.sigma_u = detail::json_number(value, key);
        else if (key == "wave") {
            auto w = detail::json_number_list(value, key);
            if (w.size() > 4) throw ConfigError("config key 'wave' takes at most 4 components");
            cfg.wave = {0.0, 0.0, 0.0, 0.0};
            for (std::size_t a = 0; a < w.size(); ++a) cfg.wave[a] = w[a];
        } else if (key == "amplitude_v")
            cfg.amplitude_v = detail::json_number(value, key);
        else if (key == "sigma_v")
            cfg.sigma_v = detail::json_number(value, key);
        else if (key == "linear")
            cfg.linear = detail::json_bool(value, key);
        else if (key == "p_list")
            cfg.p_list = detail::json_number_list(value, key);
        else if (key == "shell")
            cfg.shell = detail::json_number(value, key);
        else if (key == "profile_moment")
            cfg.profile_moment = detail::json_bool(value, key);
        else if (key == "phase_enabled")
            cfg.phase_enabled = detail::json_bool(value, key);
        else if (key == "psi_window")
            cfg.psi_window = detail::json_number(value, key);
        else if (key == "psi_ds_max")
            cfg.psi_ds_max = detail::json_number(value, key);
        else if (key == "psi_band_fraction")
            cfg.psi_band_fraction = detail::json_number(value, key);
        else if (key == "profile_times")
            cfg.profile_times = detail::json_number_list(value, key);
        else if (key == "window_lo")
            cfg.window_lo = detail::json_number(value, key);
        else if (key == "window_hi")
            cfg.window_hi = value.is_null()
                                ? std::nullopt
                                : std::optional<double>(detail::json_number(value, key));
        else if (key == "mu_list")
            cfg.mu_list = detail::json_number_list(value, key);
        else if (key == "point_budget") {
            if (!value.is_number_integer() || value.get<long long>() <= 0)
                throw ConfigError("config key 'point_budget' must be a positive integer");
            cfg.point_budget = value.get<std::size_t>();
        } else
            throw ConfigError("unknown config key '" + key + "'");
    }
    validate_config(cfg);
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

// Canonical serialization of a config. Keys come out sorted, so two files
// that describe the same scenario digest identically.
inline nlohmann::json config_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["dim"] = cfg.dim;
    j["n"] = cfg.n;
    j["box_length"] = cfg.box_length;
    j["mu"] = cfg.params.mu;
    j["lambda"] = cfg.params.lambda;
    j["dt"] = cfg.step.dt;
    j["t_end"] = cfg.step.t_end;
    j["output_stride"] = cfg.step.output_stride;
    if (cfg.step.filter_fraction) j["filter_fraction"] = *cfg.step.filter_fraction;
    j["amplitude_u"] = cfg.amplitude_u;
    j["sigma_u"] = cfg.sigma_u;
    j["wave"] = std::vector<double>(cfg.wave.begin(), cfg.wave.begin() + cfg.dim);
    j["amplitude_v"] = cfg.amplitude_v;
    j["sigma_v"] = cfg.sigma_v;
    j["linear"] = cfg.linear;
    j["p_list"] = cfg.p_list;
    j["shell"] = cfg.shell;
    j["profile_moment"] = cfg.profile_moment;
    j["phase_enabled"] = cfg.phase_enabled;
    j["psi_window"] = cfg.psi_window;
    j["psi_ds_max"] = cfg.psi_ds_max;
    j["psi_band_fraction"] = cfg.psi_band_fraction;
    j["profile_times"] = cfg.profile_times;
    j["window_lo"] = cfg.window_lo;
    if (cfg.window_hi) j["window_hi"] = *cfg.window_hi;
    if (!cfg.mu_list.empty()) j["mu_list"] = cfg.mu_list;
    j["point_budget"] = cfg.point_budget;
    return j;
}

// FNV-1a 64 over the canonical dump, as 16 hex digits.
inline std::string config_digest(const ScenarioConfig& cfg) {
    const std::string dump = config_json(cfg).dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// CSV.

namespace detail {

inline std::string g17(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
}

inline std::string lp_column_name(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "l%g_u", p);
    return std::string(buf);
}

} // namespace detail

// Fixed column order; channels that were not recorded stay as empty cells,
// never as zeros.
inline void write_csv(const std::string& path, const NormSeries& series) {
    std::ostringstream out;
    out << "t,l2_u,h1_u,linf_u";
    for (double p : series.p_list) out << ',' << detail::lp_column_name(p);
    out << ",l2_v,h1_v,xnorm_f,gamma_l2,boundary_mass_fraction\n";
    const bool moments = series.xnorm_f.size() == series.times.size();
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        out << detail::g17(series.times[i]) << ',' << detail::g17(series.l2_u[i]) << ','
            << detail::g17(series.h1_u[i]) << ',' << detail::g17(series.linf_u[i]);
        for (const auto& ch : series.lp_u) out << ',' << detail::g17(ch[i]);
        out << ',' << detail::g17(series.l2_v[i]) << ',' << detail::g17(series.h1_v[i]) << ',';
        if (moments) out << detail::g17(series.xnorm_f[i]);
        out << ',';
        if (moments) out << detail::g17(series.gamma_l2[i]);
        out << ',' << detail::g17(series.boundary_frac[i]) << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << out.str();
    if (!f) throw IoError("write failed: " + path);
}

// Log-log data for one norm channel plus a companion file carrying the
// fitted line over the same abscissae.
inline void emit_plot_data(const std::string& path, const NormSeries& series, double p,
                           const DecayFit& fit) {
    const std::vector<double>& ch = detail::lp_channel(series, p);
    if (ch.size() != series.times.size()) throw IoError("emit_plot_data: channel not recorded");
    std::ostringstream data, line;
    data << "log_t,log_norm\n";
    line << "log_t,log_fit\n";
    // intercept recovered from the window midpoint values is not stored in
    // the fit, so re-derive it from the (t, value) pairs inside the window
    double mx = 0.0, my = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const double t = series.times[i];
        if (t < fit.window_lo - 1e-12 || t > fit.window_hi + 1e-12) continue;
        if (!(t > 0.0) || !(ch[i] > 0.0)) continue;
        mx += std::log(t);
        my += std::log(ch[i]);
        ++m;
    }
    if (m == 0) throw IoError("emit_plot_data: no usable samples in the fit window");
    const double intercept = my / m - fit.fitted * (mx / m);
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const double t = series.times[i];
        if (!(t > 0.0) || !(ch[i] > 0.0)) continue;
        const double lt = std::log(t);
        data << detail::g17(lt) << ',' << detail::g17(std::log(ch[i])) << '\n';
        line << detail::g17(lt) << ',' << detail::g17(intercept + fit.fitted * lt) << '\n';
    }
    std::filesystem::path base(path);
    std::filesystem::path companion = base.parent_path() / (base.stem().string() + "_fit.csv");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << data.str();
    std::ofstream g(companion.string(), std::ios::binary);
    if (!g) throw IoError("cannot open for writing: " + companion.string());
    g << line.str();
}

// ---------------------------------------------------------------------------
// Binary snapshots. Both containers share the header discipline: magic,
// version, geometry, then 8-byte-aligned f64 payload, all little-endian.
//
//   SDBF (full state):  "SDBF" u32=1 | u32 d | u32 n[d] | f64 L[d]
//                       | f64 t | f64 mu | i8 lambda | zero pad to 8
//                       | f64 re,im interleaved row-major | f64 v row-major
//   SDPF (profile):     "SDPF" u32=1 | u32 d | u32 n[d] | f64 L[d]
//                       | f64 t | zero pad to 8 | f64 re,im interleaved

namespace detail {

struct ByteSink {
    std::string buf;
    void raw(const void* p, std::size_t k) {
        buf.append(static_cast<const char*>(p), k);
    }
    template <class T> void put(T v) { raw(&v, sizeof v); }
    void pad8() { buf.append((8 - buf.size() % 8) % 8, '\0'); }
};

struct ByteSource {
    const std::string& buf;
    std::size_t pos = 0;
    explicit ByteSource(const std::string& b) : buf(b) {}
    void raw(void* p, std::size_t k) {
        if (pos + k > buf.size()) throw SnapshotFormatError("snapshot file truncated");
        std::memcpy(p, buf.data() + pos, k);
        pos += k;
    }
    template <class T> T get() {
        T v;
        raw(&v, sizeof v);
        return v;
    }
    void pad8() { pos += (8 - pos % 8) % 8; }
};

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void put_geometry(ByteSink& s, const SpatialGrid& g) {
    s.put<std::uint32_t>(static_cast<std::uint32_t>(g.dim));
    for (int a = 0; a < g.dim; ++a) s.put<std::uint32_t>(static_cast<std::uint32_t>(g.n));
    for (int a = 0; a < g.dim; ++a) s.put<double>(g.box_length);
}

inline SpatialGrid get_geometry(ByteSource& s) {
    const std::uint32_t d = s.get<std::uint32_t>();
    if (d < 1 || d > 4) throw SnapshotFormatError("snapshot dimension out of range");
    std::uint32_t n0 = 0;
    for (std::uint32_t a = 0; a < d; ++a) {
        const std::uint32_t n = s.get<std::uint32_t>();
        if (a == 0)
            n0 = n;
        else if (n != n0)
            throw SnapshotFormatError("anisotropic snapshot grids are not supported");
    }
    double L0 = 0.0;
    for (std::uint32_t a = 0; a < d; ++a) {
        const double L = s.get<double>();
        if (a == 0)
            L0 = L;
        else if (L != L0)
            throw SnapshotFormatError("anisotropic snapshot grids are not supported");
    }
    // the writer already enforced a budget; reading is permissive
    return make_grid(static_cast<int>(d), static_cast<int>(n0), L0,
                     std::numeric_limits<std::size_t>::max() / 32);
}

} // namespace detail

struct Snapshot {
    SystemState state;
    DebyeParams params;
};

inline void write_snapshot(const std::string& path, const SystemState& state,
                           const DebyeParams& params) {
    require_domain(state.u, Domain::physical, "write_snapshot");
    detail::ByteSink s;
    s.raw("SDBF", 4);
    s.put<std::uint32_t>(1);
    detail::put_geometry(s, state.u.grid);
    s.put<double>(state.t);
    s.put<double>(params.mu);
    s.put<std::int8_t>(static_cast<std::int8_t>(params.lambda));
    s.pad8();
    for (const cplx& z : state.u.values) {
        s.put<double>(z.real());
        s.put<double>(z.imag());
    }
    for (double x : state.v.values) s.put<double>(x);
    detail::write_file(path, s.buf);
}

inline Snapshot read_snapshot(const std::string& path) {
    const std::string bytes = detail::read_file(path);
    detail::ByteSource s(bytes);
    char magic[4];
    s.raw(magic, 4);
    if (std::memcmp(magic, "SDBF", 4) != 0)
        throw SnapshotFormatError("bad snapshot magic in " + path);
    if (s.get<std::uint32_t>() != 1)
        throw SnapshotFormatError("unsupported snapshot version in " + path);
    SpatialGrid g = detail::get_geometry(s);
    Snapshot snap;
    snap.state.t = s.get<double>();
    snap.params.mu = s.get<double>();
    snap.params.lambda = s.get<std::int8_t>();
    s.pad8();
    snap.state.u = make_complex_field(g);
    for (cplx& z : snap.state.u.values) {
        const double re = s.get<double>();
        const double im = s.get<double>();
        z = cplx(re, im);
    }
    snap.state.v = make_real_field(g);
    for (double& x : snap.state.v.values) x = s.get<double>();
    if (s.pos != bytes.size()) throw SnapshotFormatError("trailing bytes in " + path);
    return snap;
}

inline void write_profile(const std::string& path, const ProfileSnapshot& snap) {
    detail::ByteSink s;
    s.raw("SDPF", 4);
    s.put<std::uint32_t>(1);
    detail::put_geometry(s, snap.f_hat.grid);
    s.put<double>(snap.t);
    s.pad8();
    for (const cplx& z : snap.f_hat.values) {
        s.put<double>(z.real());
        s.put<double>(z.imag());
    }
    detail::write_file(path, s.buf);
}

inline ProfileSnapshot read_profile(const std::string& path) {
    const std::string bytes = detail::read_file(path);
    detail::ByteSource s(bytes);
    char magic[4];
    s.raw(magic, 4);
    if (std::memcmp(magic, "SDPF", 4) != 0)
        throw SnapshotFormatError("bad profile magic in " + path);
    if (s.get<std::uint32_t>() != 1)
        throw SnapshotFormatError("unsupported profile version in " + path);
    SpatialGrid g = detail::get_geometry(s);
    ProfileSnapshot snap;
    snap.t = s.get<double>();
    s.pad8();
    snap.f_hat = make_complex_field(g, Domain::spectral);
    for (cplx& z : snap.f_hat.values) {
        const double re = s.get<double>();
        const double im = s.get<double>();
        z = cplx(re, im);
    }
    if (s.pos != bytes.size()) throw SnapshotFormatError("trailing bytes in " + path);
    return snap;
}

// ---------------------------------------------------------------------------
// Run driver.

struct RunManifest {
    std::string config_digest;
    bool completed = false;
    std::optional<long> diverged_step;
    std::optional<double> wrap_guard_time;
    double t_final = 0.0;
    std::vector<std::string> outputs;
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json j;
    j["config_digest"] = m.config_digest;
    j["completed"] = m.completed;
    j["diverged_step"] = m.diverged_step ? nlohmann::json(*m.diverged_step) : nlohmann::json();
    j["wrap_guard_time"] =
        m.wrap_guard_time ? nlohmann::json(*m.wrap_guard_time) : nlohmann::json();
    j["t_final"] = m.t_final;
    j["outputs"] = m.outputs;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << j.dump(2) << '\n';
}

// Runs the scenario and materializes the output directory: norms.csv, the
// profile snapshots, the final state (when the run completed), and
// manifest.json. A diverged run keeps its partial outputs and is marked
// incomplete rather than erased.
inline RunManifest run_scenario(const ScenarioConfig& cfg, const std::string& outdir,
                                const std::optional<std::string>& resume_path = std::nullopt,
                                SimulationResult* out_result = nullptr) {
    validate_config(cfg);
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create output directory: " + outdir);

    SimulationResult result;
    if (resume_path) {
        Snapshot snap = read_snapshot(*resume_path);
        if (snap.params.mu != cfg.params.mu || snap.params.lambda != cfg.params.lambda)
            throw ConfigError("resume snapshot parameters do not match the configuration");
        result = run_simulation(cfg, std::move(snap.state));
    } else {
        result = run_simulation(cfg);
    }

    RunManifest manifest;
    manifest.config_digest = config_digest(cfg);
    manifest.completed = !result.diverged_step.has_value();
    manifest.diverged_step = result.diverged_step;
    manifest.wrap_guard_time = result.guard_time;
    manifest.t_final = result.series.times.empty() ? 0.0 : result.series.times.back();

    const std::filesystem::path dir(outdir);
    write_csv((dir / "norms.csv").string(), result.series);
    manifest.outputs.push_back("norms.csv");
    for (std::size_t i = 0; i < result.profiles.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "profile_%03zu.sdpf", i);
        write_profile((dir / name).string(), result.profiles[i]);
        manifest.outputs.push_back(name);
    }
    if (result.final_state) {
        write_snapshot((dir / "final.sdbf").string(), *result.final_state, cfg.params);
        manifest.outputs.push_back("final.sdbf");
    }

    manifest.outputs.push_back("manifest.json");
    write_manifest((dir / "manifest.json").string(), manifest);
    if (out_result) *out_result = std::move(result);
    return manifest;
}

// Decay window policy for driver-level fits: the configured bounds, closed
// below the wrap guard when no explicit upper bound was given.
inline std::pair<double, double> decay_window(const NormSeries& series,
                                              const ScenarioConfig& cfg) {
    double hi;
    if (cfg.window_hi) {
        hi = *cfg.window_hi;
    } else {
        const auto guard = wrap_guard_time(series);
        hi = series.times.empty() ? cfg.window_lo : series.times.back();
        if (guard) {
            hi = cfg.window_lo;
            for (double t : series.times)
                if (t < *guard) hi = t;
        }
    }
    return {cfg.window_lo, hi};
}

} // namespace sdsim
