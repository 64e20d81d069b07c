#pragma once

#include "parzenfiber/constellation.hpp"
#include "parzenfiber/detect.hpp"
#include "parzenfiber/fiberlink.hpp"
#include "parzenfiber/metrics.hpp"
#include "parzenfiber/rxdsp.hpp"
#include "parzenfiber/txdsp.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace parzenfiber {

inline constexpr const char* library_version = "0.1.0";
inline constexpr int result_schema_version = 1;

/// Every experiment parameter, defaulting to the reference 16-QAM DM setup.
struct ExperimentConfig {
    unsigned modulation = 16;
    double bit_rate = 224e9;
    LinkStyle style = LinkStyle::DM;

    double span_length_km = 80.0;
    double alpha_db_km = 0.2;
    double dispersion_ps_nm_km = 16.0;
    double gamma_per_w_km = 1.4;
    double edfa_gain_db = 16.0;
    double edfa_nf_db = 5.5;
    // Loss of the in-line compensating element, restored by the second DM
    // amplifier (same noise figure as the first).
    double dcf_loss_db = 16.0;
    unsigned steps_per_span = 50;
    double wavelength_nm = 1550.0;
    bool noise = true;

    double roll_off = 0.1;
    unsigned filter_span = 64;
    unsigned oversampling = 16;
    PowerReference power_reference = PowerReference::Total;

    bool cd_compensation = true;
    std::vector<unsigned> dbp_steps{0};  // 0 = no DBP; several values share one propagation
    bool dbp_full_rate = false;

    bool detect_md = true;
    bool detect_pw = true;
    std::vector<double> radii{0.3};

    std::size_t training = 1000;
    std::size_t testing = 16384;
    std::vector<std::uint64_t> seeds{1};

    std::vector<double> powers_dbm{-1.0};
    std::vector<unsigned> span_counts{10};

    unsigned threads = 0;  // 0 = hardware concurrency
};

namespace detail {

inline std::string trim(std::string s)
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument("config: " + key + ": not a number: '" + v + "'");
    return d;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    unsigned long long u = 0;
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        u = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + ": not a non-negative integer: '" + v + "'");
    return u;
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: " + key + ": not a boolean: '" + v + "'");
}

// Range syntax a:b:step expands inclusively; otherwise comma lists.
inline std::vector<double> to_double_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    if (v.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(v);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(trim(p));
        if (parts.size() != 3) throw std::invalid_argument("config: " + key + ": range must be start:stop:step");
        const double a = to_double(key, parts[0]), b = to_double(key, parts[1]), step = to_double(key, parts[2]);
        if (!(step > 0.0) || b < a) throw std::invalid_argument("config: " + key + ": invalid range");
        const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9));
        for (long i = 0; i <= count; ++i) out.push_back(std::round((a + i * step) * 1e9) / 1e9);
        return out;
    }
    for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
    return out;
}

template <typename T>
std::vector<T> to_uint_list(const std::string& key, const std::string& v)
{
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(static_cast<T>(to_uint(key, item)));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v)
{
    std::ostringstream os;
    os.precision(12);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

} // namespace detail

/// Apply one key/value assignment; unknown keys are rejected.
inline void set_config_value(ExperimentConfig& cfg, const std::string& raw_key, const std::string& raw_value)
{
    using namespace detail;
    const std::string key = trim(raw_key);
    const std::string v = trim(raw_value);
    static const std::map<std::string, std::function<void(ExperimentConfig&, const std::string&, const std::string&)>>
        setters = {
            {"modulation", [](auto& c, auto& k, auto& x) { c.modulation = static_cast<unsigned>(to_uint(k, x)); }},
            {"bit_rate", [](auto& c, auto& k, auto& x) { c.bit_rate = to_double(k, x); }},
            {"style",
             [](auto& c, auto& k, auto& x) {
                 if (x == "DM" || x == "dm") c.style = LinkStyle::DM;
                 else if (x == "DUM" || x == "dum") c.style = LinkStyle::DUM;
                 else throw std::invalid_argument("config: " + k + ": expected DM or DUM");
             }},
            {"span_length_km", [](auto& c, auto& k, auto& x) { c.span_length_km = to_double(k, x); }},
            {"alpha_db_km", [](auto& c, auto& k, auto& x) { c.alpha_db_km = to_double(k, x); }},
            {"dispersion_ps_nm_km", [](auto& c, auto& k, auto& x) { c.dispersion_ps_nm_km = to_double(k, x); }},
            {"gamma_per_w_km", [](auto& c, auto& k, auto& x) { c.gamma_per_w_km = to_double(k, x); }},
            {"edfa_gain_db", [](auto& c, auto& k, auto& x) { c.edfa_gain_db = to_double(k, x); }},
            {"edfa_nf_db", [](auto& c, auto& k, auto& x) { c.edfa_nf_db = to_double(k, x); }},
            {"dcf_loss_db", [](auto& c, auto& k, auto& x) { c.dcf_loss_db = to_double(k, x); }},
            {"steps_per_span", [](auto& c, auto& k, auto& x) { c.steps_per_span = static_cast<unsigned>(to_uint(k, x)); }},
            {"wavelength_nm", [](auto& c, auto& k, auto& x) { c.wavelength_nm = to_double(k, x); }},
            {"noise", [](auto& c, auto& k, auto& x) { c.noise = to_bool(k, x); }},
            {"roll_off", [](auto& c, auto& k, auto& x) { c.roll_off = to_double(k, x); }},
            {"filter_span", [](auto& c, auto& k, auto& x) { c.filter_span = static_cast<unsigned>(to_uint(k, x)); }},
            {"oversampling", [](auto& c, auto& k, auto& x) { c.oversampling = static_cast<unsigned>(to_uint(k, x)); }},
            {"power_reference",
             [](auto& c, auto& k, auto& x) {
                 if (x == "total") c.power_reference = PowerReference::Total;
                 else if (x == "per_polarization") c.power_reference = PowerReference::PerPolarization;
                 else throw std::invalid_argument("config: " + k + ": expected total or per_polarization");
             }},
            {"cd_compensation", [](auto& c, auto& k, auto& x) { c.cd_compensation = to_bool(k, x); }},
            {"dbp_steps", [](auto& c, auto& k, auto& x) { c.dbp_steps = to_uint_list<unsigned>(k, x); }},
            {"dbp_full_rate", [](auto& c, auto& k, auto& x) { c.dbp_full_rate = to_bool(k, x); }},
            {"detectors",
             [](auto& c, auto& k, auto& x) {
                 c.detect_md = c.detect_pw = false;
                 for (const auto& d : split_list(x)) {
                     if (d == "md" || d == "MD") c.detect_md = true;
                     else if (d == "pw" || d == "PW") c.detect_pw = true;
                     else if (d == "both") c.detect_md = c.detect_pw = true;
                     else throw std::invalid_argument("config: " + k + ": unknown detector '" + d + "'");
                 }
             }},
            {"radii", [](auto& c, auto& k, auto& x) { c.radii = to_double_list(k, x); }},
            {"training", [](auto& c, auto& k, auto& x) { c.training = to_uint(k, x); }},
            {"testing", [](auto& c, auto& k, auto& x) { c.testing = to_uint(k, x); }},
            {"seeds", [](auto& c, auto& k, auto& x) { c.seeds = to_uint_list<std::uint64_t>(k, x); }},
            {"powers_dbm", [](auto& c, auto& k, auto& x) { c.powers_dbm = to_double_list(k, x); }},
            {"span_counts", [](auto& c, auto& k, auto& x) { c.span_counts = to_uint_list<unsigned>(k, x); }},
            {"threads", [](auto& c, auto& k, auto& x) { c.threads = static_cast<unsigned>(to_uint(k, x)); }},
        };
    const auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second(cfg, key, v);
}

inline void validate(const ExperimentConfig& cfg)
{
    if (cfg.powers_dbm.empty()) throw std::invalid_argument("config: powers_dbm must not be empty");
    if (cfg.span_counts.empty()) throw std::invalid_argument("config: span_counts must not be empty");
    if (cfg.seeds.empty()) throw std::invalid_argument("config: seeds must not be empty");
    if (cfg.dbp_steps.empty()) throw std::invalid_argument("config: dbp_steps must not be empty");
    if (!cfg.detect_md && !cfg.detect_pw) throw std::invalid_argument("config: no detector selected");
    if (cfg.detect_pw && cfg.radii.empty()) throw std::invalid_argument("config: radii must not be empty");
    for (const double r : cfg.radii)
        if (!(r > 0.0)) throw std::invalid_argument("config: radii must be positive");
    if (cfg.training == 0 || cfg.testing == 0) throw std::invalid_argument("config: training and testing must be positive");
    if (cfg.steps_per_span == 0) throw std::invalid_argument("config: steps_per_span must be positive");
    if (cfg.oversampling < 2 || cfg.oversampling % adc_samples_per_symbol != 0)
        throw std::invalid_argument("config: oversampling must be an even count >= 2");
    if (!(cfg.span_length_km > 0.0)) throw std::invalid_argument("config: span_length_km must be positive");
    if (cfg.edfa_gain_db < 0.0 || cfg.dcf_loss_db < 0.0) throw std::invalid_argument("config: gains and losses must be >= 0 dB");
    build_qam(cfg.modulation);
    validate(RrcSpec{cfg.roll_off, cfg.filter_span, cfg.oversampling});
}

inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig cfg = {})
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
        try {
            set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    return parse_config(in);
}

/// Canonical text form; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const ExperimentConfig& c)
{
    std::ostringstream os;
    os.precision(12);
    os << "modulation = " << c.modulation << '\n'
       << "bit_rate = " << c.bit_rate << '\n'
       << "style = " << to_string(c.style) << '\n'
       << "span_length_km = " << c.span_length_km << '\n'
       << "alpha_db_km = " << c.alpha_db_km << '\n'
       << "dispersion_ps_nm_km = " << c.dispersion_ps_nm_km << '\n'
       << "gamma_per_w_km = " << c.gamma_per_w_km << '\n'
       << "edfa_gain_db = " << c.edfa_gain_db << '\n'
       << "edfa_nf_db = " << c.edfa_nf_db << '\n'
       << "dcf_loss_db = " << c.dcf_loss_db << '\n'
       << "steps_per_span = " << c.steps_per_span << '\n'
       << "wavelength_nm = " << c.wavelength_nm << '\n'
       << "noise = " << (c.noise ? "true" : "false") << '\n'
       << "roll_off = " << c.roll_off << '\n'
       << "filter_span = " << c.filter_span << '\n'
       << "oversampling = " << c.oversampling << '\n'
       << "power_reference = " << (c.power_reference == PowerReference::Total ? "total" : "per_polarization") << '\n'
       << "cd_compensation = " << (c.cd_compensation ? "true" : "false") << '\n'
       << "dbp_steps = " << detail::join(c.dbp_steps) << '\n'
       << "dbp_full_rate = " << (c.dbp_full_rate ? "true" : "false") << '\n'
       << "detectors = " << (c.detect_md && c.detect_pw ? "md,pw" : c.detect_md ? "md" : "pw") << '\n'
       << "radii = " << detail::join(c.radii) << '\n'
       << "training = " << c.training << '\n'
       << "testing = " << c.testing << '\n'
       << "seeds = " << detail::join(c.seeds) << '\n'
       << "powers_dbm = " << detail::join(c.powers_dbm) << '\n'
       << "span_counts = " << detail::join(c.span_counts) << '\n'
       << "threads = " << c.threads << '\n';
    return os.str();
}

// FNV-1a over the canonical config text and the point coordinates.
inline std::uint64_t fingerprint(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline const std::vector<std::string>& recipe_names()
{
    static const std::vector<std::string> names{"fig3", "fig4", "fig5", "fig6", "fig7", "fig8"};
    return names;
}

/// Named preset reproducing one figure's scenario.
inline ExperimentConfig recipe(const std::string& name)
{
    ExperimentConfig c;
    c.seeds = {1, 2, 3};
    const auto power_axis = [] { return detail::to_double_list("powers_dbm", "-6:4:1"); };
    if (name == "fig3") {
        // window-size scan, DM 16-QAM 800 km at its optimal power
        c.style = LinkStyle::DM;
        c.span_counts = {10};
        c.powers_dbm = {-1.0};
        c.radii = detail::to_double_list("radii", "0.05:0.6:0.05");
    } else if (name == "fig4") {
        c.style = LinkStyle::DM;
        c.span_counts = {10, 20};
        c.powers_dbm = power_axis();
        c.radii = {0.3};
    } else if (name == "fig5") {
        c.style = LinkStyle::DM;
        c.modulation = 64;
        c.training = 2000;
        c.span_counts = {3, 6};
        c.powers_dbm = power_axis();
        c.radii = {0.15};
    } else if (name == "fig6") {
        c.style = LinkStyle::DUM;
        c.span_counts = {10, 20};
        c.powers_dbm = power_axis();
        c.radii = {0.25};
    } else if (name == "fig7") {
        c.style = LinkStyle::DUM;
        c.modulation = 64;
        c.training = 2000;
        c.span_counts = {3, 6};
        c.powers_dbm = power_axis();
        c.radii = {0.15};
    } else if (name == "fig8") {
        c.style = LinkStyle::DUM;
        c.span_counts = {20};
        c.powers_dbm = detail::to_double_list("powers_dbm", "-2:8:1");
        c.cd_compensation = false;
        c.dbp_steps = {2};
        c.radii = {0.25};
    } else {
        std::string valid;
        for (const auto& n : recipe_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown recipe '" + name + "'; valid names: " + valid);
    }
    validate(c);
    return c;
}

enum class Detector { MD, PW };

struct SweepPoint {
    unsigned spans = 0;
    double power_dbm = 0.0;
    std::uint64_t seed = 0;
};

struct ResultRow {
    LinkStyle style = LinkStyle::DM;
    unsigned modulation = 0;
    unsigned spans = 0;
    double distance_km = 0.0;
    double power_dbm = 0.0;
    std::string detector;  // "MD", "PW" or "error"
    double radius = std::numeric_limits<double>::quiet_NaN();
    unsigned dbp_steps = 0;
    std::uint64_t seed = 0;
    QReport report;
    double walltime_s = 0.0;
    std::string error;
};

inline SpanParams span_params(const ExperimentConfig& c)
{
    SpanParams p;
    p.fiber.length = c.span_length_km * 1e3;
    p.fiber.alpha_db_km = c.alpha_db_km;
    p.fiber.dispersion_ps_nm_km = c.dispersion_ps_nm_km;
    p.fiber.gamma_per_w_km = c.gamma_per_w_km;
    p.fiber.steps = c.steps_per_span;
    p.amplifier = {c.edfa_gain_db, c.edfa_nf_db};
    p.dcf_loss_db = c.dcf_loss_db;
    p.dcf_amplifier_nf_db = c.edfa_nf_db;
    return p;
}

inline LinkSpec build_link(const ExperimentConfig& c, unsigned spans)
{
    const auto p = span_params(c);
    return c.style == LinkStyle::DM ? build_dm_link(p, spans) : build_dum_link(p, spans);
}

/// Optional artifacts captured alongside a point's rows.
struct PointArtifacts {
    std::vector<SpanPower> trace;
    std::optional<TrainingSet> training_x;  // polarization X training set of the first rx variant
};

namespace detail {

// Attach the pipeline stage to any exception escaping `fn`.
template <typename F>
auto staged(const char* stage, F&& fn)
{
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(stage) + ": " + e.what());
    }
}

} // namespace detail

/// Full pipeline for one sweep point. One propagation feeds every receiver
/// variant (dbp_steps) and every detector/radius, one row each.
inline std::vector<ResultRow> run_point(const ExperimentConfig& cfg, const SweepPoint& point,
                                        PointArtifacts* artifacts = nullptr)
{
    const auto start = std::chrono::steady_clock::now();
    const auto c = build_qam(cfg.modulation);
    const std::size_t total = cfg.training + cfg.testing;
    const auto frame = detail::staged("generate_frame",
                                      [&] { return generate_frame(c, cfg.training, total, substream_seed(point.seed, 100)); });
    const double symbol_rate = symbol_rate_for(cfg.bit_rate, c, 2);
    const RrcSpec rrc{cfg.roll_off, cfg.filter_span, cfg.oversampling};
    auto sig = detail::staged("shape", [&] { return shape(frame, rrc, cfg.oversampling, symbol_rate); });
    sig.center_wavelength = cfg.wavelength_nm * 1e-9;
    sig = detail::staged("set_launch_power",
                         [&] { return set_launch_power(std::move(sig), point.power_dbm, cfg.power_reference); });
    // zero spans is back-to-back: the transmitted block goes straight to the receiver
    const auto link = build_link(cfg, point.spans);
    LinkOutput out;
    if (point.spans == 0) {
        out.signal = std::move(sig);
    } else {
        out = detail::staged("propagate_link", [&] {
            return propagate_link(std::move(sig), link, substream_seed(point.seed, 200), {cfg.noise});
        });
    }
    if (artifacts) artifacts->trace = out.trace;

    std::vector<ResultRow> rows;
    const auto base_row = [&] {
        ResultRow r;
        r.style = cfg.style;
        r.modulation = cfg.modulation;
        r.spans = point.spans;
        r.distance_km = point.spans * cfg.span_length_km;
        r.power_dbm = point.power_dbm;
        r.seed = point.seed;
        return r;
    };
    const std::string fp_base = to_text(cfg) + "spans=" + std::to_string(point.spans) +
                                ";power=" + std::to_string(point.power_dbm) + ";seed=" + std::to_string(point.seed);

    for (const unsigned dbp_steps : cfg.dbp_steps) {
        RxChainConfig rx;
        rx.cd_compensation = dbp_steps > 0 ? false : cfg.cd_compensation;
        rx.dbp_steps_per_span = dbp_steps;
        rx.dbp_full_rate = cfg.dbp_full_rate;
        rx.matched_filter = rrc;
        auto received = detail::staged("receive", [&] { return receive(out.signal, link, rx, total); });

        std::array<TrainingSet, 2> train{
            TrainingSet{cvec(received[0].begin(), received[0].begin() + static_cast<long>(cfg.training)),
                        std::vector<Label>(frame.pol[0].labels.begin(), frame.pol[0].labels.begin() + static_cast<long>(cfg.training)),
                        c.order},
            TrainingSet{cvec(received[1].begin(), received[1].begin() + static_cast<long>(cfg.training)),
                        std::vector<Label>(frame.pol[1].labels.begin(), frame.pol[1].labels.begin() + static_cast<long>(cfg.training)),
                        c.order}};
        if (artifacts && !artifacts->training_x) artifacts->training_x = train[0];
        const auto testing = [&](const DualSymbols& s, std::size_t p) {
            return std::span<const cplx>(s[p].data() + cfg.training, cfg.testing);
        };

        if (cfg.detect_pw) {
            for (const double radius : cfg.radii) {
                std::array<DetectionResult, 2> res;
                detail::staged("pw_detect", [&] {
                    for (std::size_t p = 0; p < 2; ++p) res[p] = pw_detect(testing(received, p), train[p], {radius});
                    return 0;
                });
                auto row = base_row();
                row.detector = "PW";
                row.radius = radius;
                row.dbp_steps = dbp_steps;
                row.report = count_errors(res, frame, c);
                row.report.fingerprint =
                    fingerprint(fp_base + ";dbp=" + std::to_string(dbp_steps) + ";pw=" + std::to_string(radius));
                rows.push_back(std::move(row));
            }
        }
        if (cfg.detect_md) {
            auto aligned = received;
            detail::staged("phase_align", [&] { return phase_align(aligned, frame); });
            std::array<DetectionResult, 2> res;
            for (std::size_t p = 0; p < 2; ++p) res[p] = md_detect(testing(aligned, p), c);
            auto row = base_row();
            row.detector = "MD";
            row.dbp_steps = dbp_steps;
            row.report = count_errors(res, frame, c);
            row.report.fingerprint = fingerprint(fp_base + ";dbp=" + std::to_string(dbp_steps) + ";md");
            rows.push_back(std::move(row));
        }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : rows) r.walltime_s = wall;
    return rows;
}

inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg)
{
    std::vector<SweepPoint> points;
    for (const unsigned spans : cfg.span_counts)
        for (const double p : cfg.powers_dbm)
            for (const auto seed : cfg.seeds) points.push_back({spans, p, seed});
    return points;
}

inline bool canonical_less(const ResultRow& a, const ResultRow& b)
{
    const auto key = [](const ResultRow& r) {
        const double radius = std::isnan(r.radius) ? -1.0 : r.radius;
        return std::tuple(r.spans, r.power_dbm, r.seed, r.dbp_steps, r.detector, radius);
    };
    return key(a) < key(b);
}

inline const char* csv_header()
{
    return "style,modulation,spans,distance_km,power_dbm,detector,R,dbp_steps,seed,bit_errors,bits_total,ber,q_db,"
           "fallbacks,walltime_s";
}

inline std::string format_double(double v, const char* fmt)
{
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

inline std::string to_csv(const ResultRow& r)
{
    std::ostringstream os;
    os << to_string(r.style) << ',' << r.modulation << ',' << r.spans << ',' << format_double(r.distance_km, "%.6g")
       << ',' << format_double(r.power_dbm, "%.6g") << ',' << r.detector << ','
       << (std::isnan(r.radius) ? std::string{} : format_double(r.radius, "%.6g")) << ',' << r.dbp_steps << ','
       << r.seed << ',';
    if (r.detector == "error") {
        os << ",,,,," << format_double(r.walltime_s, "%.3f");
        return os.str();
    }
    os << r.report.bit_errors << ',' << r.report.bits_total << ',' << format_double(r.report.ber, "%.9e") << ','
       << format_double(r.report.q_db, "%.6f") << ',' << r.report.fallback_count << ','
       << format_double(r.walltime_s, "%.3f");
    return os.str();
}

inline nlohmann::json to_json(const ResultRow& r)
{
    nlohmann::json j{{"style", to_string(r.style)},
                     {"modulation", r.modulation},
                     {"spans", r.spans},
                     {"distance_km", r.distance_km},
                     {"power_dbm", r.power_dbm},
                     {"detector", r.detector},
                     {"R", std::isnan(r.radius) ? nlohmann::json(nullptr) : nlohmann::json(r.radius)},
                     {"dbp_steps", r.dbp_steps},
                     {"seed", r.seed},
                     {"walltime_s", r.walltime_s}};
    if (r.detector == "error") {
        j["error"] = r.error;
        return j;
    }
    j["bit_errors"] = r.report.bit_errors;
    j["bits_total"] = r.report.bits_total;
    j["symbol_errors"] = r.report.symbol_errors;
    j["symbols_total"] = r.report.symbols_total;
    j["ber"] = r.report.ber;
    j["q_db"] = r.report.q_valid() ? nlohmann::json(r.report.q_db) : nlohmann::json(nullptr);
    j["fallbacks"] = r.report.fallback_count;
    j["fingerprint"] = r.report.fingerprint;
    return j;
}

enum class OutputFormat { CSV, JSON };

inline void write_table(std::ostream& os, const std::vector<ResultRow>& rows, OutputFormat format)
{
    if (format == OutputFormat::CSV) {
        os << csv_header() << '\n';
        for (const auto& r : rows) os << to_csv(r) << '\n';
        return;
    }
    nlohmann::json j{{"schema_version", result_schema_version}, {"version", library_version}};
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) j["rows"].push_back(to_json(r));
    os << j.dump(2) << '\n';
}

/// Run every (span count, power, seed) point, possibly concurrently. Rows
/// stream to `on_rows` under a single writer lock as points finish; a
/// failing point becomes an error row. The returned table is sorted
/// canonically, independent of completion order.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg,
                                        const std::function<void(const std::vector<ResultRow>&)>& on_rows = {})
{
    validate(cfg);
    const auto points = sweep_points(cfg);
    unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(points.size()));

    std::vector<ResultRow> table;
    std::mutex writer;
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            std::vector<ResultRow> rows;
            try {
                rows = run_point(cfg, points[i]);
            } catch (const std::exception& e) {
                ResultRow r;
                r.style = cfg.style;
                r.modulation = cfg.modulation;
                r.spans = points[i].spans;
                r.distance_km = points[i].spans * cfg.span_length_km;
                r.power_dbm = points[i].power_dbm;
                r.seed = points[i].seed;
                r.detector = "error";
                r.error = e.what();
                rows.push_back(std::move(r));
            }
            std::lock_guard lock(writer);
            if (on_rows) on_rows(rows);
            table.insert(table.end(), rows.begin(), rows.end());
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    std::stable_sort(table.begin(), table.end(), canonical_less);
    return table;
}

} // namespace parzenfiber
