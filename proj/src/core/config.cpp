#include "core/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace thbx {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line;
};

std::vector<Entry> tokenize(const std::string& text) {
    std::vector<Entry> entries;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw validation_error("config line " + std::to_string(lineno) +
                                       ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw validation_error("config line " + std::to_string(lineno) +
                                   ": expected 'key = value', got '" + line + "'");
        entries.push_back(
            {section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno});
    }
    return entries;
}

double parse_real(const Entry& e) {
    try {
        std::size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (trim(e.value.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw validation_error("config field '" + e.section + "." + e.key +
                           "': expected a number, got '" + e.value + "'");
}

int parse_int(const Entry& e) {
    const double v = parse_real(e);
    if (v != static_cast<double>(static_cast<long long>(v)))
        throw validation_error("config field '" + e.section + "." + e.key +
                               "': expected an integer, got '" + e.value + "'");
    return static_cast<int>(v);
}

bool parse_bool(const Entry& e) {
    if (e.value == "true" || e.value == "1" || e.value == "on") return true;
    if (e.value == "false" || e.value == "0" || e.value == "off") return false;
    throw validation_error("config field '" + e.section + "." + e.key +
                           "': expected true/false, got '" + e.value + "'");
}

Vec2 parse_vec2(const Entry& e) {
    std::istringstream is(e.value);
    double x, y;
    if (is >> x >> y) {
        std::string rest;
        if (!(is >> rest)) return Vec2(x, y);
    }
    throw validation_error("config field '" + e.section + "." + e.key +
                           "': expected two numbers, got '" + e.value + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    for (const Entry& e : tokenize(text)) {
        const std::string where = "config field '" + e.section + "." + e.key + "'";
        if (e.section == "run") {
            if (e.key == "problem")
                cfg.problem = e.value;
            else if (e.key == "geometry")
                cfg.geometry_path = e.value;
            else if (e.key == "degree")
                cfg.degree = parse_int(e);
            else if (e.key == "initial_elements")
                cfg.initial_elements = parse_int(e);
            else if (e.key == "out_dir")
                cfg.out_dir = e.value;
            else if (e.key == "seed")
                cfg.seed = static_cast<unsigned>(parse_int(e));
            else if (e.key == "record_timing")
                cfg.record_timing = parse_bool(e);
            else if (e.key == "truncated")
                cfg.truncated = parse_bool(e);
            else
                throw validation_error(where + ": unknown key");
        } else if (e.section == "adaptivity") {
            if (e.key == "theta")
                cfg.adaptivity.theta = parse_real(e);
            else if (e.key == "max_iterations")
                cfg.adaptivity.max_iterations = parse_int(e);
            else if (e.key == "max_levels")
                cfg.adaptivity.max_levels = parse_int(e);
            else if (e.key == "marking")
                cfg.marking = e.value;
            else if (e.key == "tolerance")
                cfg.adaptivity.tolerance = parse_real(e);
            else if (e.key == "reference_levels")
                cfg.adaptivity.reference_levels = parse_int(e);
            else
                throw validation_error(where + ": unknown key");
        } else if (e.section == "materials") {
            const std::size_t dot = e.key.find('.');
            if (dot == std::string::npos || dot == 0 || dot + 1 >= e.key.size())
                throw validation_error(where + ": expected '<tag>.<mu_r|br|jz>'");
            const std::string tag = e.key.substr(0, dot);
            const std::string field = e.key.substr(dot + 1);
            MaterialOverride& ov = cfg.material_overrides[tag];
            if (field == "mu_r")
                ov.mu_r = parse_real(e);
            else if (field == "br")
                ov.br = parse_vec2(e);
            else if (field == "jz")
                ov.jz = parse_real(e);
            else
                throw validation_error(where + ": unknown material field '" + field + "'");
        } else if (e.section == "export") {
            if (e.key == "fields_resolution")
                cfg.fields_resolution = parse_int(e);
            else if (e.key == "write_fields")
                cfg.write_fields = parse_bool(e);
            else if (e.key == "write_mesh")
                cfg.write_mesh = parse_bool(e);
            else
                throw validation_error(where + ": unknown key");
        } else {
            throw validation_error("config section '" + e.section + "': unknown section");
        }
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

void validate_config(const RunConfig& cfg, const std::string& base_dir) {
    if (cfg.problem != "poisson_peak" && cfg.problem != "magnetostatic_horseshoe" &&
        cfg.problem != "custom")
        throw validation_error(
            "config field 'run.problem': must be one of poisson_peak, "
            "magnetostatic_horseshoe, custom; got '" +
            cfg.problem + "'");
    if (cfg.degree < 1 || cfg.degree > KnotVector::max_degree)
        throw validation_error("config field 'run.degree': must be in [1, 8], got " +
                               std::to_string(cfg.degree));
    if (cfg.initial_elements < 1)
        throw validation_error("config field 'run.initial_elements': must be >= 1");
    if (cfg.problem != "poisson_peak") {
        if (cfg.geometry_path.empty())
            throw validation_error("config field 'run.geometry': required for problem '" +
                                   cfg.problem + "'");
        std::filesystem::path p(cfg.geometry_path);
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        if (!std::filesystem::exists(p))
            throw validation_error("config field 'run.geometry': path '" + p.string() +
                                   "' does not exist");
    }
    if (!(cfg.adaptivity.theta > 0.0 && cfg.adaptivity.theta < 1.0))
        throw validation_error("config field 'adaptivity.theta': must lie in (0, 1), got " +
                               std::to_string(cfg.adaptivity.theta));
    if (cfg.adaptivity.max_iterations < 0)
        throw validation_error("config field 'adaptivity.max_iterations': must be >= 0");
    if (cfg.adaptivity.max_levels < 1)
        throw validation_error("config field 'adaptivity.max_levels': must be >= 1");
    if (cfg.adaptivity.reference_levels < 1)
        throw validation_error("config field 'adaptivity.reference_levels': must be >= 1");
    if (cfg.marking != "estimator" && cfg.marking != "true_error" && cfg.marking != "mark_all" &&
        cfg.marking != "uniform")
        throw validation_error(
            "config field 'adaptivity.marking': must be one of estimator, true_error, "
            "mark_all, uniform; got '" +
            cfg.marking + "'");
    if (cfg.fields_resolution < 2)
        throw validation_error("config field 'export.fields_resolution': must be >= 2");
    for (const auto& [tag, ov] : cfg.material_overrides)
        if (ov.mu_r && !(*ov.mu_r > 0.0))
            throw validation_error("config field 'materials." + tag +
                                   ".mu_r': must be positive");
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    char buf[32];
    const auto real = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "[run]\n";
    os << "problem = " << cfg.problem << "\n";
    if (!cfg.geometry_path.empty()) os << "geometry = " << cfg.geometry_path << "\n";
    os << "degree = " << cfg.degree << "\n";
    os << "initial_elements = " << cfg.initial_elements << "\n";
    os << "out_dir = " << cfg.out_dir << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "record_timing = " << (cfg.record_timing ? "true" : "false") << "\n";
    os << "truncated = " << (cfg.truncated ? "true" : "false") << "\n";
    os << "\n[adaptivity]\n";
    os << "theta = " << real(cfg.adaptivity.theta) << "\n";
    os << "max_iterations = " << cfg.adaptivity.max_iterations << "\n";
    os << "max_levels = " << cfg.adaptivity.max_levels << "\n";
    os << "marking = " << cfg.marking << "\n";
    os << "tolerance = " << real(cfg.adaptivity.tolerance) << "\n";
    os << "reference_levels = " << cfg.adaptivity.reference_levels << "\n";
    if (!cfg.material_overrides.empty()) {
        os << "\n[materials]\n";
        for (const auto& [tag, ov] : cfg.material_overrides) {
            if (ov.mu_r) os << tag << ".mu_r = " << real(*ov.mu_r) << "\n";
            if (ov.br)
                os << tag << ".br = " << real(ov.br->x()) << ' ' << real(ov.br->y()) << "\n";
            if (ov.jz) os << tag << ".jz = " << real(*ov.jz) << "\n";
        }
    }
    os << "\n[export]\n";
    os << "fields_resolution = " << cfg.fields_resolution << "\n";
    os << "write_fields = " << (cfg.write_fields ? "true" : "false") << "\n";
    os << "write_mesh = " << (cfg.write_mesh ? "true" : "false") << "\n";
    return os.str();
}

MarkingMode marking_mode_of(const RunConfig& cfg) {
    if (cfg.marking == "estimator") return MarkingMode::Estimator;
    if (cfg.marking == "true_error") return MarkingMode::TrueError;
    return MarkingMode::MarkAll;
}

}  // namespace thbx
