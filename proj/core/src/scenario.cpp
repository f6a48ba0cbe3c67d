#include "mmflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mmflow/errors.hpp"

namespace mmflow {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw InvalidInput("field \"" + path + "\": " + message);
}

// Typed access to one JSON object; keys never read are rejected by finish().
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            fail(path_, "expected an object");
        }
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) {
        known_.insert(key);
        return j_.contains(key);
    }

    const json& get(const std::string& key) {
        if (!has(key)) {
            fail(at(key), "required field is missing");
        }
        return j_.at(key);
    }

    double number(const std::string& key) {
        const json& v = get(key);
        if (!v.is_number()) {
            fail(at(key), "expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(at(key), "expected a finite number");
        }
        return d;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::uint64_t count(const std::string& key) {
        const json& v = get(key);
        if (v.is_number_unsigned()) {
            return v.get<std::uint64_t>();
        }
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) {
                return static_cast<std::uint64_t>(d);
            }
        }
        fail(at(key), "expected a nonnegative integer");
    }
    std::uint64_t count(const std::string& key, std::uint64_t fallback) { return has(key) ? count(key) : fallback; }

    std::string string(const std::string& key) {
        const json& v = get(key);
        if (!v.is_string()) {
            fail(at(key), "expected a string");
        }
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : fallback;
    }

    const json& array(const std::string& key) {
        const json& v = get(key);
        if (!v.is_array()) {
            fail(at(key), "expected an array");
        }
        return v;
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = array(key);
        std::vector<double> out;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!v[k].is_number() || !std::isfinite(v[k].get<double>())) {
                fail(at(key) + "[" + std::to_string(k) + "]", "expected a finite number");
            }
            out.push_back(v[k].get<double>());
        }
        return out;
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!known_.count(item.key())) {
                fail(at(item.key()), "unknown key");
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

std::string indexed(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

const std::map<std::string, ProfileKind>& profile_kinds() {
    static const std::map<std::string, ProfileKind> kinds{
        {"uniform", ProfileKind::uniform},       {"cosine", ProfileKind::cosine}, {"gaussian", ProfileKind::gaussian},
        {"barenblatt", ProfileKind::barenblatt}, {"grid", ProfileKind::grid},     {"csv", ProfileKind::csv},
    };
    return kinds;
}

std::string profile_name(ProfileKind kind) {
    for (const auto& [name, k] : profile_kinds()) {
        if (k == kind) {
            return name;
        }
    }
    return "uniform";
}

const std::map<std::string, ProbeType>& probe_types() {
    static const std::map<std::string, ProbeType> types{
        {"estimate_report", ProbeType::estimate_report},
        {"contraction_probe", ProbeType::contraction_probe},
        {"convexity_probe", ProbeType::convexity_probe},
        {"weak_form_residual", ProbeType::weak_form_residual},
    };
    return types;
}

std::string probe_name(ProbeType type) {
    for (const auto& [name, t] : probe_types()) {
        if (t == type) {
            return name;
        }
    }
    return "estimate_report";
}

InitialProfile parse_profile(const json& j, const std::string& path, const Domain& domain) {
    Reader r(j, path);
    InitialProfile p;
    const std::string kind = r.string("profile");
    const auto it = profile_kinds().find(kind);
    if (it == profile_kinds().end()) {
        fail(r.at("profile"), "unknown profile '" + kind + "'");
    }
    p.kind = it->second;
    switch (p.kind) {
        case ProfileKind::uniform: break;
        case ProfileKind::cosine:
            p.amplitude = r.number("amplitude", p.amplitude);
            p.frequency = r.number("frequency", p.frequency);
            if (!(std::abs(p.amplitude) < 1.0)) {
                fail(r.at("amplitude"), "must satisfy |amplitude| < 1");
            }
            if (!(p.frequency > 0.0)) {
                fail(r.at("frequency"), "must be positive");
            }
            break;
        case ProfileKind::gaussian:
            p.mean = r.number("mean");
            p.std_dev = r.number("std_dev");
            if (!(p.std_dev > 0.0)) {
                fail(r.at("std_dev"), "must be positive");
            }
            break;
        case ProfileKind::barenblatt:
            p.exponent = r.number("exponent", p.exponent);
            p.time = r.number("time", p.time);
            p.center = r.number("center", p.center);
            if (!(p.exponent > 1.0)) {
                fail(r.at("exponent"), "must exceed 1");
            }
            if (!(p.time > 0.0)) {
                fail(r.at("time"), "must be positive");
            }
            if (!domain.contains(p.center)) {
                fail(r.at("center"), "must lie in the domain");
            }
            break;
        case ProfileKind::grid:
            p.edges = r.numbers("edges");
            p.values = r.numbers("values");
            if (p.edges.size() != p.values.size() + 1) {
                fail(r.at("edges"), "need exactly one more edge than values");
            }
            try {
                (void)GridDensity(domain, p.edges, p.values);
            } catch (const InvalidInput& e) {
                fail(path, e.what());
            }
            break;
        case ProfileKind::csv:
            p.path = r.string("path");
            if (p.path.empty()) {
                fail(r.at("path"), "must not be empty");
            }
            break;
    }
    r.finish();
    return p;
}

InternalEnergy parse_energy(const json& j, const std::string& path) {
    Reader r(j, path);
    const std::string kind = r.string("kind");
    InternalEnergy e = InternalEnergy::zero();
    if (kind == "entropy") {
        e = InternalEnergy::entropy();
    } else if (kind == "power_law") {
        const double m = r.number("exponent");
        if (!(m > 1.0)) {
            fail(r.at("exponent"), "power-law exponent must exceed 1");
        }
        e = InternalEnergy::power_law(m);
    } else if (kind == "zero") {
        e = InternalEnergy::zero();
    } else {
        fail(r.at("kind"), "unknown energy '" + kind + "'");
    }
    if (r.has("gap_floor_factor")) {
        const double f = r.number("gap_floor_factor");
        if (!(f > 0.0)) {
            fail(r.at("gap_floor_factor"), "must be positive");
        }
        e = e.with_gap_floor_factor(f);
    }
    r.finish();
    return e;
}

CostFunction parse_cost(const json& j, const std::string& path, const Domain& domain, std::size_t l, std::size_t i) {
    Reader r(j, path);
    const std::string kind = r.string("kind");
    if (kind == "zero") {
        r.finish();
        return CostFunction::zero(domain, l);
    }
    if (kind == "quadratic_pairwise") {
        if (l != 2) {
            fail(r.at("kind"), "quadratic_pairwise couples exactly 2 populations");
        }
        r.finish();
        return CostFunction::quadratic_pairwise(domain);
    }
    if (kind == "barycenter") {
        const auto weights = r.numbers("weights");
        if (weights.size() + 1 != l) {
            fail(r.at("weights"), "need one weight per other population (" + std::to_string(l - 1) + ")");
        }
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (!(weights[k] > 0.0)) {
                fail(indexed(r.at("weights"), k), "weights must be positive");
            }
        }
        const std::uint64_t center = r.count("center", i);
        if (center >= l) {
            fail(r.at("center"), "center index out of range");
        }
        r.finish();
        return CostFunction::barycenter(domain, weights, center);
    }
    fail(r.at("kind"), "unknown cost '" + kind + "'");
}

ProbeSpec parse_probe(const json& j, const std::string& path, const Domain& domain, std::size_t l) {
    Reader r(j, path);
    ProbeSpec p;
    const std::string type = r.string("type");
    const auto it = probe_types().find(type);
    if (it == probe_types().end()) {
        fail(r.at("type"), "unknown probe '" + type + "'");
    }
    p.type = it->second;
    switch (p.type) {
        case ProbeType::estimate_report: break;
        case ProbeType::contraction_probe: {
            const json& init = r.array("initial");
            if (init.size() != l) {
                fail(r.at("initial"), "need one profile per population");
            }
            for (std::size_t k = 0; k < init.size(); ++k) {
                p.initial.push_back(parse_profile(init[k], indexed(r.at("initial"), k), domain));
            }
            p.slack = r.number("slack", p.slack);
            if (!(p.slack >= 0.0)) {
                fail(r.at("slack"), "must be nonnegative");
            }
            break;
        }
        case ProbeType::convexity_probe:
            p.pairs = r.count("pairs", p.pairs);
            p.seed = r.count("seed", p.seed);
            if (r.has("t_samples")) {
                p.t_samples = r.numbers("t_samples");
            }
            if (p.pairs < 1) {
                fail(r.at("pairs"), "must be at least 1");
            }
            for (std::size_t k = 0; k < p.t_samples.size(); ++k) {
                if (!(p.t_samples[k] >= 0.0 && p.t_samples[k] <= 1.0)) {
                    fail(indexed(r.at("t_samples"), k), "must lie in [0, 1]");
                }
            }
            break;
        case ProbeType::weak_form_residual:
            p.test_function = r.string("test_function", p.test_function);
            if (p.test_function != "bump" && p.test_function != "constant") {
                fail(r.at("test_function"), "unknown test function '" + p.test_function + "'");
            }
            break;
    }
    r.finish();
    return p;
}

ordered_json profile_json(const InitialProfile& p) {
    ordered_json j;
    j["profile"] = profile_name(p.kind);
    switch (p.kind) {
        case ProfileKind::uniform: break;
        case ProfileKind::cosine:
            j["amplitude"] = p.amplitude;
            j["frequency"] = p.frequency;
            break;
        case ProfileKind::gaussian:
            j["mean"] = p.mean;
            j["std_dev"] = p.std_dev;
            break;
        case ProfileKind::barenblatt:
            j["exponent"] = p.exponent;
            j["time"] = p.time;
            j["center"] = p.center;
            break;
        case ProfileKind::grid:
            j["edges"] = p.edges;
            j["values"] = p.values;
            break;
        case ProfileKind::csv: j["path"] = p.path; break;
    }
    return j;
}

ordered_json energy_json(const InternalEnergy& e) {
    ordered_json j;
    switch (e.kind()) {
        case EnergyKind::entropy: j["kind"] = "entropy"; break;
        case EnergyKind::power_law:
            j["kind"] = "power_law";
            j["exponent"] = e.exponent();
            break;
        case EnergyKind::zero: j["kind"] = "zero"; break;
        case EnergyKind::custom: throw InvalidInput("custom energy '" + e.name() + "' has no serialized form");
    }
    if (e.gap_floor_factor() != InternalEnergy::zero().gap_floor_factor()) {
        j["gap_floor_factor"] = e.gap_floor_factor();
    }
    return j;
}

ordered_json cost_json(const CostFunction& c) {
    ordered_json j;
    if (c.is_zero()) {
        j["kind"] = "zero";
    } else if (c.name() == "quadratic_pairwise") {
        j["kind"] = "quadratic_pairwise";
    } else if (c.name() == "barycenter") {
        j["kind"] = "barycenter";
        j["weights"] = c.weights();
        j["center"] = c.center();
    } else {
        throw InvalidInput("custom cost '" + c.name() + "' has no serialized form");
    }
    return j;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

std::vector<double> uniform_edges(const Domain& d, std::size_t cells) {
    std::vector<double> edges(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) {
        edges[k] = d.lower + d.length() * static_cast<double>(k) / static_cast<double>(cells);
    }
    edges.back() = d.upper;
    return edges;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte);
        throw InvalidInput("syntax error at line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                           e.what());
    }
    Reader r(j, "");
    Scenario s;
    s.name = r.string("name");
    {
        Reader d(r.get("domain"), "domain");
        const double lower = d.number("lower");
        const double upper = d.number("upper");
        if (!(lower < upper)) {
            fail("domain", "lower must be below upper");
        }
        d.finish();
        s.domain = Domain(lower, upper);
    }
    s.h = r.number("h");
    if (!(s.h > 0.0)) {
        fail("h", "time step must be positive");
    }
    s.T = r.number("T");
    if (!(s.T > 0.0)) {
        fail("T", "horizon must be positive");
    }
    if (s.T < s.h * (1.0 - 1e-9)) {
        fail("T", "horizon shorter than one time step");
    }
    s.n_particles = r.count("n_particles");
    if (s.n_particles < 2) {
        fail("n_particles", "need at least 2 particles");
    }
    s.tol = r.number("tol", s.tol);
    if (!(s.tol >= 0.0)) {
        fail("tol", "must be nonnegative (0 selects the default)");
    }
    s.max_iterations = r.count("max_iterations", s.max_iterations);
    if (s.max_iterations < 1) {
        fail("max_iterations", "must be at least 1");
    }
    s.record_every = r.count("record_every", s.record_every);
    if (s.record_every < 1) {
        fail("record_every", "must be at least 1");
    }
    const json& pops = r.array("populations");
    const std::size_t l = pops.size();
    if (l < 2) {
        fail("populations", "need at least 2 populations");
    }
    for (std::size_t i = 0; i < l; ++i) {
        const std::string path = indexed("populations", i);
        Reader p(pops[i], path);
        InitialProfile initial = parse_profile(p.get("initial"), p.at("initial"), s.domain);
        InternalEnergy energy = parse_energy(p.get("energy"), p.at("energy"));
        CostFunction cost = parse_cost(p.get("cost"), p.at("cost"), s.domain, l, i);
        p.finish();
        s.populations.push_back({std::move(initial), std::move(energy), std::move(cost)});
    }
    if (r.has("probes")) {
        const json& probes = r.array("probes");
        for (std::size_t k = 0; k < probes.size(); ++k) {
            s.probes.push_back(parse_probe(probes[k], indexed("probes", k), s.domain, l));
        }
    }
    s.output_dir = r.string("output_dir", s.output_dir);
    r.finish();
    return s;
}

std::string serialize_scenario(const Scenario& s) {
    ordered_json j;
    j["name"] = s.name;
    j["domain"] = {{"lower", s.domain.lower}, {"upper", s.domain.upper}};
    j["h"] = s.h;
    j["T"] = s.T;
    j["n_particles"] = s.n_particles;
    j["tol"] = s.tol;
    j["max_iterations"] = s.max_iterations;
    j["record_every"] = s.record_every;
    j["populations"] = ordered_json::array();
    for (const auto& pop : s.populations) {
        ordered_json p;
        p["initial"] = profile_json(pop.initial);
        p["energy"] = energy_json(pop.energy);
        p["cost"] = cost_json(pop.cost);
        j["populations"].push_back(p);
    }
    j["probes"] = ordered_json::array();
    for (const auto& probe : s.probes) {
        ordered_json p;
        p["type"] = probe_name(probe.type);
        switch (probe.type) {
            case ProbeType::estimate_report: break;
            case ProbeType::contraction_probe:
                p["initial"] = ordered_json::array();
                for (const auto& prof : probe.initial) {
                    p["initial"].push_back(profile_json(prof));
                }
                p["slack"] = probe.slack;
                break;
            case ProbeType::convexity_probe:
                p["pairs"] = probe.pairs;
                p["seed"] = probe.seed;
                p["t_samples"] = probe.t_samples;
                break;
            case ProbeType::weak_form_residual: p["test_function"] = probe.test_function; break;
        }
        j["probes"].push_back(p);
    }
    j["output_dir"] = s.output_dir;
    return j.dump(2) + "\n";
}

namespace {

InitialProfile cosine(double amplitude, double frequency) {
    InitialProfile p;
    p.kind = ProfileKind::cosine;
    p.amplitude = amplitude;
    p.frequency = frequency;
    return p;
}

InitialProfile gaussian(double mean, double std_dev) {
    InitialProfile p;
    p.kind = ProfileKind::gaussian;
    p.mean = mean;
    p.std_dev = std_dev;
    return p;
}

InitialProfile barenblatt_profile(double m, double t, double center) {
    InitialProfile p;
    p.kind = ProfileKind::barenblatt;
    p.exponent = m;
    p.time = t;
    p.center = center;
    return p;
}

ProbeSpec probe_of(ProbeType type) {
    ProbeSpec p;
    p.type = type;
    return p;
}

ProbeSpec contraction_of(std::vector<InitialProfile> initial) {
    ProbeSpec p = probe_of(ProbeType::contraction_probe);
    p.initial = std::move(initial);
    return p;
}

Scenario base(std::string name, Domain domain, double h, double T, std::size_t n, std::size_t record_every) {
    Scenario s;
    s.output_dir = "output/" + name;
    s.name = std::move(name);
    s.domain = domain;
    s.h = h;
    s.T = T;
    s.n_particles = n;
    s.record_every = record_every;
    return s;
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"identity", "heat", "barycenter3", "porous_medium", "attraction"};
    return names;
}

Scenario preset(const std::string& name) {
    if (name == "identity") {
        Scenario s = base(name, Domain(0.0, 1.0), 0.01, 0.5, 64, 10);
        const auto zero = CostFunction::zero(s.domain, 2);
        s.populations.push_back({InitialProfile{}, InternalEnergy::zero(), zero});
        s.populations.push_back({cosine(0.5, 1.0), InternalEnergy::zero(), zero});
        s.probes = {probe_of(ProbeType::estimate_report), contraction_of({gaussian(0.5, 0.2), cosine(-0.5, 1.0)}),
                    probe_of(ProbeType::weak_form_residual)};
        return s;
    }
    if (name == "heat") {
        Scenario s = base(name, Domain(0.0, 1.0), 0.01, 2.0, 128, 10);
        const auto zero = CostFunction::zero(s.domain, 2);
        s.populations.push_back({cosine(0.5, 1.0), InternalEnergy::entropy(), zero});
        s.populations.push_back({cosine(-0.5, 2.0), InternalEnergy::entropy(), zero});
        s.probes = {probe_of(ProbeType::estimate_report), contraction_of({cosine(0.3, 1.0), cosine(-0.3, 2.0)}),
                    probe_of(ProbeType::weak_form_residual)};
        return s;
    }
    if (name == "barycenter3") {
        Scenario s = base(name, Domain(0.0, 1.0), 0.01, 1.0, 128, 10);
        const std::vector<InitialProfile> initial{gaussian(0.3, 0.12), gaussian(0.6, 0.15), cosine(0.5, 1.0)};
        for (std::size_t i = 0; i < 3; ++i) {
            s.populations.push_back({initial[i], InternalEnergy::entropy(), CostFunction::barycenter(s.domain, {1.0, 1.0}, i)});
        }
        s.probes = {probe_of(ProbeType::estimate_report),
                    contraction_of({gaussian(0.35, 0.12), gaussian(0.55, 0.15), cosine(0.4, 1.0)}),
                    probe_of(ProbeType::convexity_probe), probe_of(ProbeType::weak_form_residual)};
        return s;
    }
    if (name == "porous_medium") {
        Scenario s = base(name, Domain(-1.0, 1.0), 2e-3, 0.05, 256, 5);
        const auto zero = CostFunction::zero(s.domain, 2);
        s.populations.push_back({barenblatt_profile(2.0, 0.01, 0.0), InternalEnergy::power_law(2.0), zero});
        s.populations.push_back({barenblatt_profile(2.0, 0.02, 0.0), InternalEnergy::power_law(2.0), zero});
        s.probes = {probe_of(ProbeType::estimate_report), probe_of(ProbeType::weak_form_residual)};
        return s;
    }
    if (name == "attraction") {
        Scenario s = base(name, Domain(0.0, 1.0), 0.01, 1.0, 64, 10);
        const auto cost = CostFunction::quadratic_pairwise(s.domain);
        s.populations.push_back({gaussian(0.3, 0.05), InternalEnergy::zero(), cost});
        s.populations.push_back({gaussian(0.7, 0.05), InternalEnergy::zero(), cost});
        s.probes = {probe_of(ProbeType::estimate_report), contraction_of({gaussian(0.25, 0.05), gaussian(0.75, 0.05)})};
        return s;
    }
    throw InvalidInput("unknown preset '" + name + "'");
}

GridDensity load_grid_csv(std::istream& in, Domain domain) {
    std::vector<double> edges, values;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> cols;
        std::stringstream row(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(row, cell, ',')) {
            std::istringstream parse(cell);
            parse.imbue(std::locale::classic());
            double v;
            if (!(parse >> v) || !(parse >> std::ws).eof()) {
                numeric = false;
                break;
            }
            cols.push_back(v);
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw InvalidInput("grid CSV line " + std::to_string(line_no) + ": expected three numbers");
        }
        first = false;
        if (cols.size() != 3) {
            throw InvalidInput("grid CSV line " + std::to_string(line_no) + ": expected edge_left,edge_right,value");
        }
        if (edges.empty()) {
            edges.push_back(cols[0]);
        } else if (cols[0] != edges.back()) {
            throw InvalidInput("grid CSV line " + std::to_string(line_no) + ": cell does not start at the previous edge");
        }
        edges.push_back(cols[1]);
        values.push_back(cols[2]);
    }
    if (values.empty()) {
        throw InvalidInput("grid CSV has no cells");
    }
    return GridDensity(domain, std::move(edges), std::move(values));
}

GridDensity load_grid_csv(const std::filesystem::path& path, Domain domain) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open grid CSV '" + path.string() + "'");
    }
    return load_grid_csv(in, domain);
}

GridDensity profile_density(const InitialProfile& p, Domain domain, const std::filesystem::path& base_dir,
                            std::size_t cells) {
    const double lo = domain.lower, len = domain.length();
    switch (p.kind) {
        case ProfileKind::uniform: return GridDensity(domain, {domain.lower, domain.upper}, {1.0 / len});
        case ProfileKind::grid: return GridDensity(domain, p.edges, p.values);
        case ProfileKind::csv: {
            std::filesystem::path path(p.path);
            return load_grid_csv(path.is_absolute() ? path : base_dir / path, domain);
        }
        default: break;
    }
    const auto edges = uniform_edges(domain, cells);
    std::vector<double> values(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        const double a = edges[c], b = edges[c + 1];
        double mass = 0.0;
        if (p.kind == ProfileKind::cosine) {
            const double w = std::numbers::pi * p.frequency / len;
            mass = (b - a) + p.amplitude * (std::sin(w * (b - lo)) - std::sin(w * (a - lo))) / w;
        } else if (p.kind == ProfileKind::gaussian) {
            const double s = p.std_dev * std::sqrt(2.0);
            mass = 0.5 * (std::erf((b - p.mean) / s) - std::erf((a - p.mean) / s));
        } else {
            // 5-point Gauss-Legendre per cell.
            static constexpr double nodes[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                                0.9061798459386640};
            static constexpr double weights[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                                  0.2369268850561891, 0.2369268850561891};
            for (int q = 0; q < 5; ++q) {
                const double x = 0.5 * (a + b) + 0.5 * (b - a) * nodes[q];
                mass += 0.5 * (b - a) * weights[q] * barenblatt(p.exponent, p.time, x, p.center);
            }
        }
        values[c] = std::max(mass, 0.0) / (b - a);
    }
    return GridDensity::from_unnormalized(domain, edges, values);
}

FlowConfig build_flow_config(const Scenario& s, const std::filesystem::path& base_dir) {
    FlowConfig cfg;
    cfg.domain = s.domain;
    cfg.h = s.h;
    cfg.T = s.T;
    cfg.n_particles = s.n_particles;
    cfg.tol = s.tol;
    cfg.max_iterations = s.max_iterations;
    cfg.record_every = s.record_every;
    for (std::size_t i = 0; i < s.populations.size(); ++i) {
        const auto& pop = s.populations[i];
        GridDensity grid = [&] {
            try {
                return profile_density(pop.initial, s.domain, base_dir);
            } catch (const InvalidInput& e) {
                fail(indexed("populations", i) + ".initial", e.what());
            }
        }();
        cfg.populations.push_back({std::move(grid), pop.energy, pop.cost});
    }
    cfg.validate();
    discretize_initial(cfg);
    return cfg;
}

namespace {

ParticleDensity random_particles(std::mt19937_64& rng, const Domain& d, std::size_t n) {
    std::uniform_real_distribution<double> u(d.lower, d.upper);
    std::vector<double> x(n);
    for (double& v : x) {
        v = u(rng);
    }
    std::sort(x.begin(), x.end());
    return ParticleDensity(d, std::move(x));
}

struct ProbeOutcome {
    std::vector<std::string> lines;
    bool failed = false;
};

void add_line(ProbeOutcome& out, const std::string& status, const std::string& text) {
    out.lines.push_back(status + " " + text);
    if (status == "FAIL") {
        out.failed = true;
    }
}

std::string pass(bool ok) { return ok ? "PASS" : "FAIL"; }

ProbeOutcome run_estimates(const FlowTrajectory& tr) {
    ProbeOutcome out;
    const EstimateReport rep = estimate_report(tr);
    for (std::size_t i = 0; i < rep.populations.size(); ++i) {
        const auto& e = rep.populations[i];
        const std::string pop = "population " + std::to_string(i);
        add_line(out, pass(e.descent_ok),
                 "descent " + pop + " max_objective_change=" + format_number(e.max_descent_violation) +
                     " limit=" + format_number(10.0 * tr.tol));
        add_line(out, pass(e.telescoping_ok),
                 "telescoping " + pop + " sum_w2_sq=" + format_number(e.sum_w2_sq) +
                     " bound=" + format_number(e.telescoping_bound) + " ratio_over_h=" + format_number(e.ratio));
        add_line(out, pass(e.energy_ok),
                 "energy_bound " + pop + " initial_energy=" + format_number(e.initial_energy) +
                     " max_energy=" + format_number(e.max_energy) + " bound=" + format_number(e.energy_bound) +
                     " lipschitz=" + format_number(e.lipschitz));
    }
    return out;
}

ProbeOutcome run_contraction(const FlowConfig& cfg, const std::vector<ParticleDensity>& init_a, const ProbeSpec& spec,
                             const Scenario& s, const std::filesystem::path& base_dir) {
    ProbeOutcome out;
    std::vector<ParticleDensity> init_b;
    for (std::size_t i = 0; i < spec.initial.size(); ++i) {
        init_b.push_back(from_grid(profile_density(spec.initial[i], s.domain, base_dir), cfg.n_particles));
    }
    const ContractionReport rep = contraction_probe(cfg, init_a, init_b, spec.slack);
    if (rep.skipped) {
        add_line(out, "SKIPPED", "contraction reason=" + rep.reason);
        return out;
    }
    add_line(out, pass(rep.passed),
             "contraction max_violation=" + format_number(rep.max_violation) + " slack=" + format_number(rep.slack) +
                 " c_probe=" + format_number(rep.c_probe) + " initial_distance=" + format_number(rep.distance.front()) +
                 " final_distance=" + format_number(rep.distance.back()));
    return out;
}

ProbeOutcome run_convexity(const FlowConfig& cfg, const ProbeSpec& spec) {
    ProbeOutcome out;
    const std::size_t l = cfg.populations.size();
    for (std::size_t i = 0; i < l; ++i) {
        const CostFunction& cost = cfg.populations[i].cost;
        std::mt19937_64 rng(spec.seed + i);
        double worst = 0.0;
        bool advisory = false;
        for (std::size_t k = 0; k < spec.pairs; ++k) {
            std::vector<ParticleDensity> a, b;
            for (std::size_t q = 0; q < l; ++q) {
                a.push_back(random_particles(rng, cfg.domain, cfg.n_particles));
                b.push_back(random_particles(rng, cfg.domain, cfg.n_particles));
            }
            const ConvexityReport rep = convexity_probe(cost, a, b, spec.t_samples);
            worst = std::max(worst, rep.max_violation);
            advisory = rep.advisory_only;
        }
        const std::string text = "convexity population " + std::to_string(i) + " pairs=" + std::to_string(spec.pairs) +
                                 " max_violation=" + format_number(worst);
        if (advisory) {
            add_line(out, "SKIPPED", text + " reason=cost not certified comonotone (advisory)");
        } else {
            add_line(out, pass(worst <= 1e-8), text + " limit=1e-08");
        }
    }
    return out;
}

ProbeOutcome run_weak_form(const FlowTrajectory& tr, const ProbeSpec& spec, const Domain& d) {
    ProbeOutcome out;
    const TestFunction phi = spec.test_function == "constant"
                                 ? TestFunction::constant()
                                 : TestFunction::bump(0.5 * (d.lower + d.upper), 0.3 * d.length());
    const WeakFormReport rep = weak_form_residual(tr, phi);
    for (std::size_t i = 0; i < rep.residual.size(); ++i) {
        add_line(out, pass(rep.residual[i] <= rep.bound[i] + 1e-12),
                 "weak_form population " + std::to_string(i) + " test_function=" + phi.name +
                     " residual=" + format_number(rep.residual[i]) + " bound=" + format_number(rep.bound[i]));
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput("cannot write '" + path.string() + "'");
    }
    out << text;
}

}  // namespace

RunResult run_scenario(const Scenario& s, const RunOptions& options) {
    RunResult result;
    const std::filesystem::path dir = options.output_dir.empty() ? std::filesystem::path(s.output_dir) : options.output_dir;
    bool complete = false;
    try {
        std::filesystem::create_directories(dir);
        const FlowConfig cfg = build_flow_config(s, options.base_dir);
        const FlowTrajectory tr = run_flow(cfg);
        for (std::size_t i = 0; i < tr.populations(); ++i) {
            const std::string file = "trajectory_pop" + std::to_string(i) + ".csv";
            std::ostringstream csv;
            write_trajectory_csv(tr, i, csv);
            write_text(dir / file, csv.str());
            result.files.push_back(file);
        }
        {
            std::ostringstream csv;
            write_diagnostics_csv(tr, csv);
            write_text(dir / "diagnostics.csv", csv.str());
            result.files.push_back("diagnostics.csv");
        }
        std::map<std::string, int> seen;
        for (const auto& probe : s.probes) {
            ProbeOutcome outcome;
            switch (probe.type) {
                case ProbeType::estimate_report: outcome = run_estimates(tr); break;
                case ProbeType::contraction_probe:
                    outcome = run_contraction(cfg, tr.states.front(), probe, s, options.base_dir);
                    break;
                case ProbeType::convexity_probe: outcome = run_convexity(cfg, probe); break;
                case ProbeType::weak_form_residual: outcome = run_weak_form(tr, probe, s.domain); break;
            }
            const std::string type = probe_name(probe.type);
            const int count = ++seen[type];
            const std::string file = "probe_" + type + (count > 1 ? "_" + std::to_string(count) : "") + ".txt";
            std::string text;
            for (const auto& line : outcome.lines) {
                text += line + "\n";
            }
            write_text(dir / file, text);
            result.files.push_back(file);
            if (outcome.failed && result.exit_code == 0) {
                result.exit_code = 1;
                result.message = "probe " + type + " failed (" + file + ")";
            }
        }
        complete = true;
    } catch (const NumericalFailure& e) {
        result.exit_code = 3;
        result.message = std::string("numerical failure: ") + e.what();
    } catch (const Error& e) {
        result.exit_code = 2;
        result.message = std::string("input error: ") + e.what();
    } catch (const std::filesystem::filesystem_error& e) {
        result.exit_code = 2;
        result.message = std::string("output error: ") + e.what();
    }
    std::string manifest = "scenario " + s.name + "\n";
    manifest += std::string("status ") + (complete ? "complete" : "incomplete") + "\n";
    manifest += "exit_code " + std::to_string(result.exit_code) + "\n";
    if (!result.message.empty()) {
        manifest += "message " + result.message + "\n";
    }
    for (const auto& f : result.files) {
        manifest += "file " + f + "\n";
    }
    try {
        write_text(dir / "MANIFEST", manifest);
    } catch (const Error&) {
        // output directory unusable; the exit code already reports it
    }
    return result;
}

}  // namespace mmflow
