#pragma once

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rotorsim/sde.hpp"

namespace rotorsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat sectioned key = value format. Unknown sections or keys are hard
// errors so a typo in a tolerance name cannot silently pass. Any key can be
// overridden through the environment as ROTORSIM_<SECTION>_<KEY>.
class RunConfig {
public:
    using Sections = std::map<std::string, std::map<std::string, std::string>>;

    static const Sections& schema() {
        static const Sections defaults = {
            {"lattice",
             {{"dim", "1"}, {"extents", "8"}, {"defects", ""}, {"defect_signs", ""}}},
            {"model",
             {{"f", "one_plus_pow"},
              {"f_k", "1"},
              {"potential", "linear"},
              {"varsigma", "0.1"},
              {"dissipation", "diagonal"},
              {"p", "2"},
              {"coupling_re", "0"},
              {"coupling_im", "0"},
              {"temperatures", "1.0"},
              {"epsilon", "0.1"},
              {"a", "0.5"}}},
            {"run",
             {{"scheme", "splitting"},
              {"dt", "0.01"},
              {"horizon", "1.0"},
              {"seed", "1"},
              {"ensemble", "1"},
              {"stride", "1"},
              {"time_frame", "fast"}}},
            {"experiment",
             {{"out_dir", "out"},
              {"conservation_tol", "1e-6"},
              {"theta_points", "256"},
              {"residual_states", "100"},
              {"residual_tol", "1e-6"},
              {"oracle_tol", "1e-10"},
              {"drift_vectors", "50"},
              {"drift_tol", "1e-8"},
              {"stationary_samples", "2000"},
              {"thin_dtau", "1.0"},
              {"burn_in_tau", "20"},
              {"mean_rtol", "0.10"},
              {"chi2_bins", "16"},
              {"chi2_pmin", "0.01"},
              {"epsilons", "0.1 0.05 0.025"},
              {"w1_max", "0.08"},
              {"bootstrap_reps", "200"},
              {"lifting_w1_tol", "0.05"},
              {"ks_alpha", "0.01"},
              {"transform_states", "20"},
              {"transform_epsilons", "1e-2 1e-3 1e-4"},
              {"transform_variation", "0.2"},
              {"transform_bound", "10.0"},
              {"roundtrip_tol", "1e-8"}}}};
        return defaults;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return from_text(ss.str());
    }

    static RunConfig from_text(const std::string& text) {
        RunConfig cfg;
        cfg.values_ = schema();
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
                section = trim(line.substr(1, line.size() - 2));
                if (!cfg.values_.count(section))
                    throw ConfigError("unknown config section [" + section + "]");
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (section.empty())
                throw ConfigError("config key '" + key + "' appears before any section");
            cfg.set(section, key, value);
        }
        cfg.apply_env_overrides();
        return cfg;
    }

    // Resolved configs embedded in result JSON can be loaded back verbatim.
    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig cfg;
        cfg.values_ = schema();
        for (auto& [section, keys] : j.items())
            for (auto& [key, value] : keys.items())
                cfg.set(section, key, value.get<std::string>());
        cfg.apply_env_overrides();
        return cfg;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        auto sit = values_.find(section);
        if (sit == values_.end()) throw ConfigError("unknown config section [" + section + "]");
        auto kit = sit->second.find(key);
        if (kit == sit->second.end())
            throw ConfigError("unknown config key " + section + "." + key);
        kit->second = value;
    }

    const std::string& raw(const std::string& section, const std::string& key) const {
        return values_.at(section).at(key);
    }

    double number(const std::string& section, const std::string& key) const {
        try {
            std::size_t pos = 0;
            double v = std::stod(raw(section, key), &pos);
            if (pos != raw(section, key).size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config value " + section + "." + key + " is not a number: '" +
                              raw(section, key) + "'");
        }
    }

    long integer(const std::string& section, const std::string& key) const {
        double v = number(section, key);
        long i = std::lround(v);
        if (i != v) throw ConfigError("config value " + section + "." + key + " must be integral");
        return i;
    }

    std::uint64_t seed() const {
        try {
            return std::stoull(raw("run", "seed"));
        } catch (const std::exception&) {
            throw ConfigError("config value run.seed is not an unsigned integer");
        }
    }

    std::vector<double> number_list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        std::istringstream in(list_normalized(raw(section, key)));
        double v;
        while (in >> v) out.push_back(v);
        if (!in.eof())
            throw ConfigError("config value " + section + "." + key + " is not a number list");
        return out;
    }

    std::vector<int> int_list(const std::string& section, const std::string& key) const {
        std::vector<int> out;
        for (double v : number_list(section, key)) out.push_back(static_cast<int>(std::lround(v)));
        return out;
    }

    // defects: semicolon-separated coordinate tuples, e.g. "2" or "1,0; 2,3"
    std::vector<std::vector<int>> tuple_list(const std::string& section,
                                             const std::string& key) const {
        std::vector<std::vector<int>> out;
        std::istringstream in(raw(section, key));
        std::string item;
        while (std::getline(in, item, ';')) {
            item = trim(item);
            if (item.empty()) continue;
            std::vector<int> tuple;
            std::istringstream ti(list_normalized(item));
            double v;
            while (ti >> v) tuple.push_back(static_cast<int>(std::lround(v)));
            if (tuple.empty() || !ti.eof())
                throw ConfigError("config value " + section + "." + key + " has a bad tuple: '" +
                                  item + "'");
            out.push_back(tuple);
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        for (const auto& [section, keys] : values_)
            for (const auto& [key, value] : keys) j[section][key] = value;
        return j;
    }

    // FNV-1a over the sorted canonical "section.key=value" lines
    std::string hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
        };
        for (const auto& [section, keys] : values_)
            for (const auto& [key, value] : keys) mix(section + "." + key + "=" + value + "\n");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static std::string list_normalized(std::string s) {
        for (auto& c : s)
            if (c == ',') c = ' ';
        return s;
    }

    void apply_env_overrides() {
        extern char** environ;
        const std::string prefix = "ROTORSIM_";
        for (char** e = environ; *e; ++e) {
            std::string entry(*e);
            if (entry.rfind(prefix, 0) != 0) continue;
            auto eq = entry.find('=');
            if (eq == std::string::npos) continue;
            std::string name = entry.substr(prefix.size(), eq - prefix.size());
            std::string value = entry.substr(eq + 1);
            auto us = name.find('_');
            if (us == std::string::npos)
                throw ConfigError("environment override " + prefix + name +
                                  " does not name section_key");
            std::string section = lower(name.substr(0, us));
            std::string key = lower(name.substr(us + 1));
            set(section, key, value);  // unknown keys throw here
        }
    }

    static std::string lower(std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    }

    Sections values_;
};

// --- typed builders ---------------------------------------------------------

inline Lattice lattice_from(const RunConfig& cfg) {
    int dim = static_cast<int>(cfg.integer("lattice", "dim"));
    auto extents = cfg.int_list("lattice", "extents");
    auto defects = cfg.tuple_list("lattice", "defects");
    auto signs = cfg.int_list("lattice", "defect_signs");
    try {
        return build_lattice(dim, extents, defects, signs);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("lattice: ") + e.what());
    }
}

inline ModelSpec model_from(const RunConfig& cfg) {
    const std::string fkind = cfg.raw("model", "f");
    Frequency f;
    if (fkind == "one_plus_pow")
        f = one_plus_pow_frequency(static_cast<int>(cfg.integer("model", "f_k")));
    else
        throw ConfigError("model.f: unknown frequency '" + fkind + "'");

    const std::string pkind = cfg.raw("model", "potential");
    Potential pot;
    if (pkind == "linear")
        pot = linear_potential();
    else if (pkind == "cos_sqrt")
        pot = cos_sqrt_potential(cfg.number("model", "varsigma"));
    else
        throw ConfigError("model.potential: unknown potential '" + pkind + "'");

    const std::string dkind = cfg.raw("model", "dissipation");
    Dissipation diss;
    if (dkind == "none")
        diss.kind = Dissipation::Kind::none;
    else if (dkind == "diagonal")
        diss.kind = Dissipation::Kind::diagonal;
    else if (dkind == "linear_coupled")
        diss.kind = Dissipation::Kind::linear_coupled;
    else if (dkind == "flow_chain")
        diss.kind = Dissipation::Kind::flow_chain;
    else
        throw ConfigError("model.dissipation: unknown stencil '" + dkind + "'");
    diss.coupling = cplx(cfg.number("model", "coupling_re"), cfg.number("model", "coupling_im"));

    double epsilon = cfg.number("model", "epsilon");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw ConfigError("model.epsilon must lie in (0, 1]");
    auto temps = cfg.number_list("model", "temperatures");
    for (double t : temps)
        if (!(t > 0.0)) throw ConfigError("model.temperatures must be positive");

    try {
        return make_model(lattice_from(cfg), f, pot, diss, temps, epsilon,
                          cfg.number("model", "a"), static_cast<int>(cfg.integer("model", "p")));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

inline SdeRun sde_run_from(const RunConfig& cfg) {
    SdeRun r;
    const std::string scheme = cfg.raw("run", "scheme");
    if (scheme == "euler")
        r.scheme = Scheme::euler_maruyama;
    else if (scheme == "splitting")
        r.scheme = Scheme::splitting;
    else if (scheme == "rk4")
        r.scheme = Scheme::rk4;
    else
        throw ConfigError("run.scheme: unknown scheme '" + scheme + "'");
    r.dt = cfg.number("run", "dt");
    r.horizon = cfg.number("run", "horizon");
    r.seed = cfg.seed();
    r.stride = cfg.integer("run", "stride");
    const std::string frame = cfg.raw("run", "time_frame");
    if (frame == "fast")
        r.frame = TimeFrame::fast;
    else if (frame == "slow")
        r.frame = TimeFrame::slow;
    else
        throw ConfigError("run.time_frame: must be 'fast' or 'slow'");
    try {
        validate(r);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("run: ") + e.what());
    }
    return r;
}

inline int ensemble_from(const RunConfig& cfg) {
    long m = cfg.integer("run", "ensemble");
    if (m < 1) throw ConfigError("run.ensemble must be >= 1");
    return static_cast<int>(m);
}

}  // namespace rotorsim
