#include "r2ch/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace r2ch {

ConfigError::ConfigError(const std::string& message, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

IntegratorConfig RunConfig::integrator() const {
    IntegratorConfig c;
    c.t_end = t_end;
    c.rtol = rtol;
    c.atol = atol;
    c.blowup_threshold = G;
    c.dt_floor = dt_floor;
    c.dt_initial = dt_initial;
    c.fixed_dt = fixed_dt;
    c.diag_every = diag_every;
    c.dense_threshold = dense_threshold;
    c.snapshot_every = snapshot_every;
    return c;
}

namespace {

struct Entry {
    std::string key;
    std::string value;
    std::size_t line;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<Entry> tokenize(const std::string& text) {
    std::vector<Entry> entries;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + body + "'", line);
        Entry e{trim(body.substr(0, eq)), trim(body.substr(eq + 1)), line};
        if (e.key.empty()) throw ConfigError("empty key", line);
        if (e.value.empty()) throw ConfigError("empty value for key '" + e.key + "'", line);
        if (!seen.insert(e.key).second) throw ConfigError("duplicate key '" + e.key + "'", line);
        entries.push_back(std::move(e));
    }
    return entries;
}

double parse_double(const std::string& s, const std::string& key, std::size_t line) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ConfigError("'" + key + "' expects a number, got '" + s + "'", line);
    if (!std::isfinite(v)) throw ConfigError("'" + key + "' must be finite", line);
    return v;
}

std::size_t parse_count(const std::string& s, const std::string& key, std::size_t line) {
    unsigned long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError("'" + key + "' expects a nonnegative integer, got '" + s + "'", line);
    return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& s, const std::string& key, std::size_t line) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + s + "'", line);
}

ProfileTerm parse_profile(const std::string& value, const std::string& key, std::size_t line, bool for_eta) {
    std::istringstream in(value);
    std::string kind;
    in >> kind;
    ProfileTerm term;
    if (kind == "gaussian_bump")
        term.kind = ProfileKind::gaussian_bump;
    else if (kind == "slope_bump")
        term.kind = ProfileKind::slope_bump;
    else if (kind == "eta_bump")
        term.kind = ProfileKind::eta_bump;
    else
        throw ConfigError("'" + key + "': unknown profile '" + kind + "'", line);
    if (for_eta != (term.kind == ProfileKind::eta_bump))
        throw ConfigError("'" + key + "': " + kind + (for_eta ? " cannot seed eta" : " cannot seed u"), line);

    const std::string amp_name = for_eta ? "b" : "a";
    bool have_amp = false, have_w = false;
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigError("'" + key + "': expected name=value, got '" + tok + "'", line);
        const std::string name = tok.substr(0, eq);
        const double v = parse_double(tok.substr(eq + 1), key + "." + name, line);
        if (name == amp_name) {
            term.amplitude = v;
            have_amp = true;
        } else if (name == "w") {
            term.width = v;
            have_w = true;
        } else if (name == "xc") {
            term.center = v;
        } else {
            throw ConfigError("'" + key + "': unknown profile parameter '" + name + "'", line);
        }
    }
    if (!have_amp) throw ConfigError("'" + key + "': missing amplitude " + amp_name + "=", line);
    if (!have_w) throw ConfigError("'" + key + "': missing width w=", line);
    if (!(term.width > 0.0)) throw ConfigError("'" + key + "': width must be positive", line);
    return term;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

RunConfig interpret(const std::vector<Entry>& entries) {
    RunConfig c;
    std::optional<double> A, sigma, mu, Omega;
    std::size_t params_line = 0;
    bool have_initial = false;

    using Setter = std::function<void(const Entry&)>;
    const auto num = [](double& dst) { return Setter([&dst](const Entry& e) { dst = parse_double(e.value, e.key, e.line); }); };
    const auto cnt = [](std::size_t& dst) {
        return Setter([&dst](const Entry& e) { dst = parse_count(e.value, e.key, e.line); });
    };
    const auto opt = [&params_line](std::optional<double>& dst) {
        return Setter([&dst, &params_line](const Entry& e) {
            dst = parse_double(e.value, e.key, e.line);
            params_line = e.line;
        });
    };
    const std::map<std::string, Setter> setters = {
        {"params.A", opt(A)},
        {"params.sigma", opt(sigma)},
        {"params.mu", opt(mu)},
        {"params.Omega", opt(Omega)},
        {"grid.L", num(c.L)},
        {"grid.n", cnt(c.n)},
        {"run.t_end", num(c.t_end)},
        {"run.rtol", num(c.rtol)},
        {"run.atol", num(c.atol)},
        {"run.G", num(c.G)},
        {"run.dt_floor", num(c.dt_floor)},
        {"run.dt_initial", num(c.dt_initial)},
        {"run.fixed_dt", num(c.fixed_dt)},
        {"run.diag_every", cnt(c.diag_every)},
        {"run.dense_threshold", num(c.dense_threshold)},
        {"output.snapshot_every", cnt(c.snapshot_every)},
        {"output.dir", [&c](const Entry& e) { c.out_dir = e.value; }},
        {"fit.M_lo", num(c.window.M_lo)},
        {"fit.M_hi", num(c.window.M_hi)},
        {"thm42.M_assumed",
         [&c](const Entry& e) { c.M_assumed = parse_double(e.value, e.key, e.line); }},
        {"characteristics.seeds", cnt(c.characteristic_seeds)},
        {"initial.eta_zero",
         [&c, &have_initial](const Entry& e) {
             c.initial.eta_zero = parse_bool(e.value, e.key, e.line);
             have_initial = have_initial || c.initial.eta_zero;
         }},
        {"initial.decay_tol", num(c.initial.decay_tol)},
    };

    for (const auto& e : entries) {
        if (e.key.rfind("u.", 0) == 0 && e.key.size() > 2) {
            c.initial.u_terms.push_back(parse_profile(e.value, e.key, e.line, false));
            have_initial = true;
        } else if (e.key.rfind("eta.", 0) == 0 && e.key.size() > 4) {
            c.initial.eta_terms.push_back(parse_profile(e.value, e.key, e.line, true));
            have_initial = true;
        } else if (e.key.rfind("sweep.", 0) == 0) {
            const std::string target = e.key.substr(6);
            if (target.empty() || target.rfind("sweep.", 0) == 0)
                throw ConfigError("invalid sweep axis '" + e.key + "'", e.line);
            auto values = split_list(e.value);
            if (values.empty()) throw ConfigError("sweep axis '" + e.key + "' has no values", e.line);
            c.sweep_axes.emplace_back(target, std::move(values));
        } else if (auto it = setters.find(e.key); it != setters.end()) {
            it->second(e);
        } else {
            throw ConfigError("unknown key '" + e.key + "'", e.line);
        }
    }

    for (const auto& [name, value] : {std::pair{"params.A", A}, std::pair{"params.sigma", sigma},
                                      std::pair{"params.mu", mu}, std::pair{"params.Omega", Omega}})
        if (!value) throw ConfigError(std::string("missing required key '") + name + "'");
    try {
        c.params = PhysParams(*A, *sigma, *mu, *Omega);
    } catch (const InvalidArgument& ex) {
        throw ConfigError(ex.what(), params_line);
    }
    if (!have_initial) throw ConfigError("no initial data: give at least one u.<tag> or eta.<tag> line");
    validate(c);
    return c;
}

}  // namespace

void validate(const RunConfig& c) {
    if (!(c.t_end > 0.0)) throw ConfigError("run.t_end must be positive");
    if (!(c.L > 0.0)) throw ConfigError("grid.L must be positive");
    if (c.n < 16 || (c.n & (c.n - 1)) != 0) throw ConfigError("grid.n must be a power of two and at least 16");
    if (!(c.rtol > 0.0) || !(c.atol > 0.0)) throw ConfigError("run.rtol and run.atol must be positive");
    if (!(c.dt_floor > 0.0)) throw ConfigError("run.dt_floor must be positive");
    if (!(c.dt_initial > 0.0)) throw ConfigError("run.dt_initial must be positive");
    if (c.fixed_dt < 0.0) throw ConfigError("run.fixed_dt must be nonnegative");
    if (c.diag_every == 0) throw ConfigError("run.diag_every must be at least 1");
    if (!(c.dense_threshold > 0.0)) throw ConfigError("run.dense_threshold must be positive");
    if (!(c.window.M_lo > 0.0)) throw ConfigError("fit window requires M_lo > 0");
    if (!(c.window.M_hi > c.window.M_lo)) throw ConfigError("fit window requires M_hi > M_lo");
    if (!(c.G > c.window.M_hi)) throw ConfigError("run.G must exceed fit.M_hi");
    if (c.M_assumed && !(*c.M_assumed >= 0.0)) throw ConfigError("thm42.M_assumed must be nonnegative");
    if (!(c.initial.decay_tol > 0.0)) throw ConfigError("initial.decay_tol must be positive");
    if (c.out_dir.empty()) throw ConfigError("output.dir must not be empty");
}

RunConfig parse_config(const std::string& text) { return interpret(tokenize(text)); }

RunConfig parse_config_with_overrides(const std::string& text,
                                      const std::vector<std::pair<std::string, std::string>>& overrides) {
    auto entries = tokenize(text);
    for (const auto& [key, value] : overrides) {
        std::erase_if(entries, [&](const Entry& e) { return e.key == key; });
        entries.push_back({trim(key), trim(value), 0});
    }
    std::erase_if(entries, [](const Entry& e) { return e.key.rfind("sweep.", 0) == 0; });
    return interpret(entries);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace r2ch
