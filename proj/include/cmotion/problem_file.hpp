#ifndef CMOTION_PROBLEM_FILE_HPP
#define CMOTION_PROBLEM_FILE_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cmotion/discovery.hpp"
#include "cmotion/ocp.hpp"
#include "cmotion/parse.hpp"

namespace cmotion {

struct SimulateSpec {
    std::vector<double> x0;
    std::vector<double> psi_init;
    double t_start = 0.0;
    double t_end = 0.0;
    double rtol = 1e-10;
    double atol = 1e-12;
    int samples = 200;
};

/// Parsed problem file: the problem plus the optional candidate, simulation
/// and discovery blocks.
struct ProblemFile {
    OCProblem problem;
    std::vector<std::pair<std::string, Expr>> candidates;
    std::optional<SimulateSpec> simulate;
    std::optional<AnsatzSpec> discover;
};

namespace detail {

struct FileEntry {
    int line;
    std::string value;
    bool used = false;
};

struct FileSection {
    int line = 0;
    bool present = false;
    std::vector<std::pair<std::string, FileEntry>> entries;

    FileEntry* find(const std::string& key) {
        for (auto& [k, e] : entries)
            if (k == key) return &e;
        return nullptr;
    }
};

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

inline double parse_double(const std::string& s, int line, const std::string& key) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw FileError(line, key + ": expected a number, got '" + s + "'");
    }
}

inline long long parse_integer(const std::string& s, int line, const std::string& key) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw FileError(line, key + ": expected an integer, got '" + s + "'");
    }
}

inline std::vector<double> parse_vector(const std::string& s, int line, const std::string& key) {
    std::vector<double> out;
    for (const auto& part : split(s, ','))
        out.push_back(parse_double(part, line, key));
    return out;
}

inline Expr parse_file_expr(const std::string& text, const std::set<std::string>& symbols,
                            int line, const std::string& key) {
    try {
        return parse(text, symbols);
    } catch (const Error& e) {
        throw FileError(line, key + ": " + e.what());
    }
}

inline void reject_unused(const FileSection& sec, const std::string& name) {
    for (const auto& [k, e] : sec.entries)
        if (!e.used) throw FileError(e.line, "unknown key '" + k + "' in [" + name + "]");
}

} // namespace detail

/// Loads and validates a problem file. The format is line-oriented:
/// `[section]` headers, `key = value` entries, `#` comments, blank lines.
/// Sections: [problem] (required), [candidates], [simulate], [discover].
/// Lists use `;` between expressions and `,` between numbers.
inline ProblemFile load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError(0, "cannot open '" + path + "'");

    std::map<std::string, detail::FileSection> sections;
    std::string current;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw FileError(lineno, "unterminated section header");
            current = detail::trim(line.substr(1, line.size() - 2));
            if (current != "problem" && current != "candidates" && current != "simulate" &&
                current != "discover")
                throw FileError(lineno, "unknown section [" + current + "]");
            if (sections[current].present)
                throw FileError(lineno, "duplicate section [" + current + "]");
            sections[current].present = true;
            sections[current].line = lineno;
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw FileError(lineno, "expected 'key = value'");
        if (current.empty()) throw FileError(lineno, "entry before any [section]");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw FileError(lineno, "empty key");
        auto& sec = sections[current];
        if (sec.find(key)) throw FileError(lineno, "duplicate key '" + key + "'");
        sec.entries.push_back({key, {lineno, value}});
    }

    if (!sections["problem"].present) throw FileError(0, "missing [problem] section");
    auto& ps = sections["problem"];
    auto require = [&](const std::string& key) -> detail::FileEntry& {
        auto* e = ps.find(key);
        if (!e) throw FileError(ps.line, "missing key '" + key + "' in [problem]");
        e->used = true;
        return *e;
    };
    auto optional_key = [](detail::FileSection& sec, const std::string& key) {
        auto* e = sec.find(key);
        if (e) e->used = true;
        return e;
    };

    ProblemFile pf;
    OCProblem& p = pf.problem;
    p.name = require("name").value;
    {
        auto& e = require("states");
        p.n = static_cast<int>(detail::parse_integer(e.value, e.line, "states"));
    }
    {
        auto& e = require("controls");
        p.r = static_cast<int>(detail::parse_integer(e.value, e.line, "controls"));
    }
    if (p.n < 1 || p.r < 1)
        throw DimensionMismatch("states and controls must be at least 1");
    {
        auto& e = require("t0");
        p.a = detail::parse_double(e.value, e.line, "t0");
    }
    {
        auto& e = require("t1");
        p.b = detail::parse_double(e.value, e.line, "t1");
    }
    const std::set<std::string> in_syms = p.input_symbols();
    {
        auto& e = require("lagrangian");
        p.lagrangian = detail::parse_file_expr(e.value, in_syms, e.line, "lagrangian");
    }
    {
        auto& e = require("dynamics");
        for (const auto& part : detail::split(e.value, ';')) {
            if (part.empty()) throw FileError(e.line, "dynamics: empty entry");
            p.dynamics.push_back(detail::parse_file_expr(part, in_syms, e.line, "dynamics"));
        }
    }
    if (auto* e = optional_key(ps, "control_set")) {
        std::string v = e->value;
        if (v == "free") {
            p.control_set.kind = ControlSetKind::Free;
        } else if (v.rfind("box", 0) == 0) {
            p.control_set.kind = ControlSetKind::Box;
            for (const auto& pair : detail::split(detail::trim(v.substr(3)), ';')) {
                auto nums = detail::parse_vector(pair, e->line, "control_set");
                if (nums.size() != 2)
                    throw FileError(e->line, "control_set: box bounds must be 'lo, hi' pairs");
                p.control_set.bounds.push_back({nums[0], nums[1]});
            }
        } else {
            throw FileError(e->line, "control_set: expected 'free' or 'box lo,hi; ...'");
        }
    }
    if (auto* e = optional_key(ps, "psi0")) {
        Expr v = detail::parse_file_expr(e->value, {}, e->line, "psi0");
        if (!v.is_constant()) throw FileError(e->line, "psi0: expected a rational constant");
        p.psi0 = v.value();
    }
    detail::reject_unused(ps, "problem");
    p = validate(p);

    if (sections["candidates"].present) {
        const std::set<std::string> phase = p.phase_symbols();
        for (auto& [name, e] : sections["candidates"].entries) {
            if (!is_identifier(name))
                throw FileError(e.line, "candidate name '" + name + "' is not an identifier");
            for (const auto& [seen, ex] : pf.candidates)
                if (seen == name) throw FileError(e.line, "duplicate candidate '" + name + "'");
            pf.candidates.emplace_back(name,
                                       detail::parse_file_expr(e.value, phase, e.line, name));
            e.used = true;
        }
    }

    if (sections["simulate"].present) {
        auto& ss = sections["simulate"];
        SimulateSpec sim;
        sim.t_start = p.a;
        sim.t_end = p.b;
        auto* ex0 = ss.find("x0");
        if (!ex0) throw FileError(ss.line, "missing key 'x0' in [simulate]");
        ex0->used = true;
        sim.x0 = detail::parse_vector(ex0->value, ex0->line, "x0");
        auto* epsi = ss.find("psi_init");
        if (!epsi) throw FileError(ss.line, "missing key 'psi_init' in [simulate]");
        epsi->used = true;
        sim.psi_init = detail::parse_vector(epsi->value, epsi->line, "psi_init");
        if (auto* e = optional_key(ss, "span")) {
            auto nums = detail::parse_vector(e->value, e->line, "span");
            if (nums.size() != 2) throw FileError(e->line, "span: expected 'start, end'");
            sim.t_start = nums[0];
            sim.t_end = nums[1];
        }
        if (auto* e = optional_key(ss, "rtol"))
            sim.rtol = detail::parse_double(e->value, e->line, "rtol");
        if (auto* e = optional_key(ss, "atol"))
            sim.atol = detail::parse_double(e->value, e->line, "atol");
        if (auto* e = optional_key(ss, "samples"))
            sim.samples = static_cast<int>(detail::parse_integer(e->value, e->line, "samples"));
        detail::reject_unused(ss, "simulate");
        pf.simulate = std::move(sim);
    }

    if (sections["discover"].present) {
        auto& ds = sections["discover"];
        AnsatzSpec spec;
        if (auto* e = optional_key(ds, "family")) {
            if (e->value == "bilinear_psi_x") spec.family = AnsatzFamily::BilinearPsiX;
            else if (e->value == "bilinear_plus_ht") spec.family = AnsatzFamily::BilinearPlusHT;
            else
                throw FileError(e->line,
                                "family: expected 'bilinear_psi_x' or 'bilinear_plus_ht'");
        }
        if (auto* e = optional_key(ds, "max_t_degree")) {
            spec.max_t_degree = static_cast<int>(
                detail::parse_integer(e->value, e->line, "max_t_degree"));
            if (spec.max_t_degree < 0) throw FileError(e->line, "max_t_degree must be >= 0");
        }
        if (auto* e = optional_key(ds, "seed")) {
            long long s = detail::parse_integer(e->value, e->line, "seed");
            if (s < 0) throw FileError(e->line, "seed must be nonnegative");
            spec.seed = static_cast<std::uint64_t>(s);
        }
        detail::reject_unused(ds, "discover");
        pf.discover = spec;
    }

    return pf;
}

} // namespace cmotion

#endif
