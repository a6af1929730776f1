#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ecodrive {

// Battery demand exceeds V_oc^2 / (4 R_0).
class InfeasiblePowerError : public std::runtime_error {
public:
    explicit InfeasiblePowerError(const std::string& msg) : std::runtime_error(msg) {}
};

// Commanded force or acceleration outside the configured box.
class ConstraintError : public std::runtime_error {
public:
    explicit ConstraintError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Query outside a trajectory's position span or a grid's hull.
class ExtrapolationError : public std::runtime_error {
public:
    explicit ExtrapolationError(const std::string& msg) : std::runtime_error(msg) {}
};

class NoSolutionError : public std::runtime_error {
public:
    explicit NoSolutionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization diverged (non-finite loss).
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kInf = 1e30;

inline bool is_finite_cost(double c) { return c < kInf * 0.5; }

// FNV-1a, used for config/scenario/net provenance hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), seed);
}

std::string hex64(std::uint64_t h);
std::uint64_t hash_file(const std::string& path);

// Runs fn(i) for i in [0, n). jobs<=1 stays on the calling thread. Work is
// split into contiguous chunks so results are identical for any job count.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Minimal INI reader: [section] headers, key = value lines, '#' comments.
// Repeated sections are not allowed; keys within a section are unique.
class IniFile {
public:
    static IniFile parse(const std::string& text);
    static IniFile load(const std::string& path);

    bool has_section(const std::string& s) const;
    bool has(const std::string& s, const std::string& key) const;
    std::string get(const std::string& s, const std::string& key) const;
    std::string get_or(const std::string& s, const std::string& key, const std::string& def) const;
    double get_double(const std::string& s, const std::string& key) const;
    double get_double_or(const std::string& s, const std::string& key, double def) const;
    std::vector<std::string> sections_with_prefix(const std::string& prefix) const;

private:
    std::map<std::string, std::map<std::string, std::string>> data_;
    std::vector<std::string> order_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Fixed-format double for reproducible text artifacts.
std::string fmt_g(double v, int precision = 12);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace ecodrive
