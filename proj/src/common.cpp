#include "ecodrive/common.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ecodrive {

std::string hex64(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file for hashing: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        if (got > 0) h = fnv1a(buf, static_cast<std::size_t>(got), h);
    }
    return h;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (jobs <= 1 || n < 256) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

IniFile IniFile::parse(const std::string& text) {
    IniFile ini;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("bad section header at line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            if (ini.data_.count(section)) throw ConfigError("duplicate section [" + section + "]");
            ini.data_[section] = {};
            ini.order_.push_back(section);
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value at line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError("key outside any section at line " + std::to_string(lineno));
        ini.data_[section][key] = val;
    }
    return ini;
}

IniFile IniFile::load(const std::string& path) {
    return parse(read_text_file(path));
}

bool IniFile::has_section(const std::string& s) const { return data_.count(s) > 0; }

bool IniFile::has(const std::string& s, const std::string& key) const {
    auto it = data_.find(s);
    return it != data_.end() && it->second.count(key) > 0;
}

std::string IniFile::get(const std::string& s, const std::string& key) const {
    auto it = data_.find(s);
    if (it == data_.end()) throw ConfigError("missing section [" + s + "]");
    auto kv = it->second.find(key);
    if (kv == it->second.end()) throw ConfigError("missing key '" + key + "' in [" + s + "]");
    return kv->second;
}

std::string IniFile::get_or(const std::string& s, const std::string& key, const std::string& def) const {
    return has(s, key) ? get(s, key) : def;
}

double IniFile::get_double(const std::string& s, const std::string& key) const {
    const std::string v = get(s, key);
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (trim(v.substr(pos)).size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value '" + v + "' for " + s + "." + key);
    }
}

double IniFile::get_double_or(const std::string& s, const std::string& key, double def) const {
    return has(s, key) ? get_double(s, key) : def;
}

std::vector<std::string> IniFile::sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& s : order_) {
        if (s.rfind(prefix, 0) == 0) out.push_back(s);
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << text;
}

std::string fmt_g(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

}  // namespace ecodrive
