#include "ecodrive/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace ecodrive {

namespace {

double parse_num(const std::string& s) {
    const std::string t = trim(s);
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') throw ConfigError("bad number '" + s + "'");
    return v;
}

}  // namespace

SignalState signal_phase(const TrafficLight& light, double t_s) {
    double m = std::fmod(t_s - light.offset_s, light.cycle_s);
    if (m < 0) m += light.cycle_s;
    SignalState st;
    if (m < light.green_s) {
        st.green = true;
        st.t_rg_s = 0.0;
        st.green_start_s = t_s - m;
    } else {
        st.green = false;
        st.t_rg_s = light.cycle_s - m;
        st.green_start_s = t_s + st.t_rg_s;
    }
    st.green_end_s = st.green_start_s + light.green_s;
    return st;
}

double jam_speed(const TrafficJam& jam) {
    const double v = jam.greenshield_c2 - jam.greenshield_c1 * jam.density_veh_per_km;
    if (v <= 0) {
        throw ConfigError("jam density " + fmt_g(jam.density_veh_per_km) +
                          " veh/km implies speed " + fmt_g(v) + " m/s");
    }
    return v;
}

void Route::validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("route: " + what); };
    if (length_m < 0) bad("length must be >= 0");
    if (ds_m <= 0) bad("ds must be > 0");
    const double n = length_m / ds_m;
    if (std::abs(n - std::round(n)) > 1e-9) bad("ds must divide length");
    if (limits.empty()) bad("at least one speed limit required");
    if (limits.front().x_m != 0.0) bad("first speed limit must start at x=0");
    for (std::size_t i = 0; i < limits.size(); ++i) {
        if (limits[i].v_mps <= 0) bad("speed limit must be > 0");
        if (i && limits[i].x_m <= limits[i - 1].x_m) bad("limit change points out of order");
    }
    if (min_speed_mps < 0) bad("min speed must be >= 0");
    for (std::size_t i = 0; i < lights.size(); ++i) {
        const auto& L = lights[i];
        if (L.position_m < 0 || L.position_m > length_m) bad("light position outside route");
        if (i && L.position_m <= lights[i - 1].position_m) bad("light positions out of order");
        if (!(L.cycle_s > 0) || !(L.green_s > 0) || L.green_s >= L.cycle_s) {
            bad("light needs 0 < green < cycle");
        }
    }
    for (const auto& j : jams) {
        if (j.x_start_m >= j.x_end_m) bad("jam x window empty");
        if (j.t_start_s >= j.t_end_s) bad("jam t window empty");
        jam_speed(j);  // throws when the density implies standstill
    }
}

int Route::step_count() const {
    return static_cast<int>(std::llround(length_m / ds_m));
}

double Route::base_limit(double x_m) const {
    // last change point at or before x
    double v = limits.front().v_mps;
    for (const auto& p : limits) {
        if (p.x_m <= x_m) v = p.v_mps;
        else break;
    }
    return v;
}

const SpeedLimitPoint* Route::next_limit_change(double x_m) const {
    for (const auto& p : limits) {
        if (p.x_m > x_m) return &p;
    }
    return nullptr;
}

const TrafficLight* Route::next_light(double x_m) const {
    for (const auto& L : lights) {
        if (L.position_m > x_m) return &L;
    }
    return nullptr;
}

int Route::light_index_at_step(int s) const {
    for (std::size_t i = 0; i < lights.size(); ++i) {
        if (std::llround(lights[i].position_m / ds_m) == s) return static_cast<int>(i);
    }
    return -1;
}

double effective_speed_limit(const Route& route, double x_m, double t_s) {
    double lim = route.base_limit(x_m);
    for (const auto& j : route.jams) {
        if (j.contains(x_m, t_s)) lim = std::min(lim, jam_speed(j));
    }
    return std::max(lim, route.min_speed_mps);
}

void LeadTrajectory::validate() const {
    auto bad = [](const std::string& what) { throw ConfigError("lead trajectory: " + what); };
    if (source != "dp" && source != "replayed" && source != "synthetic") {
        bad("unknown source tag '" + source + "'");
    }
    if (samples.size() < 2) bad("needs at least two samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].v_mps < 0) bad("negative velocity");
        if (i == 0) continue;
        const auto& a = samples[i - 1];
        const auto& b = samples[i];
        if (b.t_s <= a.t_s) bad("time not strictly increasing");
        if (b.x_m < a.x_m) bad("position decreases");
        const double dx = b.x_m - a.x_m;
        const double trap = 0.5 * (a.v_mps + b.v_mps) * (b.t_s - a.t_s);
        if (std::abs(dx - trap) > 1e-3 * std::max(1.0, std::abs(dx))) {
            bad("position increment " + fmt_g(dx) + " inconsistent with velocity integral " +
                fmt_g(trap) + " near t=" + fmt_g(a.t_s));
        }
    }
}

double LeadTrajectory::time_at(double x_m) const {
    if (samples.empty() || x_m < x_min() || x_m > x_max()) {
        throw ExtrapolationError("lead position query " + fmt_g(x_m) + " outside span");
    }
    auto it = std::lower_bound(samples.begin(), samples.end(), x_m,
                               [](const LeadSample& s, double x) { return s.x_m < x; });
    if (it == samples.begin()) return it->t_s;
    const auto& a = *(it - 1);  // a.x < x <= it->x, so no zero division
    return a.t_s + (x_m - a.x_m) / (it->x_m - a.x_m) * (it->t_s - a.t_s);
}

namespace {

// Bracket t within the strictly increasing sample times and lerp a field.
double lerp_by_time(const std::vector<LeadSample>& samples, double t_s,
                    double LeadSample::* field) {
    if (samples.empty() || t_s < samples.front().t_s || t_s > samples.back().t_s) {
        throw ExtrapolationError("lead time query " + fmt_g(t_s) + " outside span");
    }
    auto it = std::lower_bound(samples.begin(), samples.end(), t_s,
                               [](const LeadSample& s, double t) { return s.t_s < t; });
    if (it == samples.begin()) return (*it).*field;
    const auto& a = *(it - 1);
    const double w = (t_s - a.t_s) / (it->t_s - a.t_s);
    return a.*field + w * ((*it).*field - a.*field);
}

}  // namespace

double LeadTrajectory::pos_at(double t_s) const { return lerp_by_time(samples, t_s, &LeadSample::x_m); }
double LeadTrajectory::vel_at(double t_s) const { return lerp_by_time(samples, t_s, &LeadSample::v_mps); }

LeadTrajectory load_lead_csv(const std::string& path, const std::string& source) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "t_s,x_m,v_mps") {
        throw ConfigError(path + ": expected header t_s,x_m,v_mps");
    }
    LeadTrajectory lead;
    lead.source = source;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cols = split(line, ',');
        if (cols.size() != 3) throw ConfigError(path + ": bad row '" + line + "'");
        lead.samples.push_back({parse_num(cols[0]), parse_num(cols[1]), parse_num(cols[2])});
    }
    lead.validate();
    return lead;
}

void save_lead_csv(const LeadTrajectory& lead, const std::string& path) {
    std::ostringstream out;
    out << "t_s,x_m,v_mps\n";
    for (const auto& s : lead.samples) {
        out << fmt_g(s.t_s) << "," << fmt_g(s.x_m) << "," << fmt_g(s.v_mps) << "\n";
    }
    write_text_file(path, out.str());
}

void Scenario::validate() const {
    route.validate();
    if (lead) lead->validate();
    if (ego_soc0 < 0 || ego_soc0 > 1) throw ConfigError("scenario: soc0 outside [0,1]");
    if (ego_v0_mps < 0) throw ConfigError("scenario: v0 must be >= 0");
}

Scenario build_scenario(const std::string& id) {
    Scenario sc;
    sc.name = id;
    Route& r = sc.route;
    if (id == "route1") {
        r.length_m = 2000.0;
        r.limits = {{0.0, 17.0}};
        r.lights = {{200.0, 60.0, 30.0, 12.0},
                    {1000.0, 60.0, 30.0, 38.0}};
        r.jams = {{1450.0, 1950.0, 0.0, 1000.0, 100.0, 0.1, 20.0}};
    } else if (id == "route2") {
        r.length_m = 5000.0;
        r.limits = {{0.0, 17.0}, {2500.0, 15.0}};
        r.lights = {{250.0, 60.0, 28.0, 10.0},
                    {1400.0, 70.0, 32.0, 30.0},
                    {2600.0, 60.0, 30.0, 45.0},
                    {3900.0, 75.0, 35.0, 20.0}};
        r.jams = {{3800.0, 4800.0, 0.0, 2000.0, 100.0, 0.1, 20.0}};
    } else {
        throw ConfigError("unknown scenario id '" + id + "'");
    }
    sc.ego_v0_mps = 10.0;
    sc.ego_soc0 = 0.30;
    sc.validate();
    return sc;
}

std::string scenario_text(const Scenario& sc) {
    std::ostringstream out;
    out << "[route]\n";
    out << "name = " << sc.name << "\n";
    out << "length_m = " << fmt_g(sc.route.length_m) << "\n";
    out << "ds_m = " << fmt_g(sc.route.ds_m) << "\n";
    out << "min_speed_mps = " << fmt_g(sc.route.min_speed_mps) << "\n";
    out << "speed_limits = ";
    for (std::size_t i = 0; i < sc.route.limits.size(); ++i) {
        if (i) out << ",";
        out << fmt_g(sc.route.limits[i].x_m) << ":" << fmt_g(sc.route.limits[i].v_mps);
    }
    out << "\n";
    out << "v0_mps = " << fmt_g(sc.ego_v0_mps) << "\n";
    out << "soc0 = " << fmt_g(sc.ego_soc0) << "\n";
    out << "t0_s = " << fmt_g(sc.ego_t0_s) << "\n";
    for (std::size_t i = 0; i < sc.route.lights.size(); ++i) {
        const auto& L = sc.route.lights[i];
        out << "\n[light." << i << "]\n";
        out << "position_m = " << fmt_g(L.position_m) << "\n";
        out << "cycle_s = " << fmt_g(L.cycle_s) << "\n";
        out << "green_s = " << fmt_g(L.green_s) << "\n";
        out << "offset_s = " << fmt_g(L.offset_s) << "\n";
    }
    for (std::size_t i = 0; i < sc.route.jams.size(); ++i) {
        const auto& j = sc.route.jams[i];
        out << "\n[jam." << i << "]\n";
        out << "x_start_m = " << fmt_g(j.x_start_m) << "\n";
        out << "x_end_m = " << fmt_g(j.x_end_m) << "\n";
        out << "t_start_s = " << fmt_g(j.t_start_s) << "\n";
        out << "t_end_s = " << fmt_g(j.t_end_s) << "\n";
        out << "density_veh_per_km = " << fmt_g(j.density_veh_per_km) << "\n";
        out << "c1_mps_per_vpk = " << fmt_g(j.greenshield_c1) << "\n";
        out << "c2_mps = " << fmt_g(j.greenshield_c2) << "\n";
    }
    if (!sc.lead_csv.empty()) {
        out << "\n[lead]\n";
        out << "csv = " << sc.lead_csv << "\n";
        out << "source = " << (sc.lead ? sc.lead->source : "synthetic") << "\n";
    }
    return out.str();
}

void save_scenario(const Scenario& sc, const std::string& path) {
    write_text_file(path, scenario_text(sc));
}

Scenario load_scenario(const std::string& path) {
    IniFile ini = IniFile::load(path);
    if (!ini.has_section("route")) throw ConfigError(path + ": missing [route] section");
    Scenario sc;
    sc.name = ini.get_or("route", "name", "unnamed");
    Route& r = sc.route;
    r.length_m = ini.get_double("route", "length_m");
    r.ds_m = ini.get_double_or("route", "ds_m", 10.0);
    r.min_speed_mps = ini.get_double_or("route", "min_speed_mps", 0.0);
    r.limits.clear();
    for (const auto& tok : split(ini.get("route", "speed_limits"), ',')) {
        auto xv = split(tok, ':');
        if (xv.size() != 2) throw ConfigError(path + ": speed_limits entry '" + tok + "'");
        r.limits.push_back({parse_num(xv[0]), parse_num(xv[1])});
    }
    sc.ego_v0_mps = ini.get_double_or("route", "v0_mps", 10.0);
    sc.ego_soc0 = ini.get_double_or("route", "soc0", 0.30);
    sc.ego_t0_s = ini.get_double_or("route", "t0_s", 0.0);

    r.lights.clear();
    for (int i = 0;; ++i) {
        const std::string s = "light." + std::to_string(i);
        if (!ini.has_section(s)) break;
        TrafficLight L;
        L.position_m = ini.get_double(s, "position_m");
        L.cycle_s = ini.get_double(s, "cycle_s");
        L.green_s = ini.get_double(s, "green_s");
        L.offset_s = ini.get_double_or(s, "offset_s", 0.0);
        r.lights.push_back(L);
    }
    if (ini.sections_with_prefix("light.").size() != r.lights.size()) {
        throw ConfigError(path + ": light sections must be indexed 0..k-1");
    }
    r.jams.clear();
    for (int i = 0;; ++i) {
        const std::string s = "jam." + std::to_string(i);
        if (!ini.has_section(s)) break;
        TrafficJam j;
        j.x_start_m = ini.get_double(s, "x_start_m");
        j.x_end_m = ini.get_double(s, "x_end_m");
        j.t_start_s = ini.get_double(s, "t_start_s");
        j.t_end_s = ini.get_double(s, "t_end_s");
        j.density_veh_per_km = ini.get_double_or(s, "density_veh_per_km", 100.0);
        j.greenshield_c1 = ini.get_double_or(s, "c1_mps_per_vpk", 0.1);
        j.greenshield_c2 = ini.get_double_or(s, "c2_mps", 20.0);
        r.jams.push_back(j);
    }
    if (ini.sections_with_prefix("jam.").size() != r.jams.size()) {
        throw ConfigError(path + ": jam sections must be indexed 0..k-1");
    }
    if (ini.has_section("lead")) {
        sc.lead_csv = ini.get("lead", "csv");
        const std::string source = ini.get_or("lead", "source", "synthetic");
        const auto csv = std::filesystem::path(path).parent_path() / sc.lead_csv;
        sc.lead = load_lead_csv(csv.string(), source);
    }
    sc.validate();
    return sc;
}

}  // namespace ecodrive
