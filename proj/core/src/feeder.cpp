#include "doe/feeder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "doe/errors.hpp"
#include "doe/topology.hpp"

namespace doe {

using nlohmann::json;

int Feeder::bus_index(BusId id) const {
  for (int i = 0; i < bus_count(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw Error("unknown bus id " + std::to_string(id));
}

double Feeder::base_current_a() const {
  return base_power_mva * 1e6 / (std::sqrt(3.0) * base_voltage_kv * 1e3);
}

Limits Feeder::default_limits() const {
  Limits lim;
  lim.v_min_pu = v_min_pu;
  lim.v_max_pu = v_max_pu;
  lim.i_max_a.reserve(lines.size());
  lim.p_min_kw.reserve(lines.size());
  for (const Line& ln : lines) {
    lim.i_max_a.push_back(ln.i_max_a);
    lim.p_min_kw.push_back(ln.p_min_reverse_kw);
  }
  return lim;
}

void Feeder::validate() const {
  if (buses.empty()) throw Error("feeder has no buses");
  if (base_power_mva <= 0.0 || base_voltage_kv <= 0.0) {
    throw Error("feeder base quantities must be positive");
  }
  std::unordered_set<BusId> seen;
  for (const Bus& b : buses) {
    if (!seen.insert(b.id).second) {
      throw Error("duplicate bus id " + std::to_string(b.id));
    }
    if (b.der && b.der->p_min_kw > b.der->p_max_kw) {
      throw Error("DER at bus " + std::to_string(b.id) + " has p_min > p_max");
    }
  }
  for (const Line& ln : lines) {
    if (ln.r_pu < 0.0 || ln.x_pu < 0.0) {
      throw Error("line impedance must be nonnegative");
    }
    if (ln.i_max_a <= 0.0) throw Error("line thermal limit must be positive");
  }
  validate_radial(*this);
}

InjectionVector net_loads(const Feeder& feeder, const std::vector<double>& der_p_kw) {
  InjectionVector inj = base_loads(feeder);
  std::size_t d = 0;
  for (int i = 0; i < feeder.bus_count(); ++i) {
    if (!feeder.buses[i].der) continue;
    if (d >= der_p_kw.size()) throw DimensionMismatch("DER injection vector too short");
    inj.p_kw[i] -= der_p_kw[d];
    ++d;
  }
  if (d != der_p_kw.size()) throw DimensionMismatch("DER injection vector too long");
  return inj;
}

InjectionVector base_loads(const Feeder& feeder) {
  InjectionVector inj;
  inj.p_kw.reserve(feeder.buses.size());
  inj.q_kvar.reserve(feeder.buses.size());
  for (const Bus& b : feeder.buses) {
    inj.p_kw.push_back(b.base_load_p_kw);
    double q = b.base_load_q_kvar;
    if (b.der) q -= b.der->q_der_kvar;
    inj.q_kvar.push_back(q);
  }
  return inj;
}

std::vector<std::pair<int, Der>> der_list(const Feeder& feeder) {
  std::vector<std::pair<int, Der>> out;
  for (int i = 0; i < feeder.bus_count(); ++i) {
    if (feeder.buses[i].der) out.emplace_back(i, *feeder.buses[i].der);
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double get_num(const json& j, const char* key, std::optional<double> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw MalformedFile(std::string("missing field: ") + key);
  }
  if (!j.at(key).is_number()) throw MalformedFile(std::string("field is not a number: ") + key);
  return j.at(key).get<double>();
}

}  // namespace

Feeder parse_feeder(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("feeder JSON parse error: ") + e.what());
  }

  Feeder f;
  try {
    f.name = j.value("name", std::string("feeder"));
    f.base_power_mva = get_num(j, "base_power_mva");
    f.base_voltage_kv = get_num(j, "base_voltage_kv");
    f.slack_bus = j.at("slack_bus").get<BusId>();
    f.slack_voltage_pu = j.value("slack_voltage_pu", 1.0);

    // Impedances may be given in ohms; the units block says which.
    std::string r_unit = "pu";
    if (j.contains("units") && j["units"].contains("r")) {
      r_unit = j["units"]["r"].get<std::string>();
    }
    const double z_base =
        f.base_voltage_kv * f.base_voltage_kv / f.base_power_mva;  // ohm
    const double z_scale = (r_unit == "ohm") ? 1.0 / z_base : 1.0;

    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<BusId>();
      b.base_load_p_kw = get_num(jb, "load_p_kw", 0.0);
      b.base_load_q_kvar = get_num(jb, "load_q_kvar", 0.0);
      f.buses.push_back(b);
    }
    for (const auto& jl : j.at("lines")) {
      Line ln;
      ln.from_bus = jl.at("from").get<BusId>();
      ln.to_bus = jl.at("to").get<BusId>();
      ln.r_pu = get_num(jl, "r") * z_scale;
      ln.x_pu = get_num(jl, "x") * z_scale;
      ln.i_max_a = get_num(jl, "i_max_a", 0.0);
      ln.p_min_reverse_kw = get_num(jl, "p_min_reverse_kw", 0.0);
      f.lines.push_back(ln);
    }
    if (j.contains("ders")) {
      for (const auto& jd : j.at("ders")) {
        Der d;
        d.p_max_kw = get_num(jd, "p_max_kw");
        d.p_min_kw = get_num(jd, "p_min_kw");
        d.q_der_kvar = get_num(jd, "q_der_kvar", 0.0);
        int bi = f.bus_index(jd.at("bus").get<BusId>());
        f.buses[bi].der = d;
      }
    }
    if (j.contains("limits")) {
      const auto& jl = j.at("limits");
      double v_min = get_num(jl, "v_min_pu", 0.9);
      double v_max = get_num(jl, "v_max_pu", 1.1);
      if (!(0.0 < v_min && v_min < v_max)) {
        throw MalformedFile("limits must satisfy 0 < v_min < v_max");
      }
      double i_max_default = jl.contains("i_max_a") && jl["i_max_a"].is_number()
                                 ? jl["i_max_a"].get<double>()
                                 : 0.0;
      double p_min_default = jl.contains("p_min_kw") && jl["p_min_kw"].is_number()
                                 ? jl["p_min_kw"].get<double>()
                                 : 0.0;
      for (Line& ln : f.lines) {
        if (ln.i_max_a <= 0.0 && i_max_default > 0.0) ln.i_max_a = i_max_default;
        if (ln.p_min_reverse_kw == 0.0) ln.p_min_reverse_kw = p_min_default;
      }
      f.v_min_pu = v_min;
      f.v_max_pu = v_max;
    }
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("feeder JSON structure error: ") + e.what());
  }
  f.validate();
  return f;
}

Feeder load_feeder(const std::string& path) { return parse_feeder(read_file(path)); }

std::uint64_t feeder_fingerprint(const std::string& path) {
  return fnv1a64(read_file(path));
}

void save_feeder(const Feeder& f, const std::string& path) {
  json j;
  j["schema_version"] = 1;
  j["name"] = f.name;
  j["units"] = {{"load_p", "kW"}, {"load_q", "kVar"}, {"r", "pu"}, {"x", "pu"},
                {"i_max", "A"},   {"p_min_reverse", "kW"}, {"voltage", "pu"}};
  j["base_power_mva"] = f.base_power_mva;
  j["base_voltage_kv"] = f.base_voltage_kv;
  j["slack_bus"] = f.slack_bus;
  j["slack_voltage_pu"] = f.slack_voltage_pu;
  j["buses"] = json::array();
  for (const Bus& b : f.buses) {
    j["buses"].push_back(
        {{"id", b.id}, {"load_p_kw", b.base_load_p_kw}, {"load_q_kvar", b.base_load_q_kvar}});
  }
  j["lines"] = json::array();
  for (const Line& ln : f.lines) {
    j["lines"].push_back({{"from", ln.from_bus},
                          {"to", ln.to_bus},
                          {"r", ln.r_pu},
                          {"x", ln.x_pu},
                          {"i_max_a", ln.i_max_a},
                          {"p_min_reverse_kw", ln.p_min_reverse_kw}});
  }
  j["ders"] = json::array();
  for (const auto& [bi, d] : der_list(f)) {
    j["ders"].push_back({{"bus", f.buses[bi].id},
                         {"p_max_kw", d.p_max_kw},
                         {"p_min_kw", d.p_min_kw},
                         {"q_der_kvar", d.q_der_kvar}});
  }
  j["limits"] = {{"v_min_pu", f.v_min_pu}, {"v_max_pu", f.v_max_pu}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace doe
