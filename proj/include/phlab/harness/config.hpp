#pragma once

// Experiment configuration: strict JSON reading with stated defaults, the
// system block, and canonical serialization of the resolved config.

#include <phlab/phase_maps.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace phlab::harness {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_kinds()
{
  static const std::vector<std::string> kinds{"census",    "lyapunov",   "ustate",    "holonomy",
                                              "loop",      "cylinder",   "atomicity", "recurrence",
                                              "stability", "leafspace",  "hyperbolic_times"};
  return kinds;
}

/// Reads one JSON object. Every access records the resolved value, so
/// `resolved()` is the object with all defaults filled in; `finish()`
/// rejects keys nobody asked for.
class Reader {
public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
  {
    if (!obj_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  T get(const std::string& key, const T& fallback)
  {
    T v = fallback;
    if (obj_.contains(key))
      v = convert<T>(obj_.at(key), key);
    out_[key] = v;
    seen_.insert(key);
    return v;
  }

  template <class T>
  T require(const std::string& key)
  {
    if (!obj_.contains(key))
      throw ConfigError(where(key) + " is required");
    T v = convert<T>(obj_.at(key), key);
    out_[key] = v;
    seen_.insert(key);
    return v;
  }

  double number(const std::string& key, double fallback, double lo, double hi)
  {
    double v = get<double>(key, fallback);
    if (!(v >= lo && v <= hi))
      throw ConfigError(where(key) + " must lie in [" + fmt(lo) + ", " + fmt(hi) + "]");
    return v;
  }

  long integer(const std::string& key, long fallback, long lo, long hi)
  {
    long v = get<long>(key, fallback);
    if (v < lo || v > hi)
      throw ConfigError(where(key) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }

  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& options)
  {
    std::string v = get<std::string>(key, fallback);
    for (const auto& o : options)
      if (o == v)
        return v;
    std::string all;
    for (const auto& o : options)
      all += (all.empty() ? "" : ", ") + o;
    throw ConfigError(where(key) + " must be one of: " + all);
  }

  Reader child(const std::string& key)
  {
    static const json empty = json::object();
    seen_.insert(key);
    return Reader(obj_.contains(key) ? obj_.at(key) : empty, where(key));
  }

  void store(const std::string& key, json v) { out_[key] = std::move(v); }

  void finish() const
  {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k))
        throw ConfigError(where(k) + ": unknown key");
  }

  const json& resolved() const { return out_; }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
  template <class T>
  T convert(const json& v, const std::string& key) const
  {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number())
        throw ConfigError(where(key) + " must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean())
        throw ConfigError(where(key) + " must be true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError(where(key) + " must be an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        throw ConfigError(where(key) + " must be non-negative");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string())
        throw ConfigError(where(key) + " must be a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  static std::string fmt(double x)
  {
    std::ostringstream s;
    s << x;
    return s.str();
  }

  const json& obj_;
  std::string path_;
  json out_ = json::object();
  std::set<std::string> seen_;
};

inline BasePoint read_point(Reader& r, const std::string& key, BasePoint fallback)
{
  auto v = r.get<std::array<double, 2>>(key, {fallback.u, fallback.v});
  if (!(v[0] >= 0.0 && v[0] < 1.0 && v[1] >= 0.0 && v[1] < 1.0))
    throw ConfigError(r.where(key) + " must have coordinates in [0,1)");
  return {v[0], v[1]};
}

inline std::array<int, 3> read_dims(Reader& r, const std::string& key, std::array<int, 3> fallback)
{
  auto v = r.get<std::array<int, 3>>(key, fallback);
  for (int x : v)
    if (x < 1 || x > 4096)
      throw ConfigError(r.where(key) + " entries must lie in [1, 4096]");
  return v;
}

// ---------------------------------------------------------------------------
// System block

struct SystemConfig {
  std::string catalog = "catmap"; // catmap | cylinder
  IntMatrix2 matrix{{{2, 1}, {1, 1}}};
  std::string fiber = "identity"; // identity | rotation | morse_smale | coupled
  double a = 0.5;
  double b = 0.0;
  int s = 2;
  double omega = golden_rotation;
  std::string phase = "u";
  double base_coupling = 0.0; // 0 keeps the skew product
  double c = 0.2;             // cylinder
  double eps = 0.0;
  int degree = 2;
  json resolved;
};

inline SystemConfig read_system(Reader r)
{
  SystemConfig s;
  s.catalog = r.choice("catalog", "catmap", {"catmap", "cylinder"});
  if (s.catalog == "cylinder") {
    s.c = r.number("c", 0.2, 1e-9, 1.0 - 1e-9);
    s.eps = r.number("eps", 0.0, 0.0, 1.0);
    s.degree = static_cast<int>(r.integer("degree", 2, 2, 16));
  } else {
    s.matrix = r.get<IntMatrix2>("matrix", s.matrix);
    Reader f = r.child("fiber");
    s.fiber = f.choice("kind", "identity", {"identity", "rotation", "morse_smale", "coupled"});
    if (s.fiber == "rotation")
      s.omega = f.number("omega", golden_rotation, -1e6, 1e6);
    if (s.fiber == "morse_smale") {
      s.a = f.number("a", 0.5, 0.0, 0.999);
      s.s = static_cast<int>(f.integer("s", 2, 2, 64));
      if (s.s % 2 != 0)
        throw ConfigError(f.where("s") + " must be even");
    }
    if (s.fiber == "coupled") {
      s.a = f.number("a", 0.3, 0.0, 0.999);
      s.b = f.number("b", 0.2, -10.0, 10.0);
      s.phase = f.choice("phase", "u", {"u", "v"});
    }
    f.finish();
    r.store("fiber", f.resolved());
    s.base_coupling = r.number("base_coupling", 0.0, -0.5, 0.5);
  }
  r.finish();
  s.resolved = r.resolved();
  return s;
}

inline SystemSpec build_system(const SystemConfig& c)
{
  if (c.catalog != "catmap")
    throw ConfigError("this experiment needs a catmap system");
  AnosovBase base = make_anosov_base(c.matrix);
  FiberFamily f;
  if (c.fiber == "rotation")
    f = FiberFamily::rotation(c.omega);
  else if (c.fiber == "morse_smale")
    f = FiberFamily::morse_smale(c.a, c.s);
  else if (c.fiber == "coupled")
    f = FiberFamily::coupled(c.a, c.b, c.phase == "u" ? BasePhase::u : BasePhase::v);
  std::optional<BaseCoupling> bc;
  if (c.base_coupling != 0.0)
    bc = BaseCoupling{c.base_coupling};
  return make_system(base, f, bc, c.fiber);
}

inline CylinderSystem build_cylinder(const SystemConfig& c)
{
  if (c.catalog != "cylinder")
    throw ConfigError("this experiment needs a cylinder system");
  return make_cylinder(c.c, c.eps, c.degree);
}

// ---------------------------------------------------------------------------
// Experiment config

struct ExperimentConfig {
  std::string kind;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output_dir;
  SystemConfig system;
  json params = json::object(); // resolved by the experiment's reader
};

/// Parses the top level and system block. `resolve_params(cfg)` sees the
/// raw params in `cfg.params` and returns them validated with defaults filled.
template <class ResolveParams>
ExperimentConfig parse_config(const json& j, ResolveParams&& resolve_params)
{
  Reader r(j, "");
  ExperimentConfig c;
  c.kind = r.choice("kind", "", experiment_kinds());
  c.seed = r.get<std::uint64_t>("seed", 0);
  c.workers = static_cast<int>(r.integer("workers", 1, 1, 1024));
  c.output_dir = r.get<std::string>("output_dir", "runs/" + c.kind);
  if (c.output_dir.empty())
    throw ConfigError("output_dir must not be empty");
  c.system = read_system(r.child("system"));
  r.child("params");
  c.params = j.contains("params") ? j.at("params") : json::object();
  c.params = resolve_params(c);
  r.finish();
  return c;
}

inline json to_json(const ExperimentConfig& c)
{
  return json{{"kind", c.kind},     {"seed", c.seed},          {"workers", c.workers},
              {"output_dir", c.output_dir}, {"system", c.system.resolved}, {"params", c.params}};
}

inline json read_json_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

} // namespace phlab::harness
