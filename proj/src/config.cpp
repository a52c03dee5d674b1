#include "dcftp/config.hpp"

#include "dcftp/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace dcftp {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(fmt::format("unknown key '{}' in {}", it.key(), where));
}

double get_number(const json& obj, const char* key, const std::string& where, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(fmt::format("{}.{} must be a number", where, key));
  return v.get<double>();
}

template <class Int>
Int get_integer(const json& obj, const char* key, const std::string& where, Int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(fmt::format("{}.{} must be an integer", where, key));
  if constexpr (std::is_unsigned_v<Int>) {
    if (v.is_number_unsigned()) return static_cast<Int>(v.get<std::uint64_t>());
    if (v.get<std::int64_t>() < 0) throw ConfigError(fmt::format("{}.{} must be nonnegative", where, key));
    return static_cast<Int>(v.get<std::int64_t>());
  } else {
    return static_cast<Int>(v.get<std::int64_t>());
  }
}

bool get_bool(const json& obj, const char* key, const std::string& where, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(fmt::format("{}.{} must be true or false", where, key));
  return v.get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& where, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(fmt::format("{}.{} must be a string", where, key));
  return v.get<std::string>();
}

ChainConfig parse_chain(const json& j) {
  ChainConfig c;
  if (!j.is_object()) throw ConfigError("chain must be an object");
  if (j.contains("matrix_file")) {
    check_keys(j, "chain", {"matrix_file"});
    c.matrix_file = get_string(j, "matrix_file", "chain", "");
    if (c.matrix_file.empty()) throw ConfigError("chain.matrix_file is empty");
    return c;
  }
  if (!j.contains("builtin")) throw ConfigError("chain needs 'builtin' or 'matrix_file'");
  c.builtin = get_string(j, "builtin", "chain", "");
  if (c.builtin == "poly_rw") {
    check_keys(j, "chain", {"builtin", "N", "delta", "c_down", "c_up"});
    c.N = get_integer<int>(j, "N", "chain", c.N);
    c.delta = get_number(j, "delta", "chain", c.delta);
    c.c_down = get_number(j, "c_down", "chain", c.c_down);
    c.c_up = get_number(j, "c_up", "chain", c.c_up);
  } else if (c.builtin == "regen_chain") {
    check_keys(j, "chain", {"builtin", "N", "eps_built", "m_mode"});
    c.N = get_integer<int>(j, "N", "chain", 31);
    c.eps_built = get_number(j, "eps_built", "chain", c.eps_built);
    c.m_mode = get_integer<int>(j, "m_mode", "chain", c.m_mode);
  } else if (c.builtin == "three_state") {
    check_keys(j, "chain", {"builtin"});
  } else {
    throw ConfigError(fmt::format("unknown builtin chain '{}'", c.builtin));
  }
  return c;
}

DriftConfig parse_drift(const json& j) {
  check_keys(j, "drift", {"d_prime", "lambda_schedule", "delta", "eps_cap", "certificate"});
  DriftConfig d;
  if (!j.contains("d_prime")) throw ConfigError("drift.d_prime is required");
  d.d_prime = get_number(j, "d_prime", "drift", 0.0);
  if (j.contains("lambda_schedule")) {
    const json& s = j.at("lambda_schedule");
    if (!s.is_array() || s.empty()) throw ConfigError("drift.lambda_schedule must be a nonempty array");
    d.lambda_schedule.clear();
    for (const json& v : s) {
      if (!v.is_number()) throw ConfigError("drift.lambda_schedule entries must be numbers");
      d.lambda_schedule.push_back(v.get<double>());
    }
  }
  d.delta = get_number(j, "delta", "drift", d.delta);
  d.eps_cap = get_number(j, "eps_cap", "drift", d.eps_cap);
  d.certificate = get_string(j, "certificate", "drift", "");
  if (!(d.d_prime >= 1.0)) throw ConfigError("drift.d_prime must be >= 1");
  if (!(d.delta > 0.0 && d.delta < 1.0)) throw ConfigError("drift.delta must lie in (0,1)");
  if (!(d.eps_cap >= 0.0 && d.eps_cap < 1.0)) throw ConfigError("drift.eps_cap must lie in [0,1)");
  for (double l : d.lambda_schedule)
    if (!(l > 0.0)) throw ConfigError("drift.lambda_schedule entries must be positive");
  return d;
}

RunSection parse_run(const json& j) {
  check_keys(j, "run", {"seed", "replicas", "workers", "mode", "experimental", "anchor", "backoff", "max_T",
                        "regeneration", "m_max", "blocks", "threshold", "bins"});
  RunSection r;
  r.seed = get_integer<std::uint64_t>(j, "seed", "run", r.seed);
  r.replicas = get_integer<std::uint64_t>(j, "replicas", "run", r.replicas);
  r.workers = get_integer<unsigned>(j, "workers", "run", r.workers);
  try {
    r.mode = parse_mode(get_string(j, "mode", "run", to_string(r.mode)));
    r.anchor = parse_anchor(get_string(j, "anchor", "run", to_string(r.anchor)));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const std::string backoff = get_string(j, "backoff", "run", "doubling");
  if (backoff == "doubling") r.backoff = Backoff::doubling;
  else if (backoff == "increment") r.backoff = Backoff::increment;
  else throw ConfigError(fmt::format("unknown backoff '{}'", backoff));
  r.experimental = get_bool(j, "experimental", "run", r.experimental);
  r.max_T = get_integer<std::int64_t>(j, "max_T", "run", r.max_T);
  r.regeneration = get_bool(j, "regeneration", "run", r.regeneration);
  r.m_max = get_integer<int>(j, "m_max", "run", r.m_max);
  r.blocks = get_integer<std::int64_t>(j, "blocks", "run", r.blocks);
  r.threshold = get_number(j, "threshold", "run", r.threshold);
  r.bins = get_integer<std::uint64_t>(j, "bins", "run", r.bins);
  if (r.workers < 1) throw ConfigError("run.workers must be >= 1");
  if (r.max_T < 1) throw ConfigError("run.max_T must be >= 1");
  if (r.m_max < 1) throw ConfigError("run.m_max must be >= 1");
  if (r.blocks < 1) throw ConfigError("run.blocks must be >= 1");
  if (!(r.threshold > 0.0 && r.threshold < 1.0)) throw ConfigError("run.threshold must lie in (0,1)");
  if (r.bins == 1) throw ConfigError("run.bins must be 0 or >= 2");
  if (r.mode == Mode::sigma_star && !r.experimental)
    throw ConfigError("run.mode \"sigma_star\" needs \"experimental\": true");
  return r;
}

OutputSection parse_output(const json& j) {
  check_keys(j, "output", {"certificate", "samples", "trace", "report"});
  OutputSection o;
  o.certificate = get_string(j, "certificate", "output", "");
  o.samples = get_string(j, "samples", "output", "");
  o.trace = get_string(j, "trace", "output", "");
  o.report = get_string(j, "report", "output", "");
  return o;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  check_keys(doc, "config", {"chain", "drift", "run", "output"});
  if (!doc.contains("chain")) throw ConfigError("config needs a chain section");
  if (!doc.contains("drift")) throw ConfigError("config needs a drift section");
  RunConfig cfg;
  cfg.chain = parse_chain(doc.at("chain"));
  cfg.drift = parse_drift(doc.at("drift"));
  cfg.run = parse_run(doc.contains("run") ? doc.at("run") : json::object());
  cfg.output = parse_output(doc.contains("output") ? doc.at("output") : json::object());
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string effective_config_json(const RunConfig& cfg, int indent) {
  json chain;
  if (!cfg.chain.matrix_file.empty()) {
    chain["matrix_file"] = cfg.chain.matrix_file;
  } else {
    chain["builtin"] = cfg.chain.builtin;
    if (cfg.chain.builtin == "poly_rw") {
      chain["N"] = cfg.chain.N;
      chain["delta"] = cfg.chain.delta;
      chain["c_down"] = cfg.chain.c_down;
      chain["c_up"] = cfg.chain.c_up;
    } else if (cfg.chain.builtin == "regen_chain") {
      chain["N"] = cfg.chain.N;
      chain["eps_built"] = cfg.chain.eps_built;
      chain["m_mode"] = cfg.chain.m_mode;
    }
  }
  json drift = {{"d_prime", cfg.drift.d_prime},
                {"lambda_schedule", cfg.drift.lambda_schedule},
                {"delta", cfg.drift.delta},
                {"eps_cap", cfg.drift.eps_cap}};
  if (!cfg.drift.certificate.empty()) drift["certificate"] = cfg.drift.certificate;
  const RunSection& r = cfg.run;
  json run = {{"seed", r.seed},
              {"replicas", r.replicas},
              {"workers", r.workers},
              {"mode", to_string(r.mode)},
              {"experimental", r.experimental},
              {"anchor", to_string(r.anchor)},
              {"backoff", r.backoff == Backoff::doubling ? "doubling" : "increment"},
              {"max_T", r.max_T},
              {"regeneration", r.regeneration},
              {"m_max", r.m_max},
              {"blocks", r.blocks},
              {"threshold", r.threshold},
              {"bins", r.bins}};
  json output = {{"certificate", cfg.output.certificate},
                 {"samples", cfg.output.samples},
                 {"trace", cfg.output.trace},
                 {"report", cfg.output.report}};
  json doc = {{"chain", chain}, {"drift", drift}, {"run", run}, {"output", output}};
  return doc.dump(indent);
}

ChainSpec build_chain(const ChainConfig& cfg) {
  if (!cfg.matrix_file.empty()) return read_matrix_file(cfg.matrix_file);
  if (cfg.builtin == "poly_rw") return build_poly_rw(cfg.N, cfg.delta, cfg.c_down, cfg.c_up);
  if (cfg.builtin == "regen_chain") return build_regen_chain(cfg.N, cfg.eps_built, cfg.m_mode).chain;
  if (cfg.builtin == "three_state") return build_three_state();
  throw ConfigError(fmt::format("unknown builtin chain '{}'", cfg.builtin));
}

CertifyOptions certify_options(const DriftConfig& cfg) {
  CertifyOptions o;
  o.d_prime = cfg.d_prime;
  o.delta = cfg.delta;
  o.lambda_schedule = cfg.lambda_schedule;
  o.eps_cap = cfg.eps_cap;
  return o;
}

SamplerOptions sampler_options(const RunSection& run) {
  SamplerOptions o;
  o.mode = run.mode;
  o.anchor = run.anchor;
  o.backoff = run.backoff;
  o.max_T = run.max_T;
  o.regeneration = run.regeneration;
  return o;
}

}  // namespace dcftp
