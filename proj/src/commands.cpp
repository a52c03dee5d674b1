#include "dcftp/commands.hpp"

#include "dcftp/error.hpp"
#include "dcftp/queue.hpp"
#include "dcftp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace dcftp {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to `path`, or to `fallback` when path is empty.
template <class Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path));
  fn(out);
  out.flush();
  if (!out) throw IoError(fmt::format("write to {} failed", path));
}

void log_config(const RunConfig& cfg, std::ostream& log) {
  log << "effective config: " << effective_config_json(cfg) << '\n';
}

std::optional<MinorizationCert> resolve_minorization(const RunConfig& cfg, const ChainSpec& chain,
                                                     const DriftCertificate& cert, std::ostream& log) {
  if (!cfg.run.regeneration && cfg.run.mode == Mode::standard) return std::nullopt;
  if (!(cert.eps_cap > 0.0)) {
    if (cfg.run.mode == Mode::sigma_star) throw CertificateError("sigma_star mode needs eps_cap > 0");
    return std::nullopt;
  }
  try {
    MinorizationCert m = minorization_for(chain, cert, cfg.run.m_max);
    log << fmt::format("minorization: m={} eps={:.6g} |C*|={}\n", m.m, m.eps, m.C_star.size());
    return m;
  } catch (const CertificateError& e) {
    if (cfg.run.mode == Mode::sigma_star) throw;
    log << "minorization unavailable (" << e.what() << "); sampling without regeneration\n";
    return std::nullopt;
  }
}

}  // namespace

DriftCertificate resolve_certificate(const RunConfig& cfg, const ChainSpec& chain, std::ostream& log) {
  if (!cfg.drift.certificate.empty()) {
    DriftCertificate c = DriftCertificate::parse(read_file(cfg.drift.certificate));
    c.validate();
    log << "certificate loaded from " << cfg.drift.certificate << '\n';
    return c;
  }
  CertifyResult r = certify_chain(chain, certify_options(cfg.drift));
  if (!r.certificate) throw CertificateError("rate condition violated for all lambda");
  return *r.certificate;
}

int cmd_certify(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  log_config(cfg, log);
  const ChainSpec chain = build_chain(cfg.chain);
  const WeakDrift weak = certify_weak_drift(chain);
  log << fmt::format("weak drift: b={:.17g} |C|={}\n", weak.b, weak.C.size());
  const CertifyResult r = certify_chain(chain, certify_options(cfg.drift));
  for (const CertifyAttempt& a : r.attempts) {
    log << fmt::format("lambda={}: beta={} b_prime={} {}\n", a.lambda,
                       a.beta ? fmt::format("{:.17g}", *a.beta) : std::string("none"),
                       fmt::format("{:.17g}", a.b_prime), a.accepted ? "accepted" : a.note);
  }
  if (!r.certificate) {
    log << "rate condition violated for all lambda\n";
    return kExitFailure;
  }
  emit(cfg.output.certificate, out, [&](std::ostream& os) { os << r.certificate->serialize(); });
  log << fmt::format("certified: beta={:.6g} beta*={:.6g} h*={:.6g} F(h*)={}\n", r.certificate->beta,
                     r.certificate->beta_star, r.certificate->h_star,
                     taming_F(r.certificate->h_star, r.certificate->taming));
  return kExitOk;
}

int cmd_dominator(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  log_config(cfg, log);
  const ChainSpec chain = build_chain(cfg.chain);
  const DriftCertificate cert = resolve_certificate(cfg, chain, log);
  const QueueParams q = QueueParams::from_certificate(cert);
  RandomnessLedger ledger(cfg.run.seed);
  EmbeddedPath path(q, cert.taming, cfg.run.anchor, ledger);
  path.extend_to(1 - cfg.run.blocks);
  const std::vector<PathEntry> entries = path.entries();

  long atoms = 0;
  double min_D = INFINITY;
  std::vector<double> positive;
  for (const PathEntry& e : entries) {
    min_D = std::min(min_D, e.D);
    if (e.U == 0.0) ++atoms;
    else positive.push_back(e.U);
  }
  const double rate = 1.0 - q.sigma;
  json report;
  report["a"] = q.a;
  report["sigma"] = q.sigma;
  report["sigma_fixed_point_residual"] = std::fabs(q.sigma - std::exp(-q.a * (1.0 - q.sigma)));
  report["h_star"] = cert.h_star;
  report["anchor"] = to_string(cfg.run.anchor);
  report["blocks"] = entries.size();
  report["atom_frequency"] = static_cast<double>(atoms) / static_cast<double>(entries.size());
  report["atom_expected"] = 1.0 - q.sigma;
  report["min_D"] = min_D;
  report["floor_respected"] = min_D >= cert.h_star;
  if (!positive.empty()) {
    const KsResult ks = ks_one_sample(positive, [rate](double x) { return -std::expm1(-rate * x); });
    report["ks_statistic"] = ks.statistic;
    report["ks_p_value"] = ks.p_value;
    report["ks_samples"] = positive.size();
  }
  report["effective_config"] = json::parse(effective_config_json(cfg));

  emit(cfg.output.trace, out, [&](std::ostream& os) { write_trace_csv(os, entries); });
  emit(cfg.output.report, out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
  log << fmt::format("a={:.17g} sigma={:.17g} atom_frequency={:.6f} (expected {:.6f})\n", q.a, q.sigma,
                     report["atom_frequency"].get<double>(), 1.0 - q.sigma);
  if (report.contains("ks_p_value"))
    log << fmt::format("ks_statistic={:.6g} ks_p_value={:.6g}\n", report["ks_statistic"].get<double>(),
                       report["ks_p_value"].get<double>());
  return kExitOk;
}

void write_samples_csv(std::ostream& out, const std::vector<PerfectSample>& samples) {
  out << "seed,sample_state,V_value,T_used,regen_events,domination_violations\n";
  for (const PerfectSample& s : samples)
    out << fmt::format("{},{},{:.17g},{},{},{}\n", s.seed, s.state, s.V, s.T_used, s.regen_events,
                       s.domination_violations);
}

std::vector<PerfectSample> read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("samples file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "seed,sample_state,V_value,T_used,regen_events,domination_violations")
    throw IoError("samples file has an unexpected header");
  std::vector<PerfectSample> out;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    PerfectSample s;
    char c1, c2, c3, c4, c5;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    if (!(ls >> s.seed >> c1 >> s.state >> c2 >> s.V >> c3 >> s.T_used >> c4 >> s.regen_events >> c5 >>
          s.domination_violations) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',')
      throw IoError(fmt::format("malformed samples row at line {}", lineno));
    ls >> std::ws;
    if (!ls.eof()) throw IoError(fmt::format("trailing data at line {}", lineno));
    out.push_back(s);
  }
  return out;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  log_config(cfg, log);
  const ChainSpec chain = build_chain(cfg.chain);
  const DriftCertificate cert = resolve_certificate(cfg, chain, log);
  const std::optional<MinorizationCert> mcert = resolve_minorization(cfg, chain, cert, log);
  const std::vector<PerfectSample> samples = sample_batch(chain, cert, mcert, cfg.run.seed, cfg.run.replicas,
                                                          sampler_options(cfg.run), cfg.run.workers);
  long violations = 0;
  long regen = 0;
  for (const PerfectSample& s : samples) {
    violations += s.domination_violations;
    regen += s.regen_events;
  }
  emit(cfg.output.samples, out, [&](std::ostream& os) { write_samples_csv(os, samples); });
  log << fmt::format("samples={} mode={} regen_events={} domination_violations={}\n", samples.size(),
                     to_string(cfg.run.mode), regen, violations);
  const int code = violations > 0 ? kExitViolation : kExitOk;
  if (!cfg.output.report.empty()) {
    long max_T = 0;
    for (const PerfectSample& s : samples) max_T = std::max<long>(max_T, s.T_used);
    const json report = {{"samples", samples.size()},
                         {"mode", to_string(cfg.run.mode)},
                         {"regen_events", regen},
                         {"domination_violations", violations},
                         {"max_T_used", max_T},
                         {"exit_code", code},
                         {"effective_config", json::parse(effective_config_json(cfg))}};
    emit(cfg.output.report, out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
  }
  return code;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  log_config(cfg, log);
  const ChainSpec chain = build_chain(cfg.chain);
  if (cfg.output.samples.empty()) throw ConfigError("validate needs output.samples");
  std::ifstream in(cfg.output.samples, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", cfg.output.samples));
  const std::vector<PerfectSample> samples = read_samples_csv(in);
  std::vector<long> counts(chain.n(), 0);
  for (const PerfectSample& s : samples) {
    if (s.state < 0 || s.state >= chain.n()) throw IoError(fmt::format("sample state {} out of range", s.state));
    ++counts[s.state];
  }
  const StationaryResult st = exact_stationary(chain);
  std::vector<double> pi(st.pi.data(), st.pi.data() + st.pi.size());

  ChiSquareResult chi;
  std::string method;
  if (samples.empty()) {
    log << "no samples to validate\n";
    return kExitFailure;
  }
  if (cfg.run.bins == 0 && chain.n() <= 65) {
    // Per-state cells in V-order; cells with small expectation are pooled.
    std::vector<long> c;
    std::vector<double> p;
    for (int x : chain.v_order()) {
      c.push_back(counts[x]);
      p.push_back(pi[x]);
    }
    chi = chi_square_test(c, p);
    method = "per_state";
  } else {
    chi = chi_square_binned(counts, pi, chain.v_order(), cfg.run.bins == 0 ? 50 : cfg.run.bins);
    method = "v_binned";
  }
  const bool passed = chi.p_value > cfg.run.threshold;
  json report = {{"samples", samples.size()},     {"method", method},       {"statistic", chi.statistic},
                 {"dof", chi.dof},                {"p_value", chi.p_value}, {"bins", chi.bins},
                 {"threshold", cfg.run.threshold}, {"passed", passed},
                 {"stationary_residual", st.residual},
                 {"effective_config", json::parse(effective_config_json(cfg))}};
  if (!cfg.output.report.empty())
    emit(cfg.output.report, out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
  log << fmt::format("chi-square statistic={:.6f} dof={} p-value={:.6g} ({})\n", chi.statistic, chi.dof,
                     chi.p_value, passed ? "pass" : "fail");
  return passed ? kExitOk : kExitFailure;
}

void apply_out_override(RunConfig& cfg, const std::string& command, const std::string& path) {
  if (command == "certify") cfg.output.certificate = path;
  else if (command == "dominator") cfg.output.trace = path;
  else if (command == "sample") cfg.output.samples = path;
  else if (command == "validate") cfg.output.report = path;
  else throw ConfigError(fmt::format("unknown command '{}'", command));
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  try {
    if (name == "certify") return cmd_certify(cfg, out, log);
    if (name == "dominator") return cmd_dominator(cfg, out, log);
    if (name == "sample") return cmd_sample(cfg, out, log);
    if (name == "validate") return cmd_validate(cfg, out, log);
    throw ConfigError(fmt::format("unknown command '{}'", name));
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitIo;
  } catch (const IoError& e) {
    log << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidArgument& e) {
    log << "invalid input: " << e.what() << '\n';
    return kExitIo;
  } catch (const CertificateError& e) {
    log << "certificate error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dcftp
