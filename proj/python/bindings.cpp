#include "dcftp/cftp.hpp"
#include "dcftp/chain.hpp"
#include "dcftp/commands.hpp"
#include "dcftp/config.hpp"
#include "dcftp/coupling.hpp"
#include "dcftp/drift.hpp"
#include "dcftp/error.hpp"
#include "dcftp/queue.hpp"
#include "dcftp/stats.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace dcftp;

namespace {

DriftCertificate certify(const ChainSpec& chain, double d_prime, double delta, const std::vector<double>& lambdas,
                         double eps_cap) {
  CertifyOptions o;
  o.d_prime = d_prime;
  o.delta = delta;
  o.lambda_schedule = lambdas;
  o.eps_cap = eps_cap;
  auto res = certify_chain(chain, o);
  if (!res.certificate) throw CertificateError("rate condition violated for all lambda");
  return *res.certificate;
}

SamplerOptions make_options(const std::string& mode, const std::string& anchor, const std::string& backoff,
                            std::int64_t max_T, bool regeneration) {
  SamplerOptions o;
  o.mode = parse_mode(mode);
  o.anchor = parse_anchor(anchor);
  if (backoff == "doubling") o.backoff = Backoff::doubling;
  else if (backoff == "increment") o.backoff = Backoff::increment;
  else throw InvalidArgument("backoff must be 'doubling' or 'increment'");
  o.max_T = max_T;
  o.regeneration = regeneration;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dominated coupling from the past for finite chains under weak drift";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<CertificateError>(m, "CertificateError", base.ptr());
  py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());
  py::register_exception<LedgerConflict>(m, "LedgerConflict", base.ptr());
  py::register_exception<NoCoalescence>(m, "NoCoalescence", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<ChainSpec>(m, "Chain")
      .def(py::init([](Matrix P, std::vector<double> V, std::string label) { return make_chain(std::move(P), std::move(V), std::move(label)); }),
           py::arg("P"), py::arg("V"), py::arg("label") = "custom")
      .def_property_readonly("P", [](const ChainSpec& c) { return c.P; })
      .def_property_readonly("V", [](const ChainSpec& c) { return c.V; })
      .def_readonly("label", &ChainSpec::label)
      .def_property_readonly("n", &ChainSpec::n)
      .def("v_order", &ChainSpec::v_order);

  m.def("poly_rw", &build_poly_rw, py::arg("N") = 1024, py::arg("delta") = 0.5, py::arg("c_down") = 0.6,
        py::arg("c_up") = 0.4);
  m.def("regen_chain", [](int N, double eps_built, int m_mode) { return build_regen_chain(N, eps_built, m_mode).chain; },
        py::arg("N") = 31, py::arg("eps_built") = 0.2, py::arg("m_mode") = 1);
  m.def("three_state", &build_three_state);
  m.def("read_matrix_file", [](const std::string& p) { return read_matrix_file(p); });
  m.def("write_matrix_file", [](const std::string& p, const ChainSpec& c) { write_matrix_file(p, c); });
  m.def("exact_stationary", [](const ChainSpec& c) { return exact_stationary(c).pi; });

  py::class_<TamingParams>(m, "TamingParams")
      .def(py::init([](double l, double d, double dp) { return TamingParams{l, d, dp}; }), py::arg("lam"),
           py::arg("delta"), py::arg("d_prime"))
      .def_readonly("lam", &TamingParams::lambda)
      .def_readonly("delta", &TamingParams::delta)
      .def_readonly("d_prime", &TamingParams::d_prime);
  m.def("taming_F", &taming_F);
  m.def("rate_bound", &rate_bound);
  m.def("validate_rate_condition", &validate_rate_condition);
  m.def("select_beta_star", &select_beta_star);
  m.def("compute_h_star", &compute_h_star, py::arg("beta"), py::arg("beta_star"), py::arg("b"), py::arg("b_prime"),
        py::arg("taming"), py::arg("eps_cap") = 0.0);
  m.def("certify_weak_drift", [](const ChainSpec& c) {
    const WeakDrift w = certify_weak_drift(c);
    return py::make_tuple(w.b, w.C);
  });
  m.def("certify_subsampled_drift", [](const ChainSpec& c, const TamingParams& t) {
    const SubsampledDrift s = certify_subsampled_drift(c, t);
    return py::make_tuple(s.beta, s.b_prime);
  });

  py::class_<DriftCertificate>(m, "DriftCertificate")
      .def_readonly("b", &DriftCertificate::b)
      .def_readonly("C", &DriftCertificate::C)
      .def_readonly("beta", &DriftCertificate::beta)
      .def_readonly("b_prime", &DriftCertificate::b_prime)
      .def_readonly("taming", &DriftCertificate::taming)
      .def_readonly("beta_star", &DriftCertificate::beta_star)
      .def_readonly("eps_cap", &DriftCertificate::eps_cap)
      .def_readonly("h_star", &DriftCertificate::h_star)
      .def("validate", &DriftCertificate::validate)
      .def("serialize", &DriftCertificate::serialize)
      .def_static("parse", &DriftCertificate::parse);
  m.def("certify", &certify, py::arg("chain"), py::arg("d_prime"), py::arg("delta") = 0.5,
        py::arg("lambda_schedule") = std::vector<double>{2, 4, 6, 8}, py::arg("eps_cap") = 0.0);

  py::class_<MinorizationCert>(m, "MinorizationCert")
      .def_readonly("m", &MinorizationCert::m)
      .def_readonly("eps", &MinorizationCert::eps)
      .def_readonly("nu", &MinorizationCert::nu)
      .def_readonly("C_star", &MinorizationCert::C_star)
      .def("serialize", &MinorizationCert::serialize);
  m.def("minorization_for", &minorization_for, py::arg("chain"), py::arg("cert"), py::arg("m_max") = 16);

  m.def("sigma_root", &sigma_root);
  m.def("stationary_sample", [](double a, double u) { return stationary_sample(QueueParams::make(a, 1.0), u); });
  m.def("lindley_forward", &lindley_forward);
  m.def("reconstruct_innovation", &reconstruct_innovation);

  py::class_<PerfectSample>(m, "PerfectSample")
      .def_readonly("state", &PerfectSample::state)
      .def_readonly("V", &PerfectSample::V)
      .def_readonly("T_used", &PerfectSample::T_used)
      .def_readonly("regen_events", &PerfectSample::regen_events)
      .def_readonly("domination_violations", &PerfectSample::domination_violations)
      .def_readonly("seed", &PerfectSample::seed)
      .def("__eq__", [](const PerfectSample& a, const PerfectSample& b) { return a == b; })
      .def("__repr__", [](const PerfectSample& s) {
        return "PerfectSample(state=" + std::to_string(s.state) + ", T_used=" + std::to_string(s.T_used) + ")";
      });

  m.def(
      "perfect_sample",
      [](const ChainSpec& chain, const DriftCertificate& cert, std::optional<MinorizationCert> mcert,
         std::uint64_t seed, const std::string& mode, const std::string& anchor, const std::string& backoff,
         std::int64_t max_T, bool regeneration) {
        py::gil_scoped_release release;
        return run_perfect_sample(chain, cert, mcert, seed, make_options(mode, anchor, backoff, max_T, regeneration));
      },
      py::arg("chain"), py::arg("cert"), py::arg("mcert") = py::none(), py::arg("seed") = 0,
      py::arg("mode") = "standard", py::arg("anchor") = "time_stationary", py::arg("backoff") = "doubling",
      py::arg("max_T") = std::int64_t{1} << 20, py::arg("regeneration") = true);
  m.def(
      "sample_batch",
      [](const ChainSpec& chain, const DriftCertificate& cert, std::optional<MinorizationCert> mcert,
         std::uint64_t master_seed, std::size_t replicas, unsigned workers, const std::string& mode,
         const std::string& anchor) {
        py::gil_scoped_release release;
        return sample_batch(chain, cert, mcert, master_seed, replicas,
                            make_options(mode, anchor, "doubling", std::int64_t{1} << 20, true), workers);
      },
      py::arg("chain"), py::arg("cert"), py::arg("mcert") = py::none(), py::arg("master_seed") = 0,
      py::arg("replicas") = 1, py::arg("workers") = 1, py::arg("mode") = "standard",
      py::arg("anchor") = "time_stationary");

  m.def("chi_square_test", [](const std::vector<long>& counts, const std::vector<double>& probs) {
    const ChiSquareResult r = chi_square_test(counts, probs);
    return py::make_tuple(r.statistic, r.dof, r.p_value);
  });

  // Subcommands on a JSON config string; returns (exit code, stdout text, log text).
  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_json) {
        std::ostringstream out, log;
        int code;
        try {
          const RunConfig cfg = parse_config(config_json);
          code = run_command(command, cfg, out, log);
        } catch (const ConfigError& e) {
          log << "error: " << e.what() << '\n';
          code = kExitIo;
        }
        return py::make_tuple(code, out.str(), log.str());
      },
      py::arg("command"), py::arg("config_json"));
  m.def("effective_config", [](const std::string& config_json) { return effective_config_json(parse_config(config_json), 2); });
}
