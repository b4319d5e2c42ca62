#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mprof/profiles.hpp"

namespace py = pybind11;
using namespace mprof;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.
std::string dump(const json& j) { return j.dump(); }

QuotientFamily quotient_family(const std::string& s) {
  if (s == "sublattices") return QuotientFamily::Sublattices;
  if (s == "congruence") return QuotientFamily::Congruence;
  throw std::invalid_argument("unknown quotient family: " + s);
}

FolnerStrategy folner_strategy(const std::string& s, int r_max, std::size_t size_max, std::int64_t side_max) {
  if (s == "exhaustive") return FolnerStrategy::exhaustive(r_max, size_max);
  if (s == "balls") return FolnerStrategy::balls(r_max);
  if (s == "boxes") return FolnerStrategy::boxes(side_max);
  throw std::invalid_argument("unknown Følner strategy: " + s);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Metric approximation profiles of finitely generated groups";

  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<VerificationFailure>(m, "VerificationFailure", PyExc_RuntimeError);

  m.def("growth", [](const std::string& group, int n) { return growth(parse_group(group), n); }, py::arg("group"),
        py::arg("n"));
  m.def(
      "ball",
      [](const std::string& group, int n) {
        Group g = parse_group(group);
        std::vector<std::string> out;
        for (const auto& e : ball(g, n).elements) out.push_back(g.format(e));
        return out;
      },
      py::arg("group"), py::arg("n"));

  m.def("cyclic_z", [](int n) { return dump(cyclic_Z(n).to_json()); }, py::arg("n"));
  m.def(
      "from_quotient",
      [](const std::string& group, int n, const std::string& family) {
        Group g = parse_group(group);
        RfResult rf = full_rf_growth(g, 2 * n, g.kind() == GroupKind::FreeAbelian ? QuotientFamily::Sublattices
                                                                                    : QuotientFamily::Congruence);
        if (!rf.quotient) throw std::runtime_error("no quotient found");
        return dump(from_quotient(g, *rf.quotient, n, parse_family_tag(family)).to_json());
      },
      py::arg("group"), py::arg("n"), py::arg("family") = "sofic");
  m.def(
      "verify",
      [](const std::string& cert) { return dump(verify_D(ApproxCertificate::from_json(json::parse(cert))).to_json()); },
      py::arg("certificate"));

  m.def("weakly_sofic_exact_z", [](int n) { return dump(weakly_sofic_exact_Z(Group::free_abelian(1), n).to_json()); },
        py::arg("n"));
  m.def(
      "sofic_oracle",
      [](const std::string& group, int n, int k_max, std::uint64_t budget) {
        OracleOptions opt;
        opt.k_max = k_max;
        opt.budget = budget;
        OracleResult r = sofic_exact_oracle(parse_group(group), n, opt);
        json j = r.point.to_json();
        j["refuted_up_to"] = r.refuted_up_to;
        j["nodes"] = r.nodes;
        return dump(j);
      },
      py::arg("group"), py::arg("n"), py::arg("k_max") = 6, py::arg("budget") = 50'000'000);
  m.def(
      "rf_growth",
      [](const std::string& group, int n, const std::string& family) {
        return dump(full_rf_growth(parse_group(group), n, quotient_family(family)).point.to_json());
      },
      py::arg("group"), py::arg("n"), py::arg("quotients") = "sublattices");
  m.def(
      "folner",
      [](const std::string& group, int n, const std::string& strategy, int r_max, std::size_t size_max,
         std::int64_t side_max) {
        return dump(folner_search(parse_group(group), n, folner_strategy(strategy, r_max, size_max, side_max))
                        .point()
                        .to_json());
      },
      py::arg("group"), py::arg("n"), py::arg("strategy") = "boxes", py::arg("r_max") = 8, py::arg("size_max") = 6,
      py::arg("side_max") = 1 << 14);
  m.def(
      "upper_curve",
      [](const std::string& group, const std::string& family, int lo, int hi, const std::vector<std::string>& builders) {
        return upper_curve(parse_group(group), parse_family_tag(family), lo, hi, builders).to_csv();
      },
      py::arg("group"), py::arg("family"), py::arg("lo"), py::arg("hi"), py::arg("builders"));
  m.def(
      "audit",
      [](const std::vector<std::tuple<std::string, std::string, std::string>>& curves) {
        std::vector<ProfileCurve> cs;
        for (const auto& [quantity, csv, group] : curves) cs.push_back(ProfileCurve::from_csv(csv, quantity, group));
        return dump(inequality_audit(cs).to_json());
      },
      py::arg("curves"));
  m.def("amplification_power", &amplification_power, py::arg("n"));
}
