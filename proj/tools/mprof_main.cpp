#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mprof/construct.hpp"
#include "mprof/profiles.hpp"

using namespace mprof;

namespace {

enum Exit { kOk = 0, kUsage = 1, kVerification = 2, kResource = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string out = "-";
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::size_t ball_cap = kDefaultBallCap;
  std::size_t word_cap = 1'000'000;
  std::uint64_t budget = 50'000'000;
  std::size_t dimension_cap = 4096;
  double tolerance = 1e-9;

  VerifyOptions verify() const {
    VerifyOptions v;
    v.margin = tolerance;
    v.ball_cap = ball_cap;
    v.word_cap = word_cap;
    v.workers = workers;
    return v;
  }
  BuildOptions build() const {
    BuildOptions b;
    b.verify = verify();
    b.dimension_cap = dimension_cap;
    return b;
  }
  void check() const {
    if (!(tolerance > 0 && tolerance <= 1e-3)) throw UsageError("tolerance must lie in (0, 1e-3]");
    if (workers == 0 || ball_cap == 0 || word_cap == 0 || budget == 0 || dimension_cap == 0)
      throw UsageError("caps and worker count must be positive");
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out,-o", c.out, "Output file, - for standard output");
  app->add_option("--seed", c.seed, "Seed for randomized steps");
  app->add_option("--workers", c.workers, "Worker count");
  app->add_option("--ball-cap", c.ball_cap, "Largest ball enumerated");
  app->add_option("--word-cap", c.word_cap, "Largest word set enumerated");
  app->add_option("--budget", c.budget, "Oracle search budget");
  app->add_option("--dimension-cap", c.dimension_cap, "Largest materialized matrix");
  app->add_option("--tolerance", c.tolerance, "Margin for floating comparisons");
}

void write(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
}

std::string read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::pair<int, int> parse_range(const std::string& text) {
  auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      int n = std::stoi(text);
      return {n, n};
    }
    return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw UsageError("bad range '" + text + "', expected N or A..B");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

Group group_arg(const std::string& text) {
  try {
    return parse_group(text);
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad group: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_ball(const Common& c, const std::string& group, int n) {
  Group g = group_arg(group);
  Ball b = ball(g, n, c.ball_cap);
  json elems = json::array();
  for (std::size_t i = 0; i < b.size(); ++i) elems.push_back({{"element", g.format(b.elements[i])}, {"length", b.lengths[i]}});
  write(c.out, json{{"group", g.to_json()}, {"n", n}, {"size", b.size()}, {"elements", elems}}.dump(2) + "\n");
  return kOk;
}

struct ConstructArgs {
  std::string method;
  std::string group = "Z";
  int n = 1;
  std::string family = "sofic";
  std::vector<std::string> inputs;
  Int modulus = 0;
};

ApproxCertificate load_cert(const std::string& path, const Common& c) {
  return ApproxCertificate::from_json(json::parse(read(path)), c.ball_cap);
}

std::string construct_json(const Common& c, const ConstructArgs& a) {
  const auto opt = c.build();
  const Family::Tag tag = parse_family_tag(a.family);
  auto need_inputs = [&](std::size_t k) {
    if (a.inputs.size() != k)
      throw UsageError("method " + a.method + " needs " + std::to_string(k) + " --input certificate(s)");
  };
  if (a.method == "cyclic-z") return cyclic_Z(a.n, opt).to_json().dump(2);
  if (a.method == "quotient" || a.method == "hom-quotient") {
    Group g = group_arg(a.group);
    auto q = a.modulus > 0 ? QuotientDescriptor::congruence(g, a.modulus)
                           : *full_rf_growth(g, 2 * a.n, QuotientFamily::Congruence).quotient;
    if (a.method == "quotient") return from_quotient(g, q, a.n, tag, Field{}, opt).to_json().dump(2);
    auto rep = quotient_representation(g, q, 1, Family::Tag::Sofic);
    HomCertificate h(g, rep.family, 1.0);
    for (const auto& gen : g.generators()) h.images.push_back(rep.image(gen.element));
    h.relators = default_relators(g);
    h.provenance = construction_trace("hom_quotient", {{"quotient", q.to_json()}}, a.n, 1.0, rep.dimension());
    return h.to_json().dump(2);
  }
  if (a.method == "folner") {
    Group g = group_arg(a.group);
    auto s = g.kind() == GroupKind::FreeAbelian ? FolnerStrategy::boxes() : FolnerStrategy::balls(12);
    s.ball_cap = c.ball_cap;
    auto r = folner_search(g, 2 * a.n, s);
    if (!r.witness) throw CapacityError("no listed Folner set at radius " + std::to_string(2 * a.n));
    return folner_to_sofic(*r.witness, a.n, opt).to_json().dump(2);
  }
  if (a.method == "oracle") {
    OracleOptions o;
    o.budget = c.budget;
    o.relabel_seed = c.seed;
    auto r = sofic_exact_oracle(group_arg(a.group), a.n, o);
    if (!r.witness) throw CapacityError("oracle found no witness: " + r.point.trace.dump());
    return r.witness->to_json().dump(2);
  }
  if (a.method == "product") {
    need_inputs(2);
    return direct_product(load_cert(a.inputs[0], c), load_cert(a.inputs[1], c), opt).to_json().dump(2);
  }
  if (a.method == "unitary-lift") {
    need_inputs(1);
    auto r = unitary_lift(load_cert(a.inputs[0], c));
    auto rep = verify_D(r, opt.verify);
    if (!rep.pass) throw VerificationFailure(rep);
    return r.to_json().dump(2);
  }
  if (a.method == "perm-to-hyp") {
    need_inputs(1);
    return perm_to_hyp(load_cert(a.inputs[0], c), a.n, opt).to_json().dump(2);
  }
  if (a.method == "perm-to-lin") {
    need_inputs(1);
    return perm_to_lin(load_cert(a.inputs[0], c), Field{}, opt).to_json().dump(2);
  }
  if (a.method == "amplify") {
    need_inputs(1);
    return amplify_projective(load_cert(a.inputs[0], c), a.n, opt).to_json().dump(2);
  }
  if (a.method == "wreath-by-rf") {
    need_inputs(1);
    auto base = load_cert(a.inputs[0], c);
    Group top = group_arg(a.group);
    if (a.modulus <= 0) throw UsageError("wreath-by-rf needs --modulus");
    return wreath_by_rf(base, QuotientDescriptor::congruence(top, a.modulus), a.n, opt).to_json().dump(2);
  }
  throw UsageError("unknown method '" + a.method + "'");
}

int cmd_verify(const Common& c, const std::string& path, std::optional<int> n, bool relators) {
  json j = json::parse(read(path));
  VerificationReport r;
  if (j.contains("images")) {
    auto h = HomCertificate::from_json(j);
    if (!n) throw UsageError("verifying a homomorphism certificate needs --n");
    r = relators ? verify_R(h, *n, c.verify()) : verify_W(h, *n, c.verify());
  } else {
    r = verify_D(ApproxCertificate::from_json(j, c.ball_cap), c.verify());
  }
  write(c.out, r.to_json().dump(2) + "\n");
  return r.pass ? kOk : kVerification;
}

std::string profile_csv(const Common& c, const std::string& group, const std::string& family, const std::string& range,
                        const std::string& methods, std::size_t oracle_ball) {
  Group g = group_arg(group);
  auto [lo, hi] = parse_range(range);
  if (lo < 1 || hi < lo) throw UsageError("profile range must satisfy 1 <= A <= B");
  CurveOptions o;
  o.build = c.build();
  o.oracle_ball = oracle_ball;
  o.oracle.budget = c.budget;
  o.oracle.relabel_seed = c.seed;
  if (family == "growth") return growth_curve(g, lo, hi).to_csv();
  return upper_curve(g, parse_family_tag(family), lo, hi, split(methods, ','), o).to_csv();
}

std::string folner_csv(const Common& c, const std::string& group, const std::string& range, const std::string& strategy,
                       int r_max, std::size_t size_max, std::int64_t side_max) {
  Group g = group_arg(group);
  auto [lo, hi] = parse_range(range);
  if (lo < 1 || hi < lo) throw UsageError("Folner range must satisfy 1 <= A <= B");
  FolnerStrategy s;
  if (strategy == "exhaustive")
    s = FolnerStrategy::exhaustive(r_max, size_max);
  else if (strategy == "balls")
    s = FolnerStrategy::balls(r_max);
  else if (strategy == "boxes")
    s = FolnerStrategy::boxes(side_max);
  else
    throw UsageError("unknown strategy '" + strategy + "'");
  s.ball_cap = c.ball_cap;
  return folner_curve(g, lo, hi, s).to_csv();
}

std::string rf_csv(const std::string& group, const std::string& range, const std::string& family) {
  Group g = group_arg(group);
  auto [lo, hi] = parse_range(range);
  if (lo < 0 || hi < lo) throw UsageError("range must satisfy 0 <= A <= B");
  QuotientFamily f;
  if (family == "sublattices")
    f = QuotientFamily::Sublattices;
  else if (family == "congruence")
    f = QuotientFamily::Congruence;
  else
    throw UsageError("unknown quotient family '" + family + "'");
  return rf_curve(g, lo, hi, f).to_csv();
}

int cmd_audit(const Common& c, const std::vector<std::string>& curves, const std::string& group,
              const std::string& round_trip, int m_max) {
  std::vector<ProfileCurve> loaded;
  for (const auto& entry : curves) {
    auto eq = entry.find('=');
    if (eq == std::string::npos) throw UsageError("--curve expects QUANTITY=FILE, got '" + entry + "'");
    loaded.push_back(ProfileCurve::from_csv(read(entry.substr(eq + 1)), entry.substr(0, eq), group));
  }
  AuditReport r = inequality_audit(loaded);
  if (!round_trip.empty()) {
    auto rt = round_trip_audit(group_arg(round_trip), m_max, c.verify());
    r.checks.insert(r.checks.end(), rt.checks.begin(), rt.checks.end());
    r.violations += rt.violations;
  }
  write(c.out, r.to_json().dump(2) + "\n");
  return r.violations == 0 ? kOk : kVerification;
}

// Flat "key = value" lines become "--key value" ahead of the command line,
// so explicit flags override them.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> rest;
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 == args.size()) throw UsageError("--config needs a file");
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config.empty()) return rest;
  std::istringstream in(read(config));
  std::string line, command;
  std::vector<std::string> from_file;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(config + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "command") {
      command = value;
      continue;
    }
    if (key == "input" || key == "curve") {
      for (const auto& v : split(value, ' ')) {
        from_file.push_back("--" + key);
        from_file.push_back(v);
      }
      continue;
    }
    from_file.push_back("--" + key);
    from_file.push_back(value);
  }
  std::vector<std::string> out;
  std::size_t start = 0;
  if (!rest.empty() && rest[0].rfind("-", 0) != 0) {
    out.push_back(rest[0]);
    start = 1;
  } else if (!command.empty()) {
    out.push_back(command);
  }
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), rest.begin() + static_cast<long>(start), rest.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric approximation certificates and profile estimates for finitely generated groups"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all");

  Common common;

  auto* ball_cmd = app.add_subcommand("ball", "List the ball B(n) with word lengths");
  std::string group = "Z";
  int n = 1;
  ball_cmd->add_option("--group,-g", group, "Group descriptor");
  ball_cmd->add_option("--n", n, "Radius")->check(CLI::NonNegativeNumber);
  add_common(ball_cmd, common);

  auto* construct = app.add_subcommand("construct", "Build and verify a certificate");
  ConstructArgs ca;
  construct->add_option("--method,-m", ca.method,
                        "cyclic-z, quotient, hom-quotient, folner, oracle, product, unitary-lift, perm-to-hyp, "
                        "perm-to-lin, amplify, wreath-by-rf")
      ->required();
  construct->add_option("--group,-g", ca.group, "Group descriptor");
  construct->add_option("--n", ca.n, "Radius")->check(CLI::PositiveNumber);
  construct->add_option("--family,-f", ca.family, "Target family for quotient certificates");
  construct->add_option("--input,-i", ca.inputs, "Input certificate files")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  construct->add_option("--modulus", ca.modulus, "Congruence modulus");
  add_common(construct, common);

  auto* verify = app.add_subcommand("verify", "Verify a certificate; exit 2 on failure");
  std::string cert;
  std::optional<int> hom_n;
  bool relators = false;
  verify->add_option("--cert,-c", cert, "Certificate file")->required();
  verify->add_option("--n", hom_n, "Radius for homomorphism certificates");
  verify->add_flag("--relators", relators, "Check relators instead of all short words");
  add_common(verify, common);

  auto* profile = app.add_subcommand("profile", "Profile curve as CSV");
  std::string family = "sofic", range = "1..5", methods = "cyclic,product,quotient";
  std::size_t oracle_ball = 0;
  profile->add_option("--group,-g", group, "Group descriptor");
  profile->add_option("--family,-f", family, "sofic, hyp, lin, fin or growth");
  profile->add_option("--n", range, "Range A..B");
  profile->add_option("--methods", methods, "Comma-separated builders");
  profile->add_option("--oracle-ball", oracle_ball, "Run the exact oracle when |B(n)| is at most this");
  add_common(profile, common);

  auto* folner = app.add_subcommand("folner", "Folner function estimates as CSV");
  std::string strategy = "boxes";
  int r_max = 6;
  std::size_t size_max = 4;
  std::int64_t side_max = 1 << 14;
  folner->add_option("--group,-g", group, "Group descriptor");
  folner->add_option("--n", range, "Range A..B");
  folner->add_option("--strategy", strategy, "exhaustive, balls or boxes");
  folner->add_option("--r-max", r_max, "Window or largest ball radius");
  folner->add_option("--size-max", size_max, "Largest exhaustive set");
  folner->add_option("--side-max", side_max, "Largest box side");
  add_common(folner, common);

  auto* rf = app.add_subcommand("rfgrowth", "Full residual finiteness growth as CSV");
  std::string quotients = "sublattices";
  rf->add_option("--group,-g", group, "Group descriptor");
  rf->add_option("--n", range, "Range A..B");
  rf->add_option("--quotients", quotients, "sublattices or congruence");
  add_common(rf, common);

  auto* audit = app.add_subcommand("audit", "Check the profile inequalities; exit 2 on violation");
  std::vector<std::string> curves;
  std::string audit_group = "G", round_trip;
  int m_max = 2;
  audit->add_option("--curve", curves, "QUANTITY=FILE, e.g. sofic=z_sofic.csv")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  audit->add_option("--group,-g", audit_group, "Label shared by the curves");
  audit->add_option("--round-trip", round_trip, "Also round-trip certificates of this group");
  audit->add_option("--m-max", m_max, "Largest m for the round trip");
  add_common(audit, common);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
    common.check();
    if (*ball_cmd) return cmd_ball(common, group, n);
    if (*construct) {
      write(common.out, construct_json(common, ca) + "\n");
      return kOk;
    }
    if (*verify) return cmd_verify(common, cert, hom_n, relators);
    if (*profile) {
      write(common.out, profile_csv(common, group, family, range, methods, oracle_ball));
      return kOk;
    }
    if (*folner) {
      write(common.out, folner_csv(common, group, range, strategy, r_max, size_max, side_max));
      return kOk;
    }
    if (*rf) {
      write(common.out, rf_csv(group, range, quotients));
      return kOk;
    }
    if (*audit) return cmd_audit(common, curves, audit_group, round_trip, m_max);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const VerificationFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    write(common.out, e.report.to_json().dump(2) + "\n");
    return kVerification;
  } catch (const CapacityError& e) {
    std::cerr << "error: resource cap: " << e.what() << "\n";
    return kResource;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
