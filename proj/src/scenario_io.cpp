#include "eqmo/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace eqmo {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Located {
  std::string value;
  std::size_t line = 0;
};

class Parser {
 public:
  Parser(std::string_view source) : source_(source) {}

  [[noreturn]] void fail(std::size_t line, const std::string& what) const {
    std::ostringstream msg;
    msg << source_ << ":" << line << ": " << what;
    throw Error(ErrorCode::ParseError, msg.str());
  }

  double number(const Located& v, std::string_view key) const {
    const std::string_view s = trim(v.value);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      fail(v.line, "key '" + std::string(key) + "' expects a number, got '" + std::string(s) + "'");
    return out;
  }

  std::size_t count(const Located& v, std::string_view key) const {
    const std::string_view s = trim(v.value);
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      fail(v.line, "key '" + std::string(key) + "' expects a nonnegative integer");
    return out;
  }

  std::vector<double> list(const Located& v, std::string_view key) const {
    std::vector<double> out;
    std::string_view rest = v.value;
    while (true) {
      const auto comma = rest.find(',');
      out.push_back(number(Located{std::string(rest.substr(0, comma)), v.line}, key));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  ObjectiveTerm term(const Located& v) const {
    const auto arrow = v.value.find("->");
    if (arrow == std::string::npos) fail(v.line, "term must look like 'k1:e1,k2:e2 -> coeff'");
    ObjectiveTerm t;
    t.coeff = number(Located{v.value.substr(arrow + 2), v.line}, "term");
    std::string_view factors = trim(std::string_view(v.value).substr(0, arrow));
    if (factors.empty()) fail(v.line, "term has no factors");
    while (true) {
      const auto comma = factors.find(',');
      const std::string_view f = trim(factors.substr(0, comma));
      const auto colon = f.find(':');
      if (colon == std::string_view::npos) fail(v.line, "term factor '" + std::string(f) + "' must be k:e");
      const std::size_t k = count(Located{std::string(f.substr(0, colon)), v.line}, "term order");
      const std::size_t e = count(Located{std::string(f.substr(colon + 1)), v.line}, "term exponent");
      if (k < 1 || k > static_cast<std::size_t>(kMaxOrder)) fail(v.line, "term order must lie in [1, 8]");
      t.exponents[k] += static_cast<int>(e);
      if (comma == std::string_view::npos) break;
      factors = factors.substr(comma + 1);
    }
    return t;
  }

 private:
  std::string source_;
};

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"market", {"T", "x0", "grid_n", "r", "theta", "sigma", "sigma_min"}},
      {"objective", {"mode", "max_order", "term"}},
      {"numerics",
       {"scheme", "tolerance", "paths", "batches", "mc_order", "bsde_degree", "z_bound", "picard_iterations",
        "verify_strategy", "verify_scale"}},
      {"factor", {"kind", "kappa", "theta_bar", "eta", "rho", "theta0"}},
  };
  return keys;
}

}  // namespace

ScenarioBundle parse_scenario_text(std::string_view text, std::string_view source,
                                   std::optional<std::size_t> grid_n_override) {
  const Parser parser(source);
  std::map<std::string, std::map<std::string, Located>> values;
  std::vector<Located> terms;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parser.fail(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_keys().contains(section)) parser.fail(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parser.fail(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (section.empty()) parser.fail(line_no, "key '" + key + "' outside any section");
    if (!known_keys().at(section).contains(key))
      parser.fail(line_no, "unknown key '" + key + "' in [" + section + "]");
    if (value.empty()) parser.fail(line_no, "key '" + key + "' has no value");
    if (section == "objective" && key == "term") {
      terms.push_back({value, line_no});
      continue;
    }
    if (values[section].contains(key)) parser.fail(line_no, "duplicate key '" + key + "'");
    values[section][key] = {value, line_no};
  }

  auto get = [&](const std::string& sec, const std::string& key) -> const Located* {
    const auto s = values.find(sec);
    if (s == values.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };
  auto require = [&](const std::string& sec, const std::string& key) -> const Located& {
    const Located* v = get(sec, key);
    if (!v) parser.fail(line_no, "missing required key '" + key + "' in [" + sec + "]");
    return *v;
  };

  ScenarioBundle bundle;
  MarketScenario& m = bundle.market;
  m.T = parser.number(require("market", "T"), "T");
  if (const auto* v = get("market", "x0")) m.x0 = parser.number(*v, "x0");
  if (const auto* v = get("market", "grid_n")) m.grid_n = parser.count(*v, "grid_n");
  if (grid_n_override) m.grid_n = *grid_n_override;
  if (const auto* v = get("market", "sigma_min")) m.sigma_min = parser.number(*v, "sigma_min");
  auto array = [&](const char* key) {
    const Located& v = require("market", key);
    std::vector<double> a = parser.list(v, key);
    if (a.size() == 1) a.assign(m.grid_n + 1, a.front());
    return a;
  };
  m.r = array("r");
  m.theta = array("theta");
  m.sigma = array("sigma");

  ObjectiveSpec& obj = bundle.objective;
  if (const auto* v = get("objective", "mode")) {
    if (v->value == "central") obj.mode = MomentMode::central;
    else if (v->value == "cumulant") obj.mode = MomentMode::cumulant;
    else parser.fail(v->line, "mode must be central or cumulant");
  }
  if (terms.empty()) parser.fail(line_no, "objective has no terms");
  int top = 2;
  for (const auto& t : terms) {
    obj.terms.push_back(parser.term(t));
    for (int k = 2; k <= kMaxOrder; ++k)
      if (obj.terms.back().involves(k)) top = std::max(top, k);
  }
  obj.max_order = top;
  if (const auto* v = get("objective", "max_order")) obj.max_order = static_cast<int>(parser.count(*v, "max_order"));

  Numerics& num = bundle.numerics;
  if (const auto* v = get("numerics", "scheme")) {
    if (v->value == "explicit") num.scheme = Scheme::explicit_scheme;
    else if (v->value == "implicit") num.scheme = Scheme::implicit_scheme;
    else parser.fail(v->line, "scheme must be explicit or implicit");
  }
  if (const auto* v = get("numerics", "tolerance")) num.tolerance = parser.number(*v, "tolerance");
  if (const auto* v = get("numerics", "paths")) num.paths = parser.count(*v, "paths");
  if (const auto* v = get("numerics", "batches")) num.batches = parser.count(*v, "batches");
  if (const auto* v = get("numerics", "mc_order")) num.mc_order = static_cast<int>(parser.count(*v, "mc_order"));
  if (const auto* v = get("numerics", "bsde_degree"))
    num.bsde_degree = static_cast<int>(parser.count(*v, "bsde_degree"));
  if (const auto* v = get("numerics", "z_bound")) num.z_bound = parser.number(*v, "z_bound");
  if (const auto* v = get("numerics", "picard_iterations"))
    num.picard_iterations = static_cast<int>(parser.count(*v, "picard_iterations"));
  if (const auto* v = get("numerics", "verify_strategy")) {
    if (v->value == "sweep") num.verify_strategy = VerifyTarget::sweep;
    else if (v->value == "mv_closed_form") num.verify_strategy = VerifyTarget::mv_closed_form;
    else parser.fail(v->line, "verify_strategy must be sweep or mv_closed_form");
  }
  if (const auto* v = get("numerics", "verify_scale")) num.verify_scale = parser.number(*v, "verify_scale");

  FactorModel& f = bundle.factor;
  if (const auto* v = get("factor", "kind")) {
    if (v->value == "none") f.kind = FactorKind::none;
    else if (v->value == "ou") f.kind = FactorKind::ou;
    else parser.fail(v->line, "factor kind must be none or ou");
  }
  if (const auto* v = get("factor", "kappa")) f.kappa = parser.number(*v, "kappa");
  if (const auto* v = get("factor", "theta_bar")) f.theta_bar = parser.number(*v, "theta_bar");
  if (const auto* v = get("factor", "eta")) f.eta = parser.number(*v, "eta");
  if (const auto* v = get("factor", "rho")) f.rho = parser.number(*v, "rho");
  if (const auto* v = get("factor", "theta0")) f.theta0 = parser.number(*v, "theta0");
  else f.theta0 = m.theta.empty() ? 0.0 : m.theta.front();
  f.validate();

  ValidatedScenario valid = validate_scenario(m, obj);
  bundle.market = std::move(valid.scenario);
  bundle.objective = std::move(valid.objective);
  return bundle;
}

ScenarioBundle parse_scenario(const std::string& path, std::optional<std::size_t> grid_n_override) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scenario file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario_text(text.str(), path, grid_n_override);
}

}  // namespace eqmo
