#include "ipslab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace ipslab {

using nlohmann::json;

ConfigError::ConfigError(std::string source_, std::string field_, int line_, const std::string& message)
    : std::runtime_error(source_ + (line_ > 0 ? ":" + std::to_string(line_) : std::string()) +
                         (field_.empty() ? std::string() : ": field " + field_) + ": " + message),
      source(std::move(source_)),
      field(std::move(field_)),
      line(line_),
      message(message) {}

namespace {

[[noreturn]] void fail(const std::string& at, const std::string& msg) { throw ConfigError("", at, 0, msg); }

std::string type_name(const json& j) { return j.type_name(); }

const json& need(const json& j, const std::string& key, const std::string& at) {
  if (!j.is_object()) fail(at, "expected an object, got " + type_name(j));
  auto it = j.find(key);
  if (it == j.end()) fail(at + "/" + key, "missing");
  return *it;
}

double number(const json& j, const std::string& at) {
  if (!j.is_number()) fail(at, "expected a number, got " + type_name(j));
  double v = j.get<double>();
  if (!std::isfinite(v)) fail(at, "must be finite");
  return v;
}

double number(const json& j, const std::string& key, const std::string& at, std::optional<double> dflt = {}) {
  if (dflt && (!j.is_object() || !j.contains(key))) return *dflt;
  return number(need(j, key, at), at + "/" + key);
}

long long integer(const json& j, const std::string& at) {
  if (!j.is_number_integer()) fail(at, "expected an integer, got " + type_name(j));
  return j.get<long long>();
}

std::string text(const json& j, const std::string& at) {
  if (!j.is_string()) fail(at, "expected a string, got " + type_name(j));
  return j.get<std::string>();
}

double nonneg(double v, const std::string& at) {
  if (v < 0.0) fail(at, "must be >= 0");
  return v;
}

Point point_from_json(const json& j, int dim, const std::string& at) {
  if (!j.is_array()) fail(at, "expected a point (array of integers)");
  if (static_cast<int>(j.size()) != dim)
    fail(at, "point has " + std::to_string(j.size()) + " coordinates, expected " + std::to_string(dim));
  Point p;
  for (std::size_t k = 0; k < j.size(); ++k) p.push_back(static_cast<int>(integer(j[k], at + "/" + std::to_string(k))));
  return p;
}

Window window_from_json(const json& j, int dim, const std::string& at) {
  if (!j.is_array() || j.empty()) fail(at, "expected a non-empty array of points");
  std::vector<Point> pts;
  for (std::size_t k = 0; k < j.size(); ++k) pts.push_back(point_from_json(j[k], dim, at + "/" + std::to_string(k)));
  std::sort(pts.begin(), pts.end());
  if (std::adjacent_find(pts.begin(), pts.end()) != pts.end()) fail(at, "repeated site");
  return Window(pts);
}

std::vector<double> table_from_json(const json& j, const std::string& at) {
  if (!j.is_array()) fail(at, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], at + "/" + std::to_string(k)));
  return out;
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& at) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok |= it.key() == k;
    if (!ok) fail(at + "/" + it.key(), "unknown key");
  }
}

// JSON pointer -> line of the value, found by a second pass over the (valid) text
class Locator {
 public:
  explicit Locator(const std::string& s) : s_(s) { value(""); }
  int line(std::string ptr) const {
    for (;;) {
      auto it = lines_.find(ptr);
      if (it != lines_.end()) return it->second;
      auto cut = ptr.rfind('/');
      if (cut == std::string::npos) return 0;
      ptr.resize(cut);
    }
  }

 private:
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }
  std::string str() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\' && i_ + 1 < s_.size()) out += s_[i_++];
      out += s_[i_++];
    }
    ++i_;
    return out;
  }
  static std::string escape(const std::string& k) {
    std::string out;
    for (char c : k) out += c == '~' ? "~0" : c == '/' ? "~1" : std::string(1, c);
    return out;
  }
  void value(const std::string& path) {
    ws();
    if (i_ >= s_.size()) return;
    lines_.emplace(path, line_);
    char c = s_[i_];
    if (c == '{' || c == '[') {
      const char close = c == '{' ? '}' : ']';
      ++i_;
      ws();
      if (i_ < s_.size() && s_[i_] == close) {
        ++i_;
        return;
      }
      for (std::size_t idx = 0; i_ < s_.size(); ++idx) {
        ws();
        std::string sub;
        if (c == '{') {
          sub = path + "/" + escape(str());
          ws();
          ++i_;  // ':'
        } else {
          sub = path + "/" + std::to_string(idx);
        }
        value(sub);
        ws();
        if (i_ < s_.size() && s_[i_] == ',') {
          ++i_;
          continue;
        }
        ++i_;  // close
        return;
      }
    } else if (c == '"') {
      str();
    } else {
      while (i_ < s_.size() && !std::strchr(",}] \t\r\n", s_[i_])) ++i_;
    }
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

}  // namespace

const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> s{"decay",      "decomposition", "jensen",    "gtilde",
                                          "reversible", "attractor",     "conditions"};
  return s;
}

Potential potential_from_json(const json& j, int dim, const std::string& at) {
  if (!j.is_object()) fail(at, "expected an object");
  if (j.contains("builtin")) {
    const std::string name = text(j["builtin"], at + "/builtin");
    auto q_of = [&](int dflt) {
      if (!j.contains("q")) return dflt;
      long long q = integer(j["q"], at + "/q");
      if (q < 2 || q > 64) fail(at + "/q", "alphabet size must be in 2..64");
      return static_cast<int>(q);
    };
    if (name == "ising") {
      only_keys(j, {"builtin", "beta", "field"}, at);
      return ising_potential(number(j, "beta", at), number(j, "field", at, 0.0), dim);
    }
    if (name == "potts") {
      only_keys(j, {"builtin", "beta", "q"}, at);
      return potts_potential(q_of(3), number(j, "beta", at), dim);
    }
    if (name == "zero") {
      only_keys(j, {"builtin", "q"}, at);
      return zero_potential(q_of(2), dim);
    }
    if (name == "field") {
      only_keys(j, {"builtin", "h", "q"}, at);
      return single_site_field(number(j, "h", at), q_of(2), dim);
    }
    fail(at + "/builtin", "unknown potential '" + name + "' (ising, potts, zero, field)");
  }
  only_keys(j, {"q", "terms", "name"}, at);
  long long q = integer(need(j, "q", at), at + "/q");
  if (q < 2 || q > 64) fail(at + "/q", "alphabet size must be in 2..64");
  const json& terms = need(j, "terms", at);
  if (!terms.is_array()) fail(at + "/terms", "expected an array");
  std::vector<Interaction> out;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const std::string tat = at + "/terms/" + std::to_string(k);
    Window shape = window_from_json(need(terms[k], "shape", tat), dim, tat + "/shape");
    auto table = table_from_json(need(terms[k], "table", tat), tat + "/table");
    out.push_back({shape, table});
  }
  try {
    return Potential(static_cast<int>(q), dim, std::move(out), j.value("name", std::string("custom")));
  } catch (const std::exception& e) {
    fail(at, e.what());
  }
}

RateFamily rates_from_json(const json& j, const Potential& potential, const std::string& at) {
  if (!j.is_object()) fail(at, "expected an object");
  const int q = potential.q(), dim = potential.dimension();
  if (j.contains("builtin")) {
    const std::string name = text(j["builtin"], at + "/builtin");
    if (name == "glauber_heat_bath") {
      only_keys(j, {"builtin"}, at);
      return glauber_heat_bath(potential);
    }
    if (name == "glauber_metropolis") {
      only_keys(j, {"builtin"}, at);
      return glauber_metropolis(potential);
    }
    if (name == "exclusion") {
      only_keys(j, {"builtin", "p_right", "p_left"}, at);
      if (q != 2) fail(at + "/builtin", "exclusion needs a two-state potential");
      return exclusion(nonneg(number(j, "p_right", at), at + "/p_right"),
                       nonneg(number(j, "p_left", at), at + "/p_left"), dim);
    }
    if (name == "cyclic_clock") {
      only_keys(j, {"builtin", "forward", "backward"}, at);
      return cyclic_clock(q, nonneg(number(j, "forward", at), at + "/forward"),
                          nonneg(number(j, "backward", at, 0.0), at + "/backward"), dim);
    }
    if (name == "independent_flip") {
      only_keys(j, {"builtin", "rate"}, at);
      return independent_flip(q, nonneg(number(j, "rate", at, 1.0), at + "/rate"), dim);
    }
    if (name == "contact_process") {
      only_keys(j, {"builtin", "lambda"}, at);
      if (q != 2) fail(at + "/builtin", "contact process needs a two-state potential");
      return contact_process(nonneg(number(j, "lambda", at), at + "/lambda"), dim);
    }
    fail(at + "/builtin", "unknown rates '" + name +
                              "' (glauber_heat_bath, glauber_metropolis, exclusion, cyclic_clock, "
                              "independent_flip, contact_process)");
  }
  only_keys(j, {"rules", "name"}, at);
  const json& rules = need(j, "rules", at);
  if (!rules.is_array() || rules.empty()) fail(at + "/rules", "expected a non-empty array");
  std::vector<TransitionRule> out;
  for (std::size_t k = 0; k < rules.size(); ++k) {
    const std::string rat = at + "/rules/" + std::to_string(k);
    only_keys(rules[k], {"shape", "dependence", "rates"}, rat);
    TransitionRule r;
    r.shape = window_from_json(need(rules[k], "shape", rat), dim, rat + "/shape");
    r.dependence = window_from_json(need(rules[k], "dependence", rat), dim, rat + "/dependence");
    if (!r.shape.subset_of(r.dependence)) fail(rat + "/dependence", "must contain the shape");
    r.rates = table_from_json(need(rules[k], "rates", rat), rat + "/rates");
    const std::uint64_t want = checked_power(q, r.dependence.size() + r.shape.size());
    if (r.rates.size() != want)
      fail(rat + "/rates", "expected " + std::to_string(want) + " entries (contexts x targets), got " +
                               std::to_string(r.rates.size()));
    for (std::size_t m = 0; m < r.rates.size(); ++m) nonneg(r.rates[m], rat + "/rates/" + std::to_string(m));
    out.push_back(std::move(r));
  }
  try {
    return RateFamily(q, dim, std::move(out), j.value("name", std::string("custom")));
  } catch (const std::exception& e) {
    fail(at, e.what());
  }
}

DenseMeasure initial_measure(const json& r, const Torus& torus, int q, std::uint64_t seed, const std::string& at) {
  if (!r.is_object()) fail(at, "expected an object with a 'recipe'");
  const std::string recipe = text(need(r, "recipe", at), at + "/recipe");
  try {
    if (recipe == "uniform") {
      only_keys(r, {"recipe"}, at);
      return uniform_measure(torus, q);
    }
    if (recipe == "product") {
      only_keys(r, {"recipe", "p"}, at);
      auto p = table_from_json(need(r, "p", at), at + "/p");
      if (static_cast<int>(p.size()) != q) fail(at + "/p", "needs one probability per state");
      double s = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) s += nonneg(p[k], at + "/p/" + std::to_string(k));
      if (std::abs(s - 1.0) > 1e-12) fail(at + "/p", "probabilities must sum to 1");
      return product_measure(torus, p);
    }
    if (recipe == "point") {
      only_keys(r, {"recipe", "config"}, at);
      auto v = parse_config_string(text(need(r, "config", at), at + "/config"), q);
      if (v.size() != torus.site_count())
        fail(at + "/config", "has " + std::to_string(v.size()) + " sites, the torus has " +
                                 std::to_string(torus.site_count()));
      return point_measure(torus, q, v);
    }
    if (recipe == "random") {
      only_keys(r, {"recipe", "seed"}, at);
      std::uint64_t s = seed;
      if (r.contains("seed")) {
        long long v = integer(r["seed"], at + "/seed");
        if (v < 0) fail(at + "/seed", "must be >= 0");
        s = static_cast<std::uint64_t>(v);
      }
      return random_measure(torus, q, s);
    }
    if (recipe == "soften") {
      only_keys(r, {"recipe", "eps", "inner"}, at);
      double eps = number(r, "eps", at);
      if (!(eps > 0.0 && eps < 1.0)) fail(at + "/eps", "must lie in (0, 1)");
      return soften(initial_measure(need(r, "inner", at), torus, q, seed, at + "/inner"), eps);
    }
    if (recipe == "translation_average") {
      only_keys(r, {"recipe", "inner"}, at);
      return translation_average(initial_measure(need(r, "inner", at), torus, q, seed, at + "/inner"));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(at, e.what());
  }
  fail(at + "/recipe",
       "unknown recipe '" + recipe + "' (uniform, product, point, random, soften, translation_average)");
}

ExperimentConfig parse_config(const std::string& txt, const std::string& source) {
  ExperimentConfig c;
  c.source = source;
  c.text = txt;
  try {
    c.json = json::parse(txt);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t k = 0; k < std::min<std::size_t>(e.byte ? e.byte - 1 : 0, txt.size()); ++k) line += txt[k] == '\n';
    std::string what = e.what();
    auto cut = what.find("syntax error");
    throw ConfigError(source, "", line, "invalid JSON: " + (cut == std::string::npos ? what : what.substr(cut)));
  }
  Locator loc(txt);
  try {
    const json& j = c.json;
    if (!j.is_object()) fail("", "top level must be an object");
    only_keys(j, {"name", "model", "torus", "initial", "reference", "time", "windows", "suites", "jensen", "gtilde",
                  "box_n", "attractor", "expect", "seed", "output"},
              "");
    c.name = j.contains("name") ? text(j["name"], "/name") : std::string("experiment");

    const json& tj = need(j, "torus", "");
    if (!tj.is_array() || tj.empty()) fail("/torus", "expected an array of side lengths");
    std::vector<int> sides;
    for (std::size_t k = 0; k < tj.size(); ++k) {
      long long s = integer(tj[k], "/torus/" + std::to_string(k));
      if (s < 1 || s > 64) fail("/torus/" + std::to_string(k), "side must be in 1..64");
      sides.push_back(static_cast<int>(s));
    }
    c.torus = Torus(sides);
    const int dim = c.torus.dimension();

    const json& model = need(j, "model", "");
    only_keys(model, {"potential", "rates"}, "/model");
    c.potential = potential_from_json(need(model, "potential", "/model"), dim);
    c.rates = rates_from_json(need(model, "rates", "/model"), c.potential);
    try {
      require_fits(c.rates, c.torus);
      if (!c.torus.fits(c.potential.neighborhood())) fail("/torus", "torus too small for the potential range");
      checked_power(c.potential.q(), c.torus.site_count());
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail("/torus", e.what());
    }

    if (j.contains("seed")) {
      long long s = integer(j["seed"], "/seed");
      if (s < 0) fail("/seed", "must be >= 0");
      c.seed = static_cast<std::uint64_t>(s);
    }
    c.initial = j.contains("initial") ? j["initial"] : json{{"recipe", "uniform"}};
    initial_measure(c.initial, c.torus, c.potential.q(), c.seed);  // validate now

    if (j.contains("reference")) {
      std::string r = text(j["reference"], "/reference");
      if (r == "stationary") c.reference = Reference::stationary;
      else if (r == "gibbs") c.reference = Reference::gibbs;
      else fail("/reference", "expected 'stationary' or 'gibbs'");
    }

    if (j.contains("time")) {
      const json& t = j["time"];
      only_keys(t, {"t_end", "unit", "points"}, "/time");
      c.time.t_end = number(t, "t_end", "/time", 10.0);
      if (!(c.time.t_end > 0.0)) fail("/time/t_end", "must be > 0");
      if (t.contains("unit")) {
        std::string u = text(t["unit"], "/time/unit");
        if (u != "time" && u != "gap") fail("/time/unit", "expected 'time' or 'gap'");
        c.time.in_gap_units = u == "gap";
      }
      if (t.contains("points")) {
        long long p = integer(t["points"], "/time/points");
        if (p < 2 || p > 100000) fail("/time/points", "must be in 2..100000");
        c.time.points = static_cast<int>(p);
      }
    }

    if (j.contains("windows")) {
      const json& w = j["windows"];
      if (!w.is_array()) fail("/windows", "expected an array of windows");
      for (std::size_t k = 0; k < w.size(); ++k) {
        const std::string at = "/windows/" + std::to_string(k);
        Window win = window_from_json(w[k], dim, at);
        if (!c.torus.fits(win)) fail(at, "window wraps onto itself on this torus");
        c.windows.push_back(win);
      }
    }

    const json& s = need(j, "suites", "");
    if (!s.is_array() || s.empty()) fail("/suites", "expected a non-empty array of suite names");
    for (std::size_t k = 0; k < s.size(); ++k) {
      std::string name = text(s[k], "/suites/" + std::to_string(k));
      const auto& ks = known_suites();
      if (std::find(ks.begin(), ks.end(), name) == ks.end())
        fail("/suites/" + std::to_string(k), "unknown suite '" + name + "'");
      if (std::find(c.suites.begin(), c.suites.end(), name) != c.suites.end())
        fail("/suites/" + std::to_string(k), "suite listed twice");
      c.suites.push_back(name);
    }

    auto box_fits = [&](long long n, const std::string& at) {
      if (n < 1 || n > 6) fail(at, "box index must be in 1..6");
      if (!c.torus.fits(box(static_cast<int>(n), dim))) fail(at, "torus too small for this box");
      return static_cast<int>(n);
    };
    if (j.contains("jensen")) {
      only_keys(j["jensen"], {"n_max"}, "/jensen");
      c.jensen_n_max = box_fits(integer(need(j["jensen"], "n_max", "/jensen"), "/jensen/n_max"), "/jensen/n_max");
    }
    if (j.contains("gtilde")) {
      only_keys(j["gtilde"], {"n"}, "/gtilde");
      const json& n = need(j["gtilde"], "n", "/gtilde");
      if (!n.is_array() || n.empty()) fail("/gtilde/n", "expected a non-empty array");
      c.gtilde_n.clear();
      for (std::size_t k = 0; k < n.size(); ++k) {
        const std::string at = "/gtilde/n/" + std::to_string(k);
        c.gtilde_n.push_back(box_fits(integer(n[k], at), at));
      }
    }
    if (j.contains("box_n")) c.box_n = box_fits(integer(j["box_n"], "/box_n"), "/box_n");
    if (j.contains("attractor")) {
      only_keys(j["attractor"], {"gaps"}, "/attractor");
      c.attractor_gaps = table_from_json(need(j["attractor"], "gaps", "/attractor"), "/attractor/gaps");
      if (c.attractor_gaps.empty()) fail("/attractor/gaps", "expected at least one time");
      for (std::size_t k = 0; k < c.attractor_gaps.size(); ++k)
        if (!(c.attractor_gaps[k] > 0.0) || (k && c.attractor_gaps[k] <= c.attractor_gaps[k - 1]))
          fail("/attractor/gaps/" + std::to_string(k), "times must be positive and increasing");
    }
    if (j.contains("expect")) {
      only_keys(j["expect"], {"conditions"}, "/expect");
      if (j["expect"].contains("conditions")) {
        const json& e = j["expect"]["conditions"];
        if (!e.is_object()) fail("/expect/conditions", "expected an object of booleans");
        for (auto it = e.begin(); it != e.end(); ++it) {
          static const char* keys[] = {"finitely_many_types", "uniform_continuity", "no_traps", "min_rate",
                                       "irreducible",         "reversible",         "conserved"};
          if (std::find_if(std::begin(keys), std::end(keys), [&](const char* k) { return it.key() == k; }) ==
              std::end(keys))
            fail("/expect/conditions/" + it.key(), "unknown condition");
          if (!it->is_boolean()) fail("/expect/conditions/" + it.key(), "expected true or false");
        }
        c.expect_conditions = e;
      }
    }
    if (j.contains("output")) c.output = text(j["output"], "/output");
  } catch (const ConfigError& e) {
    throw ConfigError(source, e.field.empty() ? "/" : e.field, loc.line(e.field), e.message);
  }
  return c;
}

int config_line(const ExperimentConfig& config, const std::string& pointer) {
  return Locator(config.text).line(pointer);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "", 0, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace ipslab
