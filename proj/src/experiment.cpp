#include "ipslab/experiment.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ipslab/entropy.hpp"
#include "ipslab/evolve.hpp"

namespace ipslab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 15];
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // no negative zero
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) out += (k ? "," : "") + csv_field(fields[k]);
  return out + "\r\n";
}

std::string csv_header_block(const Provenance& p) {
  return "# version: " + std::string(kArtifactVersion) + "\r\n# config_sha256: " + p.config_sha256 +
         "\r\n# seed: " + std::to_string(p.seed) + "\r\n# suite: " + p.suite + "\r\n";
}

json json_header(const Provenance& p) {
  return {{"version", kArtifactVersion}, {"config_sha256", p.config_sha256}, {"seed", p.seed}, {"suite", p.suite}};
}

bool RunResult::passed() const {
  for (const auto& s : suites)
    if (!s.passed) return false;
  return true;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp);
  }
  fs::rename(tmp, path);
}

namespace {

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

std::string fmt(double v) { return format_double(v); }

json window_json(const Window& w) {
  json a = json::array();
  for (const auto& p : w) a.push_back(p);
  return a;
}

// shared, read-only inputs of all suites
struct Context {
  const ExperimentConfig* cfg = nullptr;
  Provenance prov;
  DenseMeasure nu0;
  DenseMeasure nu_ti;  // translation average of nu0
  GeneratorMatrix g;
  DenseMeasure mu;     // reference measure for decay and attractor
  DenseMeasure gibbs;  // torus Gibbs measure of the potential
  std::optional<double> gap;
};

class Suite {
 public:
  Suite(const Context& ctx, std::string name) : ctx_(ctx) {
    res_.suite = std::move(name);
    prov_ = ctx.prov;
    prov_.suite = res_.suite;
  }
  void check(bool ok, const std::string& invariant, json witness) {
    if (ok) return;
    res_.passed = false;
    res_.failures.push_back({res_.suite, invariant, std::move(witness)});
  }
  void csv(const std::string& file, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::string s = csv_header_block(prov_) + csv_row(header);
    for (const auto& r : rows) s += csv_row(r);
    res_.files[file] = s;
  }
  void json_file(const std::string& file, json body) {
    body["header"] = json_header(prov_);
    res_.files[file] = body.dump(2) + "\n";
  }
  json& summary() { return res_.summary; }
  SuiteResult take() { return std::move(res_); }
  const Context& ctx() const { return ctx_; }

 private:
  const Context& ctx_;
  Provenance prov_;
  SuiteResult res_;
};

double gap_of(const Context& c) {
  if (!c.gap) throw std::logic_error("spectral gap not computed");
  return *c.gap;
}

void run_decay(Suite& s) {
  const auto& c = s.ctx();
  const auto& cfg = *c.cfg;
  const double t_end = cfg.time.in_gap_units ? cfg.time.t_end / gap_of(c) : cfg.time.t_end;
  auto tr = run_trajectory(c.nu0, cfg.rates, c.mu, linear_grid(t_end, cfg.time.points), cfg.windows);
  std::vector<std::string> header{"t", "h"};
  for (std::size_t k = 0; k < cfg.windows.size(); ++k) header.push_back("h_w" + std::to_string(k + 1));
  header.push_back("g");
  header.push_back("violation");
  std::vector<std::vector<std::string>> rows;
  double g_max = -INFINITY;
  for (std::size_t k = 0; k < tr.rows.size(); ++k) {
    const auto& r = tr.rows[k];
    std::vector<std::string> row{fmt(r.t), fmt(r.h)};
    for (double h : r.h_window) row.push_back(fmt(h));
    row.push_back(fmt(r.g));
    row.push_back(r.violation ? "1" : "0");
    rows.push_back(row);
    g_max = std::max(g_max, r.g);
    if (r.violation && k > 0)
      s.check(false, "relative entropy non-increasing",
              {{"t", r.t}, {"h", jnum(r.h)}, {"t_prev", tr.rows[k - 1].t}, {"h_prev", jnum(tr.rows[k - 1].h)}});
    s.check(r.g <= 1e-9, "entropy loss non-positive", {{"t", r.t}, {"g", jnum(r.g)}});
  }
  s.csv("decay.csv", header, rows);
  s.summary() = {{"monotone", tr.monotone},
                 {"t_end", t_end},
                 {"h_initial", jnum(tr.rows.front().h)},
                 {"h_final", jnum(tr.rows.back().h)},
                 {"g_max", jnum(g_max)}};
}

void run_decomposition(Suite& s) {
  const auto& c = s.ctx();
  const auto& cfg = *c.cfg;
  const double n = static_cast<double>(cfg.torus.site_count());
  auto parts = entropy_loss_parts(c.nu_ti, c.gibbs, cfg.rates, cfg.torus.all_sites());
  const double rho = specific_energy_loss(c.nu_ti, cfg.rates, cfg.potential);
  const double ent = specific_entropy_loss(c.nu_ti, cfg.rates);
  const double defect = std::abs(parts.total - (rho * n + parts.entropy));
  s.check(defect <= 1e-8, "loss equals energy part plus entropy part",
          {{"total", jnum(parts.total)}, {"rho", jnum(rho)}, {"sites", n}, {"entropy_part", jnum(parts.entropy)},
           {"defect", jnum(defect)}});
  s.csv("decomposition.csv", {"quantity", "value"},
        {{"total", fmt(parts.total)},
         {"entropy_part", fmt(parts.entropy)},
         {"energy_part", fmt(parts.energy)},
         {"rho", fmt(rho)},
         {"specific_entropy_loss", fmt(ent)},
         {"defect", fmt(defect)}});
  s.summary() = {{"defect", jnum(defect)}, {"rho", jnum(rho)}};
}

void run_jensen(Suite& s) {
  const auto& c = s.ctx();
  auto seq = jensen_monotone_sequence(c.nu_ti, c.cfg->rates, c.cfg->jensen_n_max);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto& st = seq[k];
    rows.push_back({std::to_string(st.n), fmt(st.f), fmt(st.prefactor), fmt(st.normalized), st.holds ? "1" : "0"});
    if (!st.holds && k > 0)
      s.check(false, "normalized f_n non-increasing",
              {{"n", st.n}, {"normalized", jnum(st.normalized)}, {"previous", jnum(seq[k - 1].normalized)}});
  }
  s.csv("jensen.csv", {"n", "f", "prefactor", "normalized_f", "holds"}, rows);
  json vals = json::array();
  for (const auto& st : seq) vals.push_back(jnum(st.normalized));
  s.summary() = {{"normalized_f", vals}};
}

void run_gtilde(Suite& s) {
  const auto& c = s.ctx();
  const auto& cfg = *c.cfg;
  const int d = cfg.torus.dimension();
  const double delta = non_nullness_constant(c.nu0);
  std::vector<std::vector<std::string>> rows;
  for (int n : cfg.gtilde_n) {
    const double vol = static_cast<double>(box_volume(n, d));
    const double gt = g_tilde(c.nu0, cfg.rates, n);
    const double w = window_entropy_loss(c.nu0, cfg.rates, box(n, d)) / vol;
    const double bound = gtilde_boundary_bound(cfg.rates, n);
    const double slack = gt - (w - bound);
    rows.push_back({std::to_string(n), fmt(gt), fmt(w), fmt(bound), fmt(slack)});
    if (delta > 0.0)
      s.check(slack >= -1e-9, "g_tilde above window loss minus boundary bound",
              {{"n", n}, {"g_tilde", jnum(gt)}, {"window_loss_per_site", jnum(w)}, {"bound", jnum(bound)}});
  }
  s.csv("gtilde.csv", {"n", "g_tilde", "window_loss_per_site", "boundary_bound", "slack"}, rows);
  s.summary() = {{"non_null", delta > 0.0}, {"delta", jnum(delta)}};
}

void run_reversible(Suite& s) {
  const auto& c = s.ctx();
  const auto& cfg = *c.cfg;
  const double db = detailed_balance_defect(cfg.rates, cfg.potential, cfg.torus);
  s.check(db <= 1e-12, "detailed balance", {{"defect", jnum(db)}});
  auto rd = reversible_decomposition(c.nu_ti, cfg.rates, cfg.potential, cfg.box_n);
  s.check(rd.identity_defect <= 1e-8, "r_rev + rho = 0",
          {{"r_rev", jnum(rd.r_rev)}, {"rho", jnum(rd.rho)}, {"defect", jnum(rd.identity_defect)}});
  s.csv("reversible.csv", {"n", "s_rev", "r_rev", "rho", "identity_defect", "detailed_balance_defect"},
        {{std::to_string(cfg.box_n), fmt(rd.s_rev), fmt(rd.r_rev), fmt(rd.rho), fmt(rd.identity_defect), fmt(db)}});
  s.summary() = {{"identity_defect", jnum(rd.identity_defect)}, {"detailed_balance_defect", jnum(db)}};
}

void run_attractor(Suite& s) {
  const auto& c = s.ctx();
  const auto& cfg = *c.cfg;
  const double gap = gap_of(c);
  auto schedule = growing_windows(cfg.torus);
  std::vector<std::vector<std::string>> rows;
  double prev = INFINITY, last = INFINITY;
  for (double k : cfg.attractor_gaps) {
    auto nu_t = evolve(c.nu_ti, c.g, k / gap);
    const double wd = weak_distance(nu_t, c.mu, schedule);
    rows.push_back({fmt(k), fmt(k / gap), fmt(wd), fmt(total_variation(nu_t, c.mu))});
    s.check(wd <= prev + 1e-12, "weak distance decreasing", {{"t_gap", k}, {"distance", jnum(wd)}, {"previous", jnum(prev)}});
    prev = last = wd;
  }
  s.check(last <= 1e-5, "weak distance at the last time", {{"distance", jnum(last)}, {"tolerance", 1e-5}});
  s.csv("attractor.csv", {"t_gap", "t", "weak_distance", "total_variation"}, rows);
  s.summary() = {{"final_weak_distance", jnum(last)}, {"gap", gap}};
}

json check_json(const Check& c) { return {{"holds", c.holds}, {"detail", c.detail}}; }

void run_conditions(Suite& s) {
  const auto& c = s.ctx();
  const auto& cfg = *c.cfg;
  auto rep = check_conditions(cfg.rates);
  const double db = detailed_balance_defect(cfg.rates, cfg.potential, cfg.torus);
  std::map<std::string, bool> flat{{"finitely_many_types", rep.finitely_many_types.holds},
                                   {"uniform_continuity", rep.uniform_continuity.holds},
                                   {"no_traps", rep.no_traps.holds},
                                   {"min_rate", rep.min_rate.holds},
                                   {"irreducible", rep.irreducible.holds},
                                   {"reversible", db <= 1e-12},
                                   {"conserved", rep.conserved.has_value()}};
  json body = {{"finitely_many_types", check_json(rep.finitely_many_types)},
               {"uniform_continuity", check_json(rep.uniform_continuity)},
               {"no_traps", check_json(rep.no_traps)},
               {"min_rate", check_json(rep.min_rate)},
               {"irreducible", check_json(rep.irreducible)},
               {"reversible", {{"holds", db <= 1e-12}, {"detailed_balance_defect", jnum(db)}}},
               {"conserved", rep.conserved ? json(*rep.conserved) : json(nullptr)},
               {"min_rate_value", jnum(rep.min_rate_value)},
               {"report", flat}};
  if (cfg.expect_conditions)
    for (auto it = cfg.expect_conditions->begin(); it != cfg.expect_conditions->end(); ++it) {
      const bool want = it->get<bool>(), got = flat.at(it.key());
      s.check(want == got, "condition " + it.key(), {{"expected", want}, {"found", got}, {"report", body[it.key()]}});
    }
  s.json_file("conditions.json", body);
  s.summary() = flat;
}

SuiteResult run_suite(const Context& ctx, const std::string& name) {
  Suite s(ctx, name);
  try {
    if (name == "decay") run_decay(s);
    else if (name == "decomposition") run_decomposition(s);
    else if (name == "jensen") run_jensen(s);
    else if (name == "gtilde") run_gtilde(s);
    else if (name == "reversible") run_reversible(s);
    else if (name == "attractor") run_attractor(s);
    else if (name == "conditions") run_conditions(s);
    else throw std::logic_error("unknown suite " + name);
  } catch (const std::exception& e) {
    s.check(false, "suite preconditions", {{"error", e.what()}});
  }
  return s.take();
}

bool needs(const ExperimentConfig& c, const char* suite) {
  return std::find(c.suites.begin(), c.suites.end(), suite) != c.suites.end();
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  Context ctx;
  ctx.cfg = &cfg;
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);
  ctx.prov = {sha256_hex(cfg.text), seed, ""};
  const int q = cfg.potential.q();
  ctx.nu0 = initial_measure(cfg.initial, cfg.torus, q, seed);
  ctx.nu_ti = is_translation_invariant(ctx.nu0) ? ctx.nu0 : translation_average(ctx.nu0);
  ctx.gibbs = torus_gibbs(cfg.potential, cfg.torus);
  const bool dynamic = needs(cfg, "decay") || needs(cfg, "attractor");
  if (dynamic) {
    ctx.g = generator_matrix(cfg.rates, cfg.torus);
    if (cfg.reference == Reference::gibbs) {
      ctx.mu = ctx.gibbs;
    } else {
      try {
        ctx.mu = stationary_measure(ctx.g);
      } catch (const StationaryError& e) {
        throw ConfigError(cfg.source, "/reference", config_line(cfg, "/reference"),
                          std::string(e.what()) + "; use \"reference\": \"gibbs\" or a different model");
      }
    }
    if (needs(cfg, "attractor") || (needs(cfg, "decay") && cfg.time.in_gap_units)) {
      try {
        ctx.gap = spectral_gap(ctx.g);
      } catch (const std::exception& e) {
        throw ConfigError(cfg.source, "/torus", config_line(cfg, "/torus"), e.what());
      }
      if (!std::isfinite(*ctx.gap) || *ctx.gap <= 0.0)
        throw ConfigError(cfg.source, "/time", config_line(cfg, "/time"), "generator has no positive spectral gap");
    }
  }

  RunResult out;
  out.out_dir = opt.out.value_or(cfg.output);
  out.suites.resize(cfg.suites.size());
  const int workers = std::max(1, std::min<int>(opt.threads, static_cast<int>(cfg.suites.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < cfg.suites.size(); ++k) out.suites[k] = run_suite(ctx, cfg.suites[k]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next++) < cfg.suites.size();) out.suites[k] = run_suite(ctx, cfg.suites[k]);
      });
    for (auto& t : pool) t.join();
  }

  fs::create_directories(out.out_dir);
  json failures = json::array(), suites = json::array();
  for (const auto& s : out.suites) {
    json files = json::array();
    for (const auto& [name, body] : s.files) {
      write_file_atomic((fs::path(out.out_dir) / name).string(), body);
      files.push_back(name);
    }
    for (const auto& f : s.failures)
      failures.push_back({{"suite", f.suite}, {"invariant", f.invariant}, {"witness", f.witness}});
    suites.push_back({{"suite", s.suite}, {"passed", s.passed}, {"files", files}, {"summary", s.summary}});
  }
  Provenance p = ctx.prov;
  p.suite = "run";
  json windows = json::array();
  for (const auto& w : cfg.windows) windows.push_back(window_json(w));
  json manifest = {{"header", json_header(p)},
                   {"name", cfg.name},
                   {"torus", cfg.torus.sides()},
                   {"q", q},
                   {"potential", cfg.potential.name()},
                   {"rates", cfg.rates.name()},
                   {"windows", windows},
                   {"suites", suites},
                   {"passed", out.passed()}};
  write_file_atomic((fs::path(out.out_dir) / "failures.json").string(),
                    json({{"header", json_header(p)}, {"failures", failures}}).dump(2) + "\n");
  write_file_atomic((fs::path(out.out_dir) / "run.json").string(), manifest.dump(2) + "\n");
  return out;
}

int cmd_run(const std::string& path, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  RunResult r;
  try {
    auto cfg = load_config(path);
    r = run_experiment(cfg, opt);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  for (const auto& s : r.suites) {
    log << (s.passed ? "PASS " : "FAIL ") << s.suite << "\n";
    for (const auto& f : s.failures) err << "FAIL " << f.suite << ": " << f.invariant << ": " << f.witness.dump() << "\n";
  }
  log << "wrote " << r.out_dir << "\n";
  return r.passed() ? kExitPass : kExitFail;
}

namespace {

struct Table {
  std::vector<std::string> comments;  // header block lines without the leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') out.back() += line[++k];
      else if (ch == '"') quoted = false;
      else out.back() += ch;
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  return out;
}

Table read_table(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error(p.string() + ": cannot read");
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') t.comments.push_back(line.substr(1));
    else if (t.header.empty()) t.header = split_csv(line);
    else t.rows.push_back(split_csv(line));
  }
  if (t.header.empty()) throw std::runtime_error(p.string() + ": no header row");
  return t;
}

std::size_t column(const Table& t, const std::string& name, const fs::path& p) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw std::runtime_error(p.string() + ": missing column " + name);
  return static_cast<std::size_t>(it - t.header.begin());
}

std::string relabel(const Table& t, const std::string& suite) {
  std::string out;
  for (const auto& c : t.comments) out += "#" + (c.rfind(" suite:", 0) == 0 ? " suite: " + suite : c) + "\r\n";
  return out;
}

std::string narrow(const Table& t, const std::vector<std::string>& cols, const fs::path& p, const std::string& suite) {
  std::vector<std::size_t> idx;
  for (const auto& c : cols) idx.push_back(column(t, c, p));
  std::string s = relabel(t, suite) + csv_row(cols);
  for (const auto& r : t.rows) {
    std::vector<std::string> f;
    for (auto k : idx) f.push_back(k < r.size() ? r[k] : "");
    s += csv_row(f);
  }
  return s;
}

// one row per (key, quantity)
std::string tidy(const Table& t, const std::string& key, const std::vector<std::string>& skip, const fs::path& p,
                 const std::string& suite) {
  const std::size_t k0 = column(t, key, p);
  std::string s = relabel(t, suite) + csv_row({key, "quantity", "value"});
  for (const auto& r : t.rows)
    for (std::size_t k = 0; k < t.header.size() && k < r.size(); ++k) {
      if (k == k0 || std::find(skip.begin(), skip.end(), t.header[k]) != skip.end()) continue;
      s += csv_row({r[k0], t.header[k], r[k]});
    }
  return s;
}

}  // namespace

int cmd_emit_plots(const std::string& run_dir, const std::optional<std::string>& out, std::ostream& log,
                   std::ostream& err) {
  const fs::path dir(run_dir);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    err << "emit-plots: " << run_dir << ": not a directory\n";
    return kExitConfig;
  }
  const fs::path dest = out ? fs::path(*out) : dir / "plots";
  std::map<std::string, std::string> files;
  try {
    if (fs::exists(dir / "decay.csv")) {
      auto t = read_table(dir / "decay.csv");
      files["decay.csv"] = narrow(t, {"t", "h", "g"}, dir / "decay.csv", "plots:decay");
      files["decay_long.csv"] = tidy(t, "t", {"violation"}, dir / "decay.csv", "plots:decay");
    }
    if (fs::exists(dir / "jensen.csv")) {
      auto t = read_table(dir / "jensen.csv");
      files["jensen.csv"] = narrow(t, {"n", "normalized_f"}, dir / "jensen.csv", "plots:jensen");
      files["jensen_long.csv"] = tidy(t, "n", {"holds"}, dir / "jensen.csv", "plots:jensen");
    }
    if (fs::exists(dir / "attractor.csv")) {
      auto t = read_table(dir / "attractor.csv");
      files["attractor_long.csv"] = tidy(t, "t", {"t_gap"}, dir / "attractor.csv", "plots:attractor");
    }
  } catch (const std::exception& e) {
    err << "emit-plots: " << e.what() << "\n";
    return kExitConfig;
  }
  if (files.empty()) {
    err << "emit-plots: " << run_dir << ": no run artifacts (decay.csv, jensen.csv or attractor.csv)\n";
    return kExitConfig;
  }
  fs::create_directories(dest);
  for (const auto& [name, body] : files) {
    write_file_atomic((dest / name).string(), body);
    log << "wrote " << (dest / name).string() << "\n";
  }
  return kExitPass;
}

}  // namespace ipslab
