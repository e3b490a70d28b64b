#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ipslab/acceptance.hpp"
#include "ipslab/experiment.hpp"

using namespace ipslab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("ipslab-test-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

// first line that is not part of the '#' header block
std::string column_line(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line.back() == '\r' ? line.substr(0, line.size() - 1) : line;
  return "";
}

const char* kSmall = R"({
  "model": {"potential": {"builtin": "ising", "beta": 0.5},
            "rates": {"builtin": "glauber_heat_bath"}},
  "torus": [4],
  "suites": ["decay"]
})";

}  // namespace

TEST_CASE("doubles round-trip through their text form") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    auto s = format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("csv quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_row({"x", "y,z"}) == "x,\"y,z\"\r\n");
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config diagnostics name the line and field") {
  SUBCASE("malformed json") {
    try {
      parse_config("{\n  \"torus\": [4,\n}\n", "x.json");
      FAIL("no error");
    } catch (const ConfigError& e) {
      CHECK(e.line == 3);
      CHECK(e.source == "x.json");
    }
  }
  SUBCASE("unknown builtin") {
    std::string text = kSmall;
    text.replace(text.find("glauber_heat_bath"), 17, "glauber");
    try {
      parse_config(text, "x.json");
      FAIL("no error");
    } catch (const ConfigError& e) {
      CHECK(e.field == "/model/rates/builtin");
      CHECK(e.line == 3);
    }
  }
  SUBCASE("epsilon outside (0, 1)") {
    std::string text = kSmall;
    text.replace(text.find("\"suites\""), 0, "\"initial\": {\"recipe\": \"soften\", \"eps\": 1, \"inner\": {\"recipe\": \"uniform\"}},\n  ");
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
  SUBCASE("window must fit the torus") {
    std::string text = kSmall;
    text.replace(text.find("\"suites\""), 0, "\"windows\": [[[0], [4]]],\n  ");
    try {
      parse_config(text);
      FAIL("no error");
    } catch (const ConfigError& e) {
      CHECK(e.field == "/windows/0");
      CHECK(e.line == 5);
    }
  }
  SUBCASE("unknown suite and unknown key") {
    std::string text = kSmall;
    text.replace(text.find("\"decay\""), 7, "\"decoy\"");
    CHECK_THROWS_AS(parse_config(text), ConfigError);
    std::string extra = kSmall;
    extra.replace(extra.find("\"suites\""), 0, "\"sead\": 3,\n  ");
    CHECK_THROWS_AS(parse_config(extra), ConfigError);
  }
  SUBCASE("alphabet mismatch between potential and rates table") {
    CHECK_THROWS_AS(parse_config(R"({"model": {"potential": {"builtin": "zero", "q": 2},
      "rates": {"rules": [{"shape": [[0]], "dependence": [[0]], "rates": [0, 1, 1]}]}},
      "torus": [3], "suites": ["conditions"]})"),
                    ConfigError);
  }
}

TEST_CASE("inline tables match the builtins") {
  auto c = parse_config(R"({"model": {
      "potential": {"q": 2, "terms": [{"shape": [[0], [1]], "table": [-0.5, 0.5, 0.5, -0.5]}]},
      "rates": {"builtin": "glauber_heat_bath"}},
    "torus": [5], "suites": ["conditions"]})");
  auto a = torus_gibbs(c.potential, c.torus), b = torus_gibbs(ising_potential(0.5), c.torus);
  CHECK(total_variation(a, b) <= 1e-15);
}

TEST_CASE("run exit codes") {
  TempDir dir("exit");
  std::ostringstream log, err;
  RunOptions opt;
  opt.out = (dir.path / "out").string();

  spit(dir.path / "ok.json", kSmall);
  CHECK(cmd_run((dir.path / "ok.json").string(), opt, log, err) == kExitPass);
  CHECK(fs::exists(dir.path / "out" / "decay.csv"));
  CHECK(column_line(slurp(dir.path / "out" / "decay.csv")) == "t,h,g,violation");

  spit(dir.path / "bad.json", "{ \"torus\": }");
  CHECK(cmd_run((dir.path / "bad.json").string(), opt, log, err) == kExitConfig);
  CHECK(cmd_run((dir.path / "absent.json").string(), opt, log, err) == kExitConfig);

  // the clock is not reversible: an expectation saying otherwise fails the run
  spit(dir.path / "wrong.json", R"({"model": {"potential": {"builtin": "zero", "q": 3},
    "rates": {"builtin": "cyclic_clock", "forward": 1}}, "torus": [3], "suites": ["conditions"],
    "expect": {"conditions": {"reversible": true}}})");
  err.str("");
  CHECK(cmd_run((dir.path / "wrong.json").string(), opt, log, err) == kExitFail);
  CHECK(err.str().find("condition reversible") != std::string::npos);
  CHECK(slurp(dir.path / "out" / "failures.json").find("\"expected\": true") != std::string::npos);

  // several closed classes and a stationary reference cannot be resolved
  spit(dir.path / "ssep.json", R"({"model": {"potential": {"builtin": "zero"},
    "rates": {"builtin": "exclusion", "p_right": 1, "p_left": 1}}, "torus": [4], "suites": ["decay"]})");
  CHECK(cmd_run((dir.path / "ssep.json").string(), opt, log, err) == kExitConfig);
}

TEST_CASE("clock conditions report") {
  TempDir dir("clock");
  auto cfg = parse_config(R"({"model": {"potential": {"builtin": "zero", "q": 3},
    "rates": {"builtin": "cyclic_clock", "forward": 1}}, "torus": [3], "suites": ["conditions"]})");
  RunOptions opt;
  opt.out = dir.path.string();
  auto r = run_experiment(cfg, opt);
  REQUIRE(r.suites.size() == 1);
  const auto& s = r.suites[0].summary;
  CHECK(s["no_traps"] == true);
  CHECK(s["reversible"] == false);
  CHECK(s["irreducible"] == true);
}

TEST_CASE("emit-plots") {
  TempDir dir("plots");
  std::ostringstream log, err;
  auto cfg = parse_config(canonical_glauber_config());
  RunOptions opt;
  opt.out = (dir.path / "run").string();
  REQUIRE(run_experiment(cfg, opt).passed());
  CHECK(cmd_emit_plots(opt.out.value(), std::nullopt, log, err) == kExitPass);
  const auto plots = dir.path / "run" / "plots";
  CHECK(column_line(slurp(plots / "decay.csv")) == "t,h,g");
  CHECK(column_line(slurp(plots / "jensen.csv")) == "n,normalized_f");
  CHECK(column_line(slurp(plots / "decay_long.csv")) == "t,quantity,value");
  CHECK(slurp(plots / "decay.csv").rfind("# version: ", 0) == 0);

  fs::create_directories(dir.path / "empty");
  err.str("");
  CHECK(cmd_emit_plots((dir.path / "empty").string(), std::nullopt, log, err) == kExitConfig);
  CHECK(err.str().find((dir.path / "empty").string()) != std::string::npos);
  CHECK(cmd_emit_plots((dir.path / "nope").string(), std::nullopt, log, err) == kExitConfig);
}

TEST_CASE("same seed gives identical files, another seed does not") {
  TempDir dir("seed");
  auto cfg = parse_config(canonical_glauber_config());
  RunOptions a, b, c;
  a.out = (dir.path / "a").string();
  b.out = (dir.path / "b").string();
  c.out = (dir.path / "c").string();
  b.threads = 4;
  c.seed = 99;
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  run_experiment(cfg, c);
  for (const char* f : {"decay.csv", "jensen.csv", "gtilde.csv", "run.json", "conditions.json"})
    CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
  CHECK(slurp(dir.path / "a" / "decay.csv") != slurp(dir.path / "c" / "decay.csv"));
}

TEST_CASE("shipped configs run and pass") {
  TempDir dir("configs");
  std::ostringstream log, err;
  int count = 0;
  for (const auto& e : fs::directory_iterator(IPSLAB_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    ++count;
    RunOptions opt;
    opt.out = (dir.path / e.path().stem()).string();
    CHECK_MESSAGE(cmd_run(e.path().string(), opt, log, err) == kExitPass, std::string(e.path().string() + ": " + err.str()));
  }
  CHECK(count >= 6);
  // the canonical text and the shipped file are the same experiment
  CHECK(parse_config(slurp(fs::path(IPSLAB_CONFIG_DIR) / "glauber_ising.json")).json ==
        parse_config(canonical_glauber_config()).json);
}
