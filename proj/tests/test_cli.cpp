#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kbrw/commands.hpp"
#include "kbrw/config.hpp"
#include "kbrw/parallel.hpp"
#include "kbrw/stats.hpp"

using namespace kbrw;
using nlohmann::json;

namespace {

std::string config_dir() { return KBRW_CONFIG_DIR; }

int run_cli(const std::string& args, std::string* stdout_text = nullptr) {
  const auto out = std::filesystem::temp_directory_path() / "kbrw_cli_test.out";
  const std::string cmd = std::string(KBRW_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (stdout_text) {
    std::ifstream f(out);
    std::stringstream ss;
    ss << f.rdbuf();
    *stdout_text = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_temp(const std::string& name, const json& j) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << j.dump();
  return p.string();
}

}  // namespace

TEST_CASE("streams are keyed by (seed, index)") {
  Stream a = make_stream(1, 2), b = make_stream(1, 2), c = make_stream(1, 3), d = make_stream(2, 2);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  CHECK(mix64(0) != mix64(1));
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("x");
                  }),
                  std::runtime_error);
}

TEST_CASE("wilson interval and summaries") {
  const auto w = wilson_interval(0, 100);
  CHECK(w.low == 0.0);
  CHECK(w.high > 0.0);
  const auto m = wilson_interval(50, 100);
  CHECK(m.contains(0.5));
  CHECK(m.low == doctest::Approx(0.4038).epsilon(1e-3));
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = summarize(v);
  CHECK(s.mean == 2.5);
  CHECK(s.variance == doctest::Approx(5.0 / 3));
  CHECK(s.band(3).contains(2.5));
}

TEST_CASE("law schema round trip") {
  for (const auto& [name, law] : library_laws()) {
    INFO(name);
    const auto j = law_to_json(law);
    CHECK(law_to_json(parse_law(j)) == j);
  }
  CHECK_THROWS_AS(parse_law(json{{"type", "nope"}}), ValidationError);
  CHECK_THROWS_AS(parse_law(json{{"type", "binary_bernoulli"}}), ValidationError);
  CHECK_THROWS_AS(parse_config(json::array()), ValidationError);
}

TEST_CASE("config hash is stable and content sensitive") {
  const json a = {{"law", {{"type", "binary_bernoulli"}, {"p", 0.3}}}, {"seed", 1}};
  json b = a;
  b["seed"] = 2;
  CHECK(config_hash(a) == config_hash(parse_config(a).raw));
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("analyze reports the constants") {
  const auto cfg = parse_config(json{{"law", {{"type", "binary_bernoulli"}, {"p", 0.3}}}});
  const auto out = cmd_analyze(cfg, {});
  CHECK(out.csv.find("beta_V,2.05320") != std::string::npos);
  const double p0 = (2 - std::sqrt(3.0)) / 4;
  const auto cfg0 = parse_config(json{{"law", {{"type", "binary_bernoulli"}, {"p", p0}}}});
  const auto out0 = cmd_analyze(cfg0, {});
  CHECK(out0.csv.find("gamma,0.5") != std::string::npos);
  CHECK(out0.csv.find("aldous_rate,1.11146670") != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto good = config_dir() + "/p03.json";
  CHECK(run_cli("analyze --config " + good) == 0);
  CHECK(run_cli("analyze --config /nonexistent.json") == exit_code::validation);
  const auto perc = write_temp("kbrw_perc.json", {{"law", {{"type", "binary_bernoulli"}, {"p", 0.6}}}, {"seed", 1}});
  CHECK(run_cli("analyze --config " + perc) == exit_code::no_critical_point);
  CHECK(run_cli("pemantle --config " + perc) == exit_code::no_critical_point);
  const auto sub = write_temp(
      "kbrw_sub.json",
      {{"law", {{"type", "product"}, {"offspring", {{0, 0.6}, {2, 0.4}}}, {"step", {{"type", "discrete"}, {"atoms", {{0, 0.5}, {1, 0.5}}}}}}}});
  CHECK(run_cli("analyze --config " + sub) == exit_code::validation);
  const auto noseed = write_temp("kbrw_noseed.json", {{"law", {{"type", "binary_bernoulli"}, {"p", 0.3}}},
                                                      {"survival", {{"slopes", {0.1}}, {"depths", {4}}, {"replicates", 200}}}});
  CHECK(run_cli("survival --config " + noseed) == exit_code::validation);
  CHECK(run_cli("survival --config " + noseed + " --seed 3") == 0);
  const auto slow = write_temp("kbrw_slow.json", {{"law", {{"type", "binary_bernoulli"}, {"p", 0.3}}},
                                                  {"pemantle", {{"eps_u", {0.001}}, {"n_max", 400}}}});
  CHECK(run_cli("pemantle --config " + slow) == exit_code::budget);
  CHECK(run_cli("frobnicate --config " + good) == exit_code::validation);
}

TEST_CASE("survival CSV: header, oracle rows and monotone slopes") {
  std::string text;
  const auto cfg = write_temp("kbrw_surv.json", {{"law", {{"type", "binary_bernoulli"}, {"p", 0.3}}},
                                                 {"seed", 5},
                                                 {"survival", {{"slopes", {0.2, 0.1, 0.05}}, {"depths", {10}}, {"replicates", 5000}, {"escape_cap", "inf"}}}});
  REQUIRE(run_cli("survival --config " + cfg, &text) == 0);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# kbrw-csv/1 command=survival config_hash=", 0) == 0);
  CHECK(line.find("seed=5") != std::string::npos);
  std::getline(in, line);
  CHECK(line == "method,coordinate,slope,n,estimate,ci_low,ci_high,replicates,seed,cap_hits,runtime_ms");
  std::vector<double> oracle;
  int mc_rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 11);
    if (cells[0] == "oracle") oracle.push_back(std::stod(cells[4]));
    if (cells[0] == "mc") ++mc_rows;
  }
  CHECK(mc_rows == 3);
  REQUIRE(oracle.size() == 3);
  // rows sorted by slope ascending
  CHECK(oracle[0] < oracle[1]);
  CHECK(oracle[1] < oracle[2]);
}

TEST_CASE("non-lattice law drops the oracle rows with a warning") {
  const auto cfg = parse_config(json{{"law", {{"type", "product"}, {"offspring", {{1, 0.5}, {3, 0.5}}}, {"step", {{"type", "gaussian"}, {"mean", 0.0}, {"stddev", 1.0}}}}},
                                     {"seed", 2},
                                     {"survival", {{"slopes", {0.1}}, {"depths", {5}}, {"replicates", 500}}}});
  const auto out = cmd_survival(cfg, {});
  CHECK(out.warnings.size() == 1);
  CHECK(out.csv.find("oracle,") == std::string::npos);
  CHECK(out.csv.find("mc,") != std::string::npos);
}

TEST_CASE("pemantle table") {
  const auto cfg = parse_config(json{{"law", {{"type", "binary_bernoulli"}, {"p", 0.3}}}, {"pemantle", {{"eps_u", {0.02, 0.01}}}}});
  const auto out = cmd_pemantle(cfg, {});
  CHECK(out.csv.find("eps_U,eps_V,n_used,rho_oracle,sqrt_eps_times_log_rho,beta_target") != std::string::npos);
  CHECK(out.csv.find(",-1.24892510515") != std::string::npos);
  CHECK(out.csv.find("aldous_rate") == std::string::npos);
  const double p0 = (2 - std::sqrt(3.0)) / 4;
  const auto cfg0 = parse_config(json{{"law", {{"type", "binary_bernoulli"}, {"p", p0}}}, {"pemantle", {{"eps_u", {0.05}}}}});
  CHECK(cmd_pemantle(cfg0, {}).csv.find("# aldous_rate=1.1114667") != std::string::npos);
}

TEST_CASE("mogulskii schema: endpoint columns only when requested") {
  json j = {{"mogulskii", {{"family", {{"type", "lazy"}}}, {"corridor", {{"type", "constant"}, {"lower", -1}, {"upper", 1}}}, {"n_list", {1000}}}}};
  const auto plain = cmd_mogulskii(parse_config(j), {});
  CHECK(plain.csv.find("n,a_n,prob,scaled_log_prob,target_constant,gap,check\n") != std::string::npos);
  j["mogulskii"]["endpoint_b"] = 0.5;
  const auto ep = cmd_mogulskii(parse_config(j), {});
  CHECK(ep.csv.find("endpoint_prob") != std::string::npos);
  j["mogulskii"]["family"]["a_exponent"] = 0.7;
  CHECK_THROWS_AS(cmd_mogulskii(parse_config(j), {}), ValidationError);
}

TEST_CASE("stochastic commands are byte reproducible") {
  for (const char* cmd : {"survival", "spine-check", "gw-embed", "escape-sweep"}) {
    INFO(cmd);
    const auto cfg = write_temp("kbrw_det.json",
                                {{"law", {{"type", "binary_bernoulli"}, {"p", 0.3}}},
                                 {"seed", 11},
                                 {"survival", {{"slopes", {0.1}}, {"depths", {8}}, {"replicates", 2000}}},
                                 {"spine_check", {{"n", 3}, {"replicates", 2000}, {"functionals", {"one", "corridor:0.5"}}}},
                                 {"gw_embed", {{"n", 8}, {"L", 7}, {"replicates", 300}, {"m_replicates", 300}}},
                                 {"escape_sweep", {{"caps", {5, 50}}, {"slopes", {0.2}}, {"depths", {8}}, {"replicates", 1000}}}});
    std::string a, b, c;
    REQUIRE(run_cli(std::string(cmd) + " --config " + cfg, &a) == 0);
    REQUIRE(run_cli(std::string(cmd) + " --config " + cfg, &b) == 0);
    REQUIRE(run_cli(std::string(cmd) + " --config " + cfg + " --threads 3", &c) == 0);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(!a.empty());
  }
}
