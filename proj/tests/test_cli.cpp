#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "test_support.hpp"

using nlohmann::json;

namespace {

const std::filesystem::path kDir = "/tmp/calibdr_cli_tests";

// runs the installed binary through the shell; returns the process exit code
int run_cli(const std::string& args, const std::string& stdout_path,
            const std::string& stderr_path = "") {
  std::filesystem::create_directories(kDir);
  std::string cmd = "env -u CALIBDR_THREADS " CALIBDR_CLI_PATH " " + args;
  cmd += " > " + stdout_path;
  cmd += stderr_path.empty() ? " 2>&1" : " 2> " + stderr_path;
  const int status = std::system(cmd.c_str());
  if (status < 0 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string synth_csv(int n, int p, std::uint64_t seed) {
  std::filesystem::create_directories(kDir);
  testsupport::SynthData synth = testsupport::make_synth(n, p, seed);
  const std::string path = (kDir / ("synth_" + std::to_string(seed) + ".csv")).string();
  testsupport::write_csv(synth.data, path);
  return path;
}

}  // namespace

TEST_CASE("fit command emits a parseable model document") {
  const std::string csv = synth_csv(160, 6, 77);
  const std::string out = (kDir / "fit.json").string();
  const std::string args = "fit --data " + csv +
                           " --x-cols 'x*' --loss cal-ps --arm treated"
                           " --grid pow2:5 --cv-folds 3 --seed 7";
  REQUIRE(run_cli(args, out) == 0);
  json doc = json::parse(slurp(out));
  CHECK(doc["command"] == "fit");
  CHECK(doc["n"] == 160);
  REQUIRE(doc["fits"].is_array());
  const json& fit = doc["fits"][0];
  CHECK(fit["loss"].is_string());
  CHECK(fit["lambda_selected"].get<double>() > 0.0);
  CHECK(fit["converged"].get<bool>());
  CHECK(fit["cv"]["grid"].size() == 5);
  CHECK(fit["cv"]["selected_index"].get<int>() >= 0);
  CHECK(doc["coefficients"].is_object());
  CHECK(!doc["coefficients"].empty());
  CHECK(doc["balance_max"].get<double>() >= 0.0);
  CHECK(doc["balance_max"].get<double>() <=
        fit["lambda_selected"].get<double>() + 1e-6);

  // --out writes the same bytes the first run printed
  const std::string out2 = (kDir / "fit2.json").string();
  const std::string log = (kDir / "fit2.log").string();
  REQUIRE(run_cli(args + " --out " + out2, log) == 0);
  CHECK(slurp(out2) == slurp(out));
}

TEST_CASE("fixed penalty above lambda_max keeps the model empty") {
  const std::string csv = synth_csv(120, 4, 13);
  const std::string out = (kDir / "flat.json").string();
  REQUIRE(run_cli("fit --data " + csv + " --x-cols 'x*' --loss ml-ps --lambda 1e9",
                  out) == 0);
  json doc = json::parse(slurp(out));
  CHECK(doc["fits"][0]["active_set_size"] == 0);
  CHECK(!doc["fits"][0].contains("cv"));
}

TEST_CASE("estimate command reports the interval pieces and influence values") {
  const std::string csv = synth_csv(200, 6, 31);
  const std::string out = (kDir / "est.json").string();
  const std::string args = "estimate --data " + csv +
                           " --x-cols 'x*' --method rcal-rwl --target mu1"
                           " --link identity --grid pow2:5 --cv-folds 3 --seed 3"
                           " --dump-influence";
  REQUIRE(run_cli(args, out) == 0);
  json doc = json::parse(slurp(out));
  CHECK(doc["command"] == "estimate");
  CHECK(doc["method"] == "rcal-rwl");
  REQUIRE(doc["estimates"].is_array());
  REQUIRE(doc["estimates"].size() == 1);
  const json& est = doc["estimates"][0];
  CHECK(est["target"] == "mu1");
  CHECK(est["point"].is_number());
  CHECK(est["se"].get<double>() > 0.0);
  REQUIRE(est["ci"].size() == 2);
  CHECK(est["ci"][0].get<double>() < est["point"].get<double>());
  CHECK(est["ci"][1].get<double>() > est["point"].get<double>());
  CHECK(doc["boundedness"] == "pass");
  CHECK(doc["balance_max"].get<double>() >= 0.0);
  CHECK(doc["influence"].size() == 200);

  bool saw_ps = false, saw_or = false;
  for (const json& f : doc["fits"]) {
    saw_ps = saw_ps || f["role"] == "ps.treated";
    saw_or = saw_or || f["role"] == "or.treated";
  }
  CHECK(saw_ps);
  CHECK(saw_or);
}

TEST_CASE("estimate covers the difference and treated-on-treated contrasts") {
  const std::string csv = synth_csv(200, 5, 41);
  const std::string out = (kDir / "ate.json").string();
  REQUIRE(run_cli("estimate --data " + csv +
                      " --x-cols 'x*' --method rcal-rwl --target ate"
                      " --link identity --grid pow2:5 --cv-folds 3 --seed 5",
                  out) == 0);
  json ate = json::parse(slurp(out));
  CHECK(ate["estimates"].size() == 3);  // mu1, mu0, ate

  const std::string out2 = (kDir / "att.json").string();
  REQUIRE(run_cli("estimate --data " + csv +
                      " --x-cols 'x*' --method rcal-rwl --target att"
                      " --link identity --grid pow2:5 --cv-folds 3 --seed 5",
                  out2) == 0);
  json att = json::parse(slurp(out2));
  bool saw_att = false;
  for (const json& e : att["estimates"]) saw_att = saw_att || e["target"] == "att";
  CHECK(saw_att);
}

TEST_CASE("input problems exit with code 2") {
  const std::string csv = synth_csv(80, 3, 53);
  const std::string log = (kDir / "err.log").string();
  CHECK(run_cli("fit --data " + csv + " --x-cols 'x*' --loss ml-ps --y-col nope",
                log) == 2);
  CHECK(run_cli("estimate --data " + csv + " --x-cols 'x*' --method bogus --target mu1",
                log) == 2);
  CHECK(run_cli("fit --x-cols 'x*' --loss ml-ps", log) == 2);
  CHECK(run_cli("fit --data /tmp/calibdr_none.csv --x-cols 'x*' --loss ml-ps", log) == 2);
  CHECK(run_cli("estimate --data " + csv + " --x-cols 'x*' --method ipw-rml --target att",
                log) == 2);  // att needs an augmented method
}

TEST_CASE("simulation reports are byte-identical across worker counts") {
  const std::string a = (kDir / "sim_a.json").string();
  const std::string b = (kDir / "sim_b.json").string();
  const std::string ca = (kDir / "sim_a.csv").string();
  const std::string cb = (kDir / "sim_b.csv").string();
  const std::string log = (kDir / "sim.log").string();
  const std::string base =
      "simulate --scenario C1 --outcome-config 1 --n 100 --p 5 --reps 3 --seed 11"
      " --methods rcal.rwl,rml.rml --grid pow2:4 --cv-folds 3";
  REQUIRE(run_cli(base + " --workers 1 --out " + a + " --tstats-csv " + ca, log) == 0);
  REQUIRE(run_cli(base + " --workers 2 --out " + b + " --tstats-csv " + cb, log) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(ca) == slurp(cb));

  json doc = json::parse(slurp(a));
  CHECK(doc["command"] == "simulate");
  CHECK(doc["scenario"] == "C1");
  CHECK(doc["reps"] == 3);
  CHECK(!doc.contains("workers"));
  REQUIRE(doc["methods"].size() == 2);
  for (const json& m : doc["methods"]) {
    CHECK(m.contains("bias"));
    CHECK(m.contains("cov90"));
    CHECK(m["n_success"].get<int>() + m["nonconverged"].get<int>() == 3);
  }

  std::istringstream csv(slurp(ca));
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "method,t_stat");
}

TEST_CASE("verification battery passes clean and trips on an injected fault") {
  const std::string out = (kDir / "check.json").string();
  REQUIRE(run_cli("check --quick --seed 5", out) == 0);
  const std::string text = slurp(out);
  CHECK(text.find("PASS") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
  CHECK(text.find("all checks passed") != std::string::npos);

  const std::string out2 = (kDir / "check_fault.json").string();
  CHECK(run_cli("check --quick --seed 5 --inject-gradient-fault ml_ps", out2) == 1);
  const std::string text2 = slurp(out2);
  CHECK(text2.find("FAIL") != std::string::npos);
  CHECK(text2.find("ml_ps") != std::string::npos);
}
