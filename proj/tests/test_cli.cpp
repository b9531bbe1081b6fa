#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "art/cli.hpp"
#include "art/oracle.hpp"

using namespace art;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh scratch directory holding the monitor network and property.
struct Workspace {
  fs::path dir;

  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("art_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_network(monitor_network(), path("net.txt"));
    save_properties({monitor_property()}, path("property.json"));
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == exit_code::usage);
  CHECK(run({"frobnicate"}).code == exit_code::usage);
  CHECK(run({"certify", "--net", "x"}).code == exit_code::usage);
  CHECK(run({"demo", "--optimizer", "rmsprop"}).code == exit_code::usage);
  CHECK(run({"demo", "--lr", "-1"}).code == exit_code::usage);
  CHECK(run({"--help"}).code == exit_code::ok);
}

TEST_CASE("demo certifies the monitor network") {
  const Run r = run({"demo"});
  CHECK(r.code == exit_code::ok);
  CHECK(r.out.find("verdict: certified") != std::string::npos);
  CHECK(r.out.find("loss_d") != std::string::npos);
}

TEST_CASE("demo without refinement also certifies, more slowly") {
  const Run r = run({"demo", "--no-refine", "--quiet"});
  CHECK(r.code == exit_code::ok);
  CHECK(r.out.find("1 regions") != std::string::npos);
  CHECK(r.out.find("loss_d") == std::string::npos);
}

TEST_CASE("unsatisfiable demo exits with 1") {
  const Run r = run({"demo", "--unsatisfiable", "--quiet", "--max-epochs", "5", "--region-cap", "50"});
  CHECK(r.code == exit_code::not_certified);
  CHECK(r.out.find("epoch-budget-exhausted") != std::string::npos);
}

TEST_CASE("demo export writes loadable files") {
  Workspace ws("export");
  CHECK(run({"demo", "--quiet", "--export", ws.path("ex")}).code == exit_code::ok);
  CHECK(load_network(ws.path("ex/net.txt")).same_parameters(monitor_network()));
  CHECK(load_properties(ws.path("ex/property.json")).front().output == monitor_property().output);
}

TEST_CASE("init writes a network of the requested shape") {
  Workspace ws("init");
  CHECK(run({"init", "--dims", "3,5,2", "--out", ws.path("n.txt"), "--seed", "4"}).code == exit_code::ok);
  const Network net = load_network(ws.path("n.txt"));
  CHECK(net.input_dim() == 3);
  CHECK(net.output_dim() == 2);
  CHECK(net.num_layers() == 2);
  CHECK(run({"init", "--dims", "3", "--out", ws.path("m.txt")}).code == exit_code::usage);
  CHECK(run({"init", "--dims", "3,x", "--out", ws.path("m.txt")}).code == exit_code::usage);
  CHECK_FALSE(fs::exists(ws.path("m.txt")));
}

TEST_CASE("certify distinguishes certified, unknown and budget 0") {
  Workspace ws("certify");
  const Run unknown = run({"certify", "--net", ws.path("net.txt"), "--property", ws.path("property.json"),
                           "--budget", "50"});
  CHECK(unknown.code == exit_code::not_certified);
  CHECK(unknown.out.find("unknown") != std::string::npos);

  const Run zero = run({"certify", "--net", ws.path("net.txt"), "--property", ws.path("property.json"),
                        "--budget", "0"});
  CHECK(zero.code == exit_code::not_certified);
  CHECK(zero.out.find("after 0 splits") != std::string::npos);

  save_properties({{monitor_property().input, OutputPredicate::atom({1.0, 0.0}, 100.0)}}, ws.path("safe.json"));
  const Run ok = run({"certify", "--net", ws.path("net.txt"), "--property", ws.path("safe.json")});
  CHECK(ok.code == exit_code::ok);
  CHECK(ok.out.find("certified after 0 splits") != std::string::npos);
}

TEST_CASE("missing and malformed inputs exit with 2 and write nothing") {
  Workspace ws("missing");
  const Run r = run({"train", "--net", ws.path("absent.txt"), "--property", ws.path("property.json"), "--out",
                     ws.path("out.txt"), "--report", ws.path("rep")});
  CHECK(r.code == exit_code::usage);
  CHECK_FALSE(r.err.empty());
  CHECK_FALSE(fs::exists(ws.path("out.txt")));
  CHECK_FALSE(fs::exists(ws.path("rep.csv")));

  std::ofstream(ws.path("bad.json")) << "{ not json";
  CHECK(run({"certify", "--net", ws.path("net.txt"), "--property", ws.path("bad.json")}).code == exit_code::usage);

  save_properties({{Box({0.0}, {1.0}), OutputPredicate::atom({1.0}, 0.0)}}, ws.path("narrow.json"));
  const Run shape = run({"certify", "--net", ws.path("net.txt"), "--property", ws.path("narrow.json")});
  CHECK(shape.code == exit_code::usage);
  CHECK(shape.err.find("shape") != std::string::npos);
}

TEST_CASE("audit rejects zero samples") {
  Workspace ws("audit0");
  CHECK(run({"audit", "--net", ws.path("net.txt"), "--property", ws.path("property.json"), "--samples", "0"}).code ==
        exit_code::usage);
}

TEST_CASE("audit lists counterexamples of the untrained network") {
  Workspace ws("audit");
  const Run r = run({"audit", "--net", ws.path("net.txt"), "--property", ws.path("property.json"), "--samples",
                     "2000", "--seed", "3"});
  CHECK(r.code == exit_code::not_certified);
  CHECK(r.out.find("counterexample x=(") != std::string::npos);
  CHECK(r.out.find(" 0 interval-bound violations") != std::string::npos);
}

TEST_CASE("train certifies, writes reports and the audit then passes") {
  Workspace ws("train");
  const Run r = run({"train", "--net", ws.path("net.txt"), "--property", ws.path("property.json"), "--out",
                     ws.path("trained.txt"), "--report", ws.path("rep"), "--split-log", ws.path("splits.csv"),
                     "--optimizer", "sgd", "--lr", "0.01", "--max-epochs", "200"});
  CHECK(r.code == exit_code::ok);
  CHECK(slurp(ws.path("rep.csv")).rfind("# art-train-report v1\n", 0) == 0);
  CHECK(slurp(ws.path("rep.json")).find("\"certified\"") != std::string::npos);
  CHECK(slurp(ws.path("splits.csv")).rfind("region,parent,dim,midpoint\n", 0) == 0);

  const Run audit = run({"audit", "--net", ws.path("trained.txt"), "--property", ws.path("property.json"),
                         "--samples", "5000"});
  CHECK(audit.code == exit_code::ok);
  const Run cert = run({"certify", "--net", ws.path("trained.txt"), "--property", ws.path("property.json")});
  CHECK(cert.code == exit_code::ok);
}

TEST_CASE("gen-data and training on data") {
  Workspace ws("gen");
  REQUIRE(run({"init", "--dims", "2,6,2", "--out", ws.path("oracle.txt"), "--seed", "9"}).code == exit_code::ok);
  const Run g = run({"gen-data", "--oracle", ws.path("oracle.txt"), "--property", ws.path("property.json"), "--train",
                     "200", "--test", "50", "--train-out", ws.path("train.csv"), "--test-out", ws.path("test.csv")});
  CHECK(g.code == exit_code::ok);
  CHECK(load_dataset(ws.path("train.csv")).size() == 200);
  CHECK(load_dataset(ws.path("test.csv")).size() == 50);

  const Run t = run({"train", "--net", ws.path("net.txt"), "--property", ws.path("property.json"), "--data",
                     ws.path("train.csv"), "--out", ws.path("t.txt"), "--report", ws.path("rep"), "--max-epochs",
                     "3", "--eps-accuracy", "0"});
  CHECK(t.code == exit_code::not_certified);
  CHECK(t.out.find("training accuracy") != std::string::npos);
  CHECK(fs::exists(ws.path("t.txt")));
}
