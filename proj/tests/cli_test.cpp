#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "doctest.h"
#include "intrinsic/cli.hpp"
#include "intrinsic/io.hpp"
#include "json.hpp"

using namespace intrinsic;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "intrinsic");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("intrinsic_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = sha256_hex(read_file(e.path()));
  }
  return out;
}

/// Shared small dataset.
const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = scratch("dataset");
    const Result r = invoke({"--quiet", "--seed", "11", "synth", "--count", "3", "--size", "64", "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::string manifest() { return (dataset() / "manifest.json").string(); }

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(invoke({}).code == cli::kUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kUsage);
  CHECK(invoke({"synth", "--bogus"}).code == cli::kUsage);
  CHECK(invoke({"--format", "xml", "gradcheck"}).code == cli::kUsage);
  CHECK(invoke({"corrupt", "--manifest", "m.json", "--mode", "smear", "--out-dir", "x"}).code == cli::kUsage);
  CHECK(invoke({"solve", "--image", "a.png"}).code == cli::kUsage);
  CHECK(invoke({"discriminator"}).code == cli::kUsage);
  const Result help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("gradcheck") != std::string::npos);
  const Result bad = invoke({"--quiet", "solve", "--image", "a.png", "--out-r", "r.png", "--out-s", "s.png",
                          "--method", "energy"});
  CHECK(bad.code == cli::kUsage);
  CHECK(bad.err.rfind("error: ", 0) == 0);
  CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);
}

TEST_CASE("resolved configuration is echoed unless quiet") {
  const Result loud = invoke({"--seed", "4", "gradcheck", "--seeds", "1"});
  CHECK(loud.code == 0);
  CHECK(loud.err.find("seed=4") != std::string::npos);
  CHECK(loud.err.find("gradcheck.seeds=1") != std::string::npos);
  CHECK(loud.err.find("synth.") == std::string::npos);
  const Result quiet = invoke({"--quiet", "--seed", "4", "gradcheck", "--seeds", "1"});
  CHECK(quiet.err.empty());
  CHECK(quiet.out == loud.out);
}

TEST_CASE("gradcheck passes and fails on an injected fault") {
  const Result ok = invoke({"--quiet", "--format", "json", "gradcheck"});
  CHECK(ok.code == 0);
  const json j = json::parse(ok.out);
  REQUIRE(j.size() >= 10);
  for (const json& c : j) {
    CHECK(c["pass"] == true);
    CHECK(c["max_rel_err"].get<double>() < 1e-5);
    CHECK(c.contains("loss_name"));
  }
  const Result bad = invoke({"--quiet", "--format", "json", "gradcheck", "--inject-fault", "--seeds", "2"});
  CHECK(bad.code != 0);
  for (const json& c : json::parse(bad.out)) CHECK(c["pass"] == false);
}

TEST_CASE("synth output trees are reproducible") {
  const fs::path a = scratch("a"), b = scratch("b");
  CHECK(invoke({"--quiet", "--seed", "7", "synth", "--count", "3", "--size", "64", "--out", a.string()}).code == 0);
  CHECK(invoke({"--quiet", "--seed", "7", "--threads", "3", "synth", "--count", "3", "--size", "64", "--out",
             b.string()})
            .code == 0);
  CHECK(tree(a) == tree(b));
  CHECK(tree(a).size() == 22);
  const fs::path c = scratch("c");
  CHECK(invoke({"--quiet", "--seed", "8", "synth", "--count", "3", "--size", "64", "--out", c.string()}).code == 0);
  CHECK(tree(a) != tree(c));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("CI_THREADS is the fallback worker count") {
  const fs::path a = scratch("env");
  ::setenv("CI_THREADS", "2", 1);
  const Result r = invoke({"synth", "--count", "2", "--size", "64", "--out", a.string()});
  ::unsetenv("CI_THREADS");
  CHECK(r.code == 0);
  CHECK(tree(a).size() == 15);
  fs::remove_all(a);
}

TEST_CASE("evaluating ground truth gives perfect scores with fixed JSON keys") {
  const Result r = invoke({"--quiet", "--format", "json", "evaluate", "--manifest", manifest(), "--pred-dir",
                        dataset().string(), "--tau", "0.05"});
  REQUIRE(r.code == 0);
  const nlohmann::ordered_json j = nlohmann::ordered_json::parse(r.out);
  CHECK(j["f_r"].get<double>() >= 0.95);
  CHECK(j["f_s"].get<double>() >= 0.95);
  CHECK(j["region_error_r"].get<double>() <= 1e-4);
  CHECK(j["counts"]["images"] == 3);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"acc_r_es", "acc_r_er", "acc_s_er", "acc_s_es", "f_r", "f_s",
                                         "region_error_r", "region_error_s", "counts", "config"});
  const Result t = invoke({"--quiet", "evaluate", "--manifest", manifest(), "--pred-dir", dataset().string()});
  CHECK(t.out.find("Acc_R^(E_S) Acc_R^(E_R) Acc_S^(E_R) Acc_S^(E_S)") != std::string::npos);
  CHECK(t.out.find("aggregate") != std::string::npos);
}

TEST_CASE("solve and evaluate over a manifest") {
  const fs::path p1 = scratch("pred1"), p2 = scratch("pred2");
  for (const fs::path& p : {p1, p2}) {
    CHECK(invoke({"--quiet", "solve", "--manifest", manifest(), "--method", "edge-prior", "--out-dir", p.string()})
              .code == 0);
  }
  CHECK(tree(p1) == tree(p2));
  CHECK(tree(p1).size() == 6);
  const Result ep = invoke({"--quiet", "--format", "json", "evaluate", "--manifest", manifest(), "--pred-dir", p1.string()});
  REQUIRE(ep.code == 0);
  CHECK(invoke({"--quiet", "solve", "--manifest", manifest(), "--out-dir", p2.string()}).code == 0);
  const Result rt = invoke({"--quiet", "--format", "json", "evaluate", "--manifest", manifest(), "--pred-dir", p2.string()});
  REQUIRE(rt.code == 0);
  CHECK(json::parse(ep.out)["region_error_r"].get<double>() < json::parse(rt.out)["region_error_r"].get<double>());
  fs::remove_all(p1);
  fs::remove_all(p2);
  CHECK(invoke({"--quiet", "evaluate", "--manifest", manifest(), "--pred-dir", p1.string()}).code == cli::kData);
}

TEST_CASE("single-image solve checks the annotation") {
  const fs::path out = scratch("single");
  fs::create_directories(out);
  const std::string img = (dataset() / "scene_0000_i.png").string();
  const std::string good = (dataset() / "scene_0000_annotation.json").string();
  const std::string other = (dataset() / "scene_0001_annotation.json").string();
  const std::string r = (out / "r.png").string(), s = (out / "s.ciif").string();
  const Result ok = invoke({"--quiet", "--format", "json", "solve", "--image", img, "--method", "edge-prior",
                         "--annotation", good, "--out-r", r, "--out-s", s});
  REQUIRE(ok.code == 0);
  CHECK(json::parse(ok.out)["results"][0]["residual"].get<double>() <= 1e-3);
  CHECK(fs::exists(r));
  CHECK(fs::exists(s));
  const Result bad = invoke({"--quiet", "solve", "--image", img, "--method", "edge-prior", "--annotation", other,
                          "--out-r", r, "--out-s", s});
  CHECK(bad.code == cli::kData);
  CHECK(bad.err.find("image_hash") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("convergence failures exit with 3") {
  const fs::path out = scratch("conv");
  fs::create_directories(out);
  write_file(out / "cfg.json", std::string(R"({"cg_max_iterations": 1, "cg_tolerance": 1e-14})"));
  const Result r = invoke({"--quiet", "solve", "--image", (dataset() / "scene_0000_i.ciif").string(), "--config",
                        (out / "cfg.json").string(), "--out-r", (out / "r.png").string(), "--out-s",
                        (out / "s.png").string()});
  CHECK(r.code == cli::kConvergence);
  fs::remove_all(out);
}

TEST_CASE("discriminator training is deterministic and scores files") {
  const fs::path out = scratch("disc");
  fs::create_directories(out);
  const std::string m1 = (out / "m1.json").string(), m2 = (out / "m2.json").string();
  const Result a = invoke({"--quiet", "--seed", "3", "--format", "json", "discriminator", "train", "--manifest",
                        manifest(), "--holdout", "0", "--out", m1});
  REQUIRE(a.code == 0);
  CHECK(invoke({"--quiet", "--seed", "3", "discriminator", "train", "--manifest", manifest(), "--holdout", "0",
             "--out", m2})
            .code == 0);
  CHECK(read_file(m1) == read_file(m2));
  CHECK(json::parse(a.out)["heldout_accuracy"].is_null());
  CHECK(json::parse(a.out)["train_accuracy"].get<double>() == 1.0);
  const Result s = invoke({"--quiet", "--format", "json", "discriminator", "score", "--model", m1, "--image",
                        (dataset() / "scene_0000_s.ciif").string(), (dataset() / "scene_0000_i.ciif").string()});
  REQUIRE(s.code == 0);
  const json j = json::parse(s.out);
  REQUIRE(j.size() == 2);
  CHECK(j[0]["score"].get<double>() > 0.5);
  CHECK(j[1]["score"].get<double>() < 0.5);

  const fs::path pred = out / "energy";
  const Result e = invoke({"--quiet", "--format", "json", "solve", "--manifest", manifest(), "--method", "energy",
                        "--discriminator", m1, "--out-dir", pred.string()});
  REQUIRE(e.code == 0);
  CHECK(json::parse(e.out)["results"][0].contains("energy"));
  fs::remove_all(out);
}

TEST_CASE("corrupt writes planted artifacts") {
  const fs::path zero = scratch("beta0"), one = scratch("beta1");
  CHECK(invoke({"--quiet", "corrupt", "--manifest", manifest(), "--mode", "texture_copy", "--beta", "0", "--out-dir",
             zero.string()})
            .code == 0);
  for (const char* f : {"scene_0000_r.ciif", "scene_0002_s.ciif"}) {
    CHECK(read_file(zero / f) == read_file(dataset() / f));
  }
  CHECK(invoke({"--quiet", "corrupt", "--manifest", manifest(), "--mode", "texture_copy", "--beta", "1", "--out-dir",
             one.string()})
            .code == 0);
  const Result r = invoke({"--quiet", "--format", "json", "evaluate", "--manifest", manifest(), "--pred-dir", one.string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["acc_s_er"].get<double>() < 1.0);
  CHECK(invoke({"--quiet", "corrupt", "--manifest", manifest(), "--mode", "blur", "--beta", "2", "--out-dir",
             one.string()})
            .code == cli::kUsage);
  fs::remove_all(zero);
  fs::remove_all(one);
}

TEST_CASE("canny writes a mask and lists edges") {
  const fs::path out = scratch("canny");
  fs::create_directories(out);
  const Result r = invoke({"--quiet", "--format", "json", "canny", "--image", (dataset() / "scene_0000_i.png").string(),
                        "--sigma", "1", "--low", "0.01", "--high", "0.03", "--out", (out / "e.png").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["count"].get<std::size_t>() == j["edges"].size());
  const Image mask = load_raster(out / "e.png", Colorspace::linear);
  std::size_t on = 0;
  for (double v : mask.data()) on += v > 0.5;
  CHECK(on == j["count"].get<std::size_t>());
  fs::remove_all(out);
}
