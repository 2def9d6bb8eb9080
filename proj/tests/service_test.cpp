#include <chrono>
#include <future>
#include <map>
#include <random>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "intrinsic/annotation.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/metrics.hpp"
#include "intrinsic/service.hpp"
#include "intrinsic/synth.hpp"
#include "json.hpp"

using namespace intrinsic;
using namespace intrinsic::service;
using json = nlohmann::json;

namespace {

struct Fixture {
  synth::SynthScene scene;
  Bytes png;
  annotation::AnnotationDoc doc;
};

const Fixture& fixture(int size = 128) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  synth::SynthConfig c;
  c.size = size;
  Fixture f{synth::gen_scene(3, c), {}, {}};
  f.png = encode_png(f.scene.composite);
  f.doc = f.scene.annotation;
  f.doc.image.sha256 = sha256_hex(f.png);
  return cache.emplace(size, std::move(f)).first->second;
}

std::string solve_body(const Fixture& f, const annotation::AnnotationDoc& doc) {
  json j;
  j["image"] = base64_encode(f.png);
  j["annotation"] = json::parse(annotation::serialize(doc));
  return j.dump();
}

std::string evaluate_body(const Fixture& f, const annotation::AnnotationDoc& doc) {
  json j = json::parse(solve_body(f, doc));
  j["reflectance"] = base64_encode(encode_png(f.scene.reflectance));
  j["shading"] = base64_encode(encode_png(f.scene.shading));
  return j.dump();
}

json body_of(const Response& r) { return json::parse(r.body); }

}  // namespace

TEST_CASE("base64 round trip") {
  CHECK(base64_encode(Bytes{'f', 'o', 'o', 'b', 'a', 'r'}) == "Zm9vYmFy");
  CHECK(base64_encode(Bytes{'f', 'o'}) == "Zm8=");
  CHECK(base64_encode(Bytes{}).empty());
  std::mt19937_64 rng(2);
  for (std::size_t n = 0; n < 40; ++n) {
    Bytes b(n);
    for (auto& v : b) v = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(b)) == b);
  }
  CHECK_THROWS_AS(base64_decode("Zm9"), ParameterError);
  CHECK_THROWS_AS(base64_decode("Zm9v!mFy"), ParameterError);
  CHECK_THROWS_AS(base64_decode("Z=9v"), ParameterError);
}

TEST_CASE("health reports ok") {
  Handler h;
  const Response r = h.health();
  CHECK(r.status == 200);
  CHECK(body_of(r)["status"] == "ok");
  CHECK(body_of(r)["version"] == std::string(kVersion));
}

TEST_CASE("malformed requests are rejected with 400") {
  Handler h;
  CHECK(h.canny("{not json").status == 400);
  CHECK(h.canny("[1, 2]").status == 400);
  CHECK(h.canny("{}").status == 400);
  CHECK(h.canny(R"({"image": "@@@@"})").status == 400);
  CHECK(h.canny(R"({"image": "Zm9vYmFy"})").status == 400);
  const Fixture& f = fixture();
  json j = json::parse(solve_body(f, f.doc));
  j["annotation"]["schema_version"] = "9";
  CHECK(h.solve(j.dump()).status == 400);
  j = json::parse(solve_body(f, f.doc));
  j["config"] = {{"bogus", 1}};
  CHECK(h.solve(j.dump()).status == 400);
  j = json::parse(evaluate_body(f, f.doc));
  j["metrics"] = {{"tau", -1.0}};
  CHECK(h.evaluate(j.dump()).status == 400);
  j = json::parse(evaluate_body(f, f.doc));
  j["shading"] = base64_encode(encode_png(Image(8, 8, 1, 0.5)));
  CHECK(h.evaluate(j.dump()).status == 400);
  const json err = body_of(h.canny("{}"));
  CHECK(err.contains("error"));
  CHECK(err.contains("message"));
}

TEST_CASE("oversize images are rejected with 413") {
  ServiceConfig c;
  c.max_side = 64;
  Handler h(c);
  const Fixture& f = fixture();
  json j;
  j["image"] = base64_encode(f.png);
  CHECK(h.canny(j.dump()).status == 413);
  j["image"] = base64_encode(encode_png(Image(64, 64, 3, 0.5)));
  CHECK(h.canny(j.dump()).status == 200);
}

TEST_CASE("canny returns the edge set and an overlay") {
  Handler h;
  const Fixture& f = fixture();
  json req;
  req["image"] = base64_encode(f.png);
  req["canny"] = {{"sigma", 1.0}, {"low", 0.01}, {"high", 0.03}};
  const Response r = h.canny(req.dump());
  REQUIRE(r.status == 200);
  const json j = json::parse(r.body);
  const Image img = load_image(f.png, Colorspace::linear);
  const EdgeSet expect = canny(to_luminance(img), {1.0, 0.01, 0.03});
  CHECK(j["count"] == expect.count());
  REQUIRE(j["edges"].size() == expect.count());
  const auto px = expect.pixels();
  for (std::size_t k = 0; k < px.size(); ++k) {
    CHECK(j["edges"][k][0] == px[k].x);
    CHECK(j["edges"][k][1] == px[k].y);
  }
  const Image ov = load_image(base64_decode(j["overlay"].get<std::string>()), Colorspace::linear);
  CHECK(ov.width() == img.width());
  CHECK(ov.channels() == 3);
  CHECK(h.canny(req.dump()).body == r.body);
  req["canny"] = {{"radius", 2}};
  CHECK(h.canny(req.dump()).status == 400);
}

TEST_CASE("solve on a 256 pixel scene is fast and exact") {
  Handler h;
  const Fixture& f = fixture(256);
  const auto t0 = std::chrono::steady_clock::now();
  const Response r = h.solve(solve_body(f, f.doc));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(r.status == 200);
  CHECK(secs < 2.0);
  const json j = json::parse(r.body);
  CHECK(j["residual"].get<double>() <= 1e-3);
  const Image rs = load_image(base64_decode(j["reflectance"].get<std::string>()), Colorspace::linear);
  const Image ss = load_image(base64_decode(j["shading"].get<std::string>()), Colorspace::linear);
  CHECK(rs.channels() == 3);
  CHECK(ss.channels() == 1);
  CHECK(ss.width() == 256);
  CHECK(j["shading_exposure"].get<double>() <= 1.0);
  CHECK(r.body.find("/tmp") == std::string::npos);
}

TEST_CASE("invalid annotations are rejected with 422 and violations") {
  Handler h;
  const Fixture& f = fixture();
  annotation::AnnotationDoc bad = f.doc;
  bad.image.sha256 = std::string(64, '0');
  const Response r = h.evaluate(evaluate_body(f, bad));
  CHECK(r.status == 422);
  const json j = json::parse(r.body);
  REQUIRE(j["violations"].size() == 1);
  CHECK(j["violations"][0].contains("code"));
  CHECK(h.solve(solve_body(f, bad)).status == 422);

  bad = f.doc;
  bad.image.width += 1;
  CHECK(h.solve(solve_body(f, bad)).status == 422);
}

TEST_CASE("evaluate returns the metric report") {
  Handler h;
  const Fixture& f = fixture();
  const Response r = h.evaluate(evaluate_body(f, f.doc));
  REQUIRE(r.status == 200);
  const json j = json::parse(r.body);
  CHECK(j["f_r"].get<double>() >= 0.95);
  CHECK(j["f_s"].get<double>() >= 0.95);
  const Image img = load_image(f.png, Colorspace::linear);
  const Image rr = load_image(encode_png(f.scene.reflectance), Colorspace::linear);
  const Image ss = load_image(encode_png(f.scene.shading), Colorspace::linear);
  CHECK(r.body == metrics::to_json(metrics::evaluate(rr, ss, img, f.doc, {}), -1));
  const std::vector<std::string> keys{"acc_r_es", "acc_r_er", "acc_s_er", "acc_s_es", "f_r",
                                      "f_s", "region_error_r", "region_error_s", "counts", "config"};
  std::vector<std::string> got;
  const nlohmann::ordered_json ordered = nlohmann::ordered_json::parse(r.body);
  for (auto it = ordered.begin(); it != ordered.end(); ++it) got.push_back(it.key());
  CHECK(got == keys);
}

TEST_CASE("solver failures map to 500") {
  Handler h;
  const Fixture& f = fixture();
  json j = json::parse(solve_body(f, f.doc));
  j["config"] = {{"cg_max_iterations", 1}, {"cg_tolerance", 1e-14}};
  const Response r = h.solve(j.dump());
  CHECK(r.status == 500);
  CHECK(body_of(r)["error"] == "convergence");
  CHECK(body_of(r).contains("residual"));
}

TEST_CASE("concurrent and reordered requests give identical bodies") {
  ServiceConfig c;
  c.max_concurrent_solves = 2;
  Handler h(c);
  const Fixture& f = fixture();
  const std::string solve = solve_body(f, f.doc), eval = evaluate_body(f, f.doc);
  const std::string solo_solve = h.solve(solve).body, solo_eval = h.evaluate(eval).body;
  std::vector<std::future<std::string>> jobs;
  for (int k = 0; k < 6; ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      return k % 2 ? h.evaluate(eval).body : h.solve(solve).body;
    }));
  }
  for (int k = 0; k < 6; ++k) CHECK(jobs[k].get() == (k % 2 ? solo_eval : solo_solve));
}

TEST_CASE("http front end serves the endpoints with CORS") {
  ServiceConfig c;
  c.port = 0;
  c.threads = 2;
  c.max_body_bytes = 4 << 20;
  c.cors_origin = "http://ui.local";
  Server server(c);
  const int port = server.bind();
  std::thread t([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://ui.local");
  CHECK(health->get_header_value("Content-Type") == "application/json");
  CHECK(json::parse(health->body)["status"] == "ok");

  const Fixture& f = fixture();
  auto solved = cli.Post("/solve", solve_body(f, f.doc), "application/json");
  REQUIRE(solved);
  CHECK(solved->status == 200);
  CHECK(solved->body == Handler().solve(solve_body(f, f.doc)).body);
  CHECK(solved->has_header("Server-Timing"));

  auto bad = cli.Post("/canny", "{", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto big = cli.Post("/canny", std::string(5 << 20, 'x'), "application/json");
  REQUIRE(big);
  CHECK(big->status == 413);
  auto pre = cli.Options("/solve");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->has_header("Access-Control-Allow-Methods"));
  auto missing = cli.Get("/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  server.stop();
  t.join();
}
