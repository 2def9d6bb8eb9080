#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <random>
#include <thread>

#include "CLI11.hpp"
#include "intrinsic/annotation.hpp"
#include "intrinsic/cli.hpp"
#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/gradcheck.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/io.hpp"
#include "intrinsic/metrics.hpp"
#include "intrinsic/service.hpp"
#include "intrinsic/synth.hpp"
#include "json.hpp"

namespace intrinsic::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// Flag combination the parser cannot express.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  bool quiet = false;
  std::string format = "table";
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CI_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs f(0..n-1) on up to `threads` workers; rethrows the lowest-index error.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(threads));
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string read_text(const fs::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

Colorspace colorspace_of(const std::string& s) { return s == "srgb" ? Colorspace::srgb : Colorspace::linear; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void emit(std::ostream& out, const Globals& g, const ojson& j, const std::string& table) {
  if (g.format == "json") out << j.dump(2) << "\n";
  else out << table;
}

/// Image, annotation and the hash its document is checked against.
struct Sample {
  std::string name;
  Image image;
  annotation::AnnotationDoc doc;
  std::string sha256;
  synth::SceneFiles files;
};

std::string scene_name(const synth::SceneFiles& f) {
  std::string stem = fs::path(f.annotation).filename().string();
  const std::string suffix = "_annotation.json";
  if (stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
    stem.resize(stem.size() - suffix.size());
  }
  return stem;
}

std::vector<Sample> load_samples(const fs::path& manifest_path, int threads) {
  const synth::Manifest m = synth::load_manifest(manifest_path);
  std::vector<Sample> out(m.scenes.size());
  parallel_for(out.size(), threads, [&](std::size_t k) {
    const synth::SceneFiles& f = m.scenes[k];
    Sample& s = out[k];
    s.name = scene_name(f);
    s.files = f;
    s.image = load_raster(f.i, Colorspace::linear);
    s.doc = annotation::parse(read_text(f.annotation));
    if (!f.i_png.empty()) s.sha256 = sha256_hex(read_file(f.i_png));
  });
  return out;
}

Sample load_single(const fs::path& image, const std::string& annotation_path, Colorspace cs) {
  Sample s;
  s.name = image.stem().string();
  s.image = load_raster(image, cs);
  if (image.extension() != ".ciif") s.sha256 = sha256_hex(read_file(image));
  if (!annotation_path.empty()) {
    s.doc = annotation::parse(read_text(annotation_path));
  } else {
    s.doc = annotation::empty_doc({image.filename().string(), s.image.width(), s.image.height(), s.sha256});
  }
  return s;
}

void require_valid(const Sample& s) {
  const auto vs = annotation::validate(s.doc, s.image, s.sha256);
  if (vs.empty()) return;
  std::string msg = s.name + ": " + std::to_string(vs.size()) + " annotation violation(s); first: " + vs[0].code;
  if (vs[0].pixel) msg += " at (" + std::to_string(vs[0].pixel->x) + ", " + std::to_string(vs[0].pixel->y) + ")";
  msg += ": " + vs[0].message;
  throw ValidationError(msg);
}

/// Prediction stored under the ground-truth file name, CIIF preferred.
Image load_prediction(const fs::path& dir, const std::string& gt_file) {
  fs::path p = dir / fs::path(gt_file).filename();
  if (!fs::exists(p)) {
    fs::path alt = p;
    alt.replace_extension(".png");
    if (!fs::exists(alt)) throw IoError("missing prediction " + p.string());
    p = alt;
  }
  return load_raster(p, Colorspace::linear);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::size_t count = 10;
  int size = 128;
  std::string out = "synth";
  std::string config;
  std::string pattern = "mixed";
  int max_attempts = 10;
  double amplitude = 1.0;
};

int cmd_synth(const SynthArgs& a, const CLI::App& sub, const Globals& g, std::ostream& out, std::ostream& err) {
  synth::SynthConfig c = a.config.empty() ? synth::SynthConfig{} : synth::synth_config_from_json(read_text(a.config));
  if (sub.count("--size")) c.size = a.size;
  if (sub.count("--pattern")) c.pattern = synth::pattern_from_string(a.pattern);
  if (sub.count("--max-attempts")) c.max_attempts = a.max_attempts;
  if (sub.count("--amplitude")) c.wrinkle_amplitude = a.amplitude;
  c.check();
  if (!g.quiet) err << "resolved synth config " << synth::to_json(c) << "\n";
  const synth::Manifest m = synth::gen_dataset(a.count, a.out, g.seed, c, resolve_threads(g.threads));
  ojson j;
  j["scenes"] = m.scenes.size();
  j["base_seed"] = g.seed;
  j["out"] = a.out;
  emit(out, g, j, "wrote " + std::to_string(m.scenes.size()) + " scenes to " + a.out + "\n");
  return kOk;
}

// ---------------------------------------------------------------- canny

struct CannyArgs {
  std::string image;
  double sigma = CannyParams{}.sigma;
  double low = CannyParams{}.low;
  double high = CannyParams{}.high;
  std::string colorspace = "linear";
  std::string out;
  std::string overlay;
};

int cmd_canny(const CannyArgs& a, const Globals& g, std::ostream& out) {
  const Image img = load_raster(a.image, colorspace_of(a.colorspace));
  const CannyParams p{a.sigma, a.low, a.high};
  const EdgeSet e = canny(to_luminance(img), p);
  if (!a.out.empty()) {
    Image mask(img.width(), img.height(), 1);
    for (std::size_t i : e.indices()) mask[i] = 1.0;
    save_raster(a.out, mask);
  }
  if (!a.overlay.empty()) {
    const Image lum = to_luminance(img);
    Image ov(img.width(), img.height(), 3);
    for (std::size_t i = 0; i < lum.size(); ++i) {
      const double v = e.contains_index(i) ? 1.0 : 0.6 * std::clamp(lum[i], 0.0, 1.0);
      ov[3 * i] = v;
      ov[3 * i + 1] = v;
      ov[3 * i + 2] = e.contains_index(i) ? 0.0 : v;
    }
    save_raster(a.overlay, ov);
  }
  ojson j;
  j["width"] = img.width();
  j["height"] = img.height();
  j["canny"] = {{"sigma", p.sigma}, {"low", p.low}, {"high", p.high}};
  j["count"] = e.count();
  ojson px = ojson::array();
  for (const Pixel& q : e.pixels()) px.push_back(ojson::array({q.x, q.y}));
  j["edges"] = std::move(px);
  emit(out, g, j,
       std::to_string(e.count()) + " edge pixels in " + std::to_string(img.width()) + "x" +
           std::to_string(img.height()) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string image;
  std::string manifest;
  std::string method = "retinex";
  std::string annotation;
  std::string discriminator;
  std::string out_r;
  std::string out_s;
  std::string out_dir;
  std::string config;
  std::string colorspace = "linear";
};

ojson terms_json(const decompose::EnergyTerms& t) {
  ojson j;
  j["reconstruction"] = t.reconstruction;
  j["adversarial"] = t.adversarial;
  j["grad_constraint"] = t.grad_constraint;
  j["smoothness"] = t.smoothness;
  j["total"] = t.total;
  return j;
}

int cmd_solve(const SolveArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  if (a.image.empty() == a.manifest.empty()) throw UsageError("solve needs exactly one of --image or --manifest");
  if (!a.manifest.empty() && a.out_dir.empty()) throw UsageError("solve --manifest needs --out-dir");
  if (!a.image.empty() && (a.out_r.empty() || a.out_s.empty())) throw UsageError("solve --image needs --out-r and --out-s");
  if (a.method == "edge-prior" && !a.image.empty() && a.annotation.empty()) {
    throw UsageError("--method edge-prior needs --annotation");
  }
  if (a.method == "energy" && a.discriminator.empty()) throw UsageError("--method energy needs --discriminator");
  const decompose::SolverConfig cfg =
      a.config.empty() ? decompose::SolverConfig{} : decompose::solver_config_from_json(read_text(a.config));
  if (!g.quiet) err << "resolved solver config " << decompose::to_json(cfg) << "\n";
  std::optional<decompose::DiscriminatorModel> critic;
  if (!a.discriminator.empty()) critic = decompose::DiscriminatorModel::from_json(read_text(a.discriminator));

  std::vector<Sample> samples;
  if (!a.manifest.empty()) samples = load_samples(a.manifest, resolve_threads(g.threads));
  else samples.push_back(load_single(a.image, a.annotation, colorspace_of(a.colorspace)));

  std::vector<ojson> rows(samples.size());
  parallel_for(samples.size(), a.manifest.empty() ? 1 : resolve_threads(g.threads), [&](std::size_t k) {
    const Sample& s = samples[k];
    decompose::Decomposition d;
    if (a.method == "retinex") {
      d = decompose::retinex_decompose(s.image, cfg);
    } else if (a.method == "edge-prior") {
      require_valid(s);
      d = decompose::edge_prior_decompose(s.image, s.doc, cfg);
    } else {
      d = decompose::energy_decompose(s.image, *critic, cfg);
    }
    if (a.manifest.empty()) {
      save_raster(a.out_r, d.reflectance);
      save_raster(a.out_s, d.shading);
    } else {
      fs::create_directories(a.out_dir);
      save_raster(fs::path(a.out_dir) / fs::path(s.files.r).filename(), d.reflectance);
      save_raster(fs::path(a.out_dir) / fs::path(s.files.s).filename(), d.shading);
    }
    ojson j;
    j["name"] = s.name;
    j["width"] = s.image.width();
    j["height"] = s.image.height();
    j["residual"] = d.residual;
    if (critic) j["energy"] = terms_json(decompose::energy_terms(s.image, d.reflectance, d.shading, *critic, cfg));
    rows[k] = std::move(j);
  });

  ojson j;
  j["method"] = a.method;
  j["results"] = rows;
  std::string table;
  for (const ojson& r : rows) table += r["name"].get<std::string>() + "  residual " + fmt("%.3e", r["residual"]) + "\n";
  emit(out, g, j, table);
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string image;
  std::string annotation;
  std::string pred_r;
  std::string pred_s;
  std::string manifest;
  std::string pred_dir;
  std::string colorspace = "linear";
  metrics::MetricConfig metric;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out) {
  a.metric.check();
  const bool batch = !a.manifest.empty();
  if (batch == !a.image.empty()) throw UsageError("evaluate needs exactly one of --image or --manifest");
  if (batch && a.pred_dir.empty()) throw UsageError("evaluate --manifest needs --pred-dir");
  if (!batch && (a.annotation.empty() || a.pred_r.empty() || a.pred_s.empty())) {
    throw UsageError("evaluate --image needs --annotation, --pred-r and --pred-s");
  }
  std::vector<Sample> samples;
  if (batch) samples = load_samples(a.manifest, resolve_threads(g.threads));
  else samples.push_back(load_single(a.image, a.annotation, colorspace_of(a.colorspace)));

  std::vector<metrics::MetricReport> reports(samples.size());
  parallel_for(samples.size(), resolve_threads(g.threads), [&](std::size_t k) {
    const Sample& s = samples[k];
    require_valid(s);
    const Image r = batch ? load_prediction(a.pred_dir, s.files.r) : load_raster(a.pred_r, Colorspace::linear);
    const Image sh = batch ? load_prediction(a.pred_dir, s.files.s) : load_raster(a.pred_s, Colorspace::linear);
    reports[k] = metrics::evaluate(r, sh, s.image, s.doc, a.metric);
  });
  const metrics::MetricReport total = batch ? metrics::aggregate(reports) : reports[0];
  if (g.format == "json") {
    out << metrics::to_json(total) << "\n";
  } else {
    out << metrics::table_header() << "\n";
    for (std::size_t k = 0; k < reports.size(); ++k) out << metrics::table_row(reports[k], samples[k].name) << "\n";
    if (batch) out << metrics::table_row(total, "aggregate") << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  gradcheck::SuiteOptions suite;
  bool inject_fault = false;
};

int cmd_gradcheck(GradcheckArgs a, const Globals& g, std::ostream& out) {
  int size = a.suite.width;
  a.suite.height = size;
  a.suite.fd.seed = g.seed;
  if (a.inject_fault) a.suite.fault_scale = 1.01;
  const auto results = gradcheck::run_suite(a.suite);
  bool ok = true;
  std::string table;
  for (const auto& r : results) {
    ok = ok && r.pass;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-22s %12.3e  %s\n", r.loss_name.c_str(), r.max_rel_err, r.pass ? "PASS" : "FAIL");
    table += buf;
  }
  if (g.format == "json") out << gradcheck::to_json(results) << "\n";
  else out << table;
  return ok ? kOk : kData;
}

// ---------------------------------------------------------------- discriminator

struct TrainArgs {
  std::string manifest;
  std::string negatives_manifest;
  std::vector<std::string> generated;
  double holdout = 0.2;
  decompose::TrainOptions train;
  std::string out;
};

std::pair<std::vector<Image>, std::vector<Image>> split(std::vector<Image> v, double holdout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(v.size()) * (1.0 - holdout)));
  std::vector<Image> test(std::make_move_iterator(v.begin() + static_cast<std::ptrdiff_t>(n_train)),
                          std::make_move_iterator(v.end()));
  v.resize(n_train);
  return {std::move(v), std::move(test)};
}

double accuracy(const decompose::DiscriminatorModel& m, const std::vector<Image>& pos, const std::vector<Image>& neg) {
  std::size_t right = 0;
  for (const Image& s : pos) right += m.score(s) >= 0.5;
  for (const Image& s : neg) right += m.score(s) < 0.5;
  return static_cast<double>(right) / static_cast<double>(pos.size() + neg.size());
}

int cmd_train(TrainArgs a, const Globals& g, std::ostream& out) {
  if (!(a.holdout >= 0.0 && a.holdout < 1.0)) throw ParameterError("--holdout must be in [0, 1)");
  const int threads = resolve_threads(g.threads);
  const synth::Manifest pm = synth::load_manifest(a.manifest);
  const synth::Manifest nm = a.negatives_manifest.empty() ? pm : synth::load_manifest(a.negatives_manifest);
  std::vector<Image> pos(pm.scenes.size()), textured(nm.scenes.size()), generated(a.generated.size());
  parallel_for(pos.size(), threads, [&](std::size_t k) { pos[k] = load_raster(pm.scenes[k].s, Colorspace::linear); });
  parallel_for(textured.size(), threads,
               [&](std::size_t k) { textured[k] = to_luminance(load_raster(nm.scenes[k].i, Colorspace::linear)); });
  parallel_for(generated.size(), threads,
               [&](std::size_t k) { generated[k] = to_luminance(load_raster(a.generated[k], Colorspace::linear)); });
  std::vector<Image> neg =
      generated.empty() ? std::move(textured) : decompose::mix_negatives(textured, generated, textured.size(), g.seed);
  auto [pos_train, pos_test] = split(std::move(pos), a.holdout, g.seed);
  auto [neg_train, neg_test] = split(std::move(neg), a.holdout, g.seed + 1);
  a.train.seed = g.seed;
  const decompose::DiscriminatorModel m = decompose::discriminator_train(pos_train, neg_train, a.train);
  write_file(a.out, m.to_json());
  ojson j;
  j["positives"] = pos_train.size();
  j["negatives"] = neg_train.size();
  j["heldout_positives"] = pos_test.size();
  j["heldout_negatives"] = neg_test.size();
  j["final_loss"] = m.final_loss;
  j["train_accuracy"] = accuracy(m, pos_train, neg_train);
  const bool has_test = !pos_test.empty() || !neg_test.empty();
  j["heldout_accuracy"] = has_test ? ojson(accuracy(m, pos_test, neg_test)) : ojson();
  std::string table = "trained on " + std::to_string(pos_train.size()) + "+" + std::to_string(neg_train.size()) +
                      ", train accuracy " + fmt("%.4f", j["train_accuracy"]);
  if (has_test) table += ", held-out accuracy " + fmt("%.4f", j["heldout_accuracy"]);
  emit(out, g, j, table + "\n");
  return kOk;
}

struct ScoreArgs {
  std::string model;
  std::vector<std::string> images;
};

int cmd_score(const ScoreArgs& a, const Globals& g, std::ostream& out) {
  const decompose::DiscriminatorModel m = decompose::DiscriminatorModel::from_json(read_text(a.model));
  ojson arr = ojson::array();
  std::string table;
  for (const std::string& p : a.images) {
    const Image s = to_luminance(load_raster(p, Colorspace::linear));
    const losses::CriticOutput o = m.evaluate(s, false);
    ojson j;
    j["image"] = p;
    j["logit"] = static_cast<double>(o.logit);
    j["score"] = m.score(s);
    table += p + "  " + fmt("%.6f", j["score"]) + "\n";
    arr.push_back(std::move(j));
  }
  emit(out, g, arr, table);
  return kOk;
}

// ---------------------------------------------------------------- corrupt

struct CorruptArgs {
  std::string manifest;
  std::string mode;
  double beta = 0.5;
  std::string out_dir;
};

int cmd_corrupt(const CorruptArgs& a, const Globals& g, std::ostream& out) {
  const synth::Corruption mode = synth::corruption_from_string(a.mode);
  if (!(a.beta >= 0.0 && a.beta <= 1.0)) throw ParameterError("--beta must be in [0, 1]");
  const synth::Manifest m = synth::load_manifest(a.manifest);
  fs::create_directories(a.out_dir);
  parallel_for(m.scenes.size(), resolve_threads(g.threads), [&](std::size_t k) {
    const synth::SceneFiles& f = m.scenes[k];
    synth::SynthScene sc;
    sc.reflectance = load_raster(f.r, Colorspace::linear);
    sc.shading = load_raster(f.s, Colorspace::linear);
    sc.composite = load_raster(f.i, Colorspace::linear);
    const auto [r, s] = synth::corrupt(sc, mode, a.beta);
    save_raster(fs::path(a.out_dir) / fs::path(f.r).filename(), r);
    save_raster(fs::path(a.out_dir) / fs::path(f.s).filename(), s);
  });
  ojson j;
  j["mode"] = synth::to_string(mode);
  j["beta"] = a.beta;
  j["scenes"] = m.scenes.size();
  emit(out, g, j, "corrupted " + std::to_string(m.scenes.size()) + " scenes (" + j["mode"].get<std::string>() +
                      ", beta " + fmt("%g", a.beta) + ")\n");
  return kOk;
}

// ---------------------------------------------------------------- serve

int cmd_serve(service::ServiceConfig c, const Globals& g, std::ostream& err) {
  c.threads = resolve_threads(g.threads);
  service::Server server(c);
  const int port = server.bind();
  if (!g.quiet) err << "listening on " << c.host << ":" << port << "\n";
  server.listen();
  return kOk;
}

/// "name=value" for every option of `app` and of its selected subcommands.
void echo_config(const CLI::App& app, const std::string& prefix, std::ostream& err) {
  for (const CLI::Option* o : app.get_options()) {
    if (o->get_name() == "--help" || o->get_lnames().empty()) continue;
    std::string value;
    if (o->count() > 0) {
      for (const std::string& r : o->results()) value += (value.empty() ? "" : " ") + r;
    } else {
      value = o->get_default_str();
    }
    err << prefix << o->get_lnames()[0] << "=" << value << "\n";
  }
  for (const CLI::App* sub : app.get_subcommands()) echo_config(*sub, prefix + sub->get_name() + ".", err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Intrinsic image decomposition toolkit"};
  app.name(args.empty() ? "intrinsic" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: CI_THREADS or hardware)")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Do not echo the resolved configuration");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "table"}))->capture_default_str();

  const auto colorspaces = CLI::IsMember({"linear", "srgb"});

  SynthArgs sy;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--count", sy.count, "Number of scenes")->capture_default_str();
  synth_cmd->add_option("--size", sy.size, "Scene side in pixels")->capture_default_str();
  synth_cmd->add_option("--out", sy.out, "Output directory")->capture_default_str();
  synth_cmd->add_option("--config", sy.config, "SynthConfig JSON file");
  synth_cmd->add_option("--pattern", sy.pattern, "stripes, checks, dots, blocks, flat or mixed")->capture_default_str();
  synth_cmd->add_option("--max-attempts", sy.max_attempts, "Regeneration attempts per scene")->capture_default_str();
  synth_cmd->add_option("--amplitude", sy.amplitude, "Wrinkle amplitude scale")->capture_default_str();

  CannyArgs ca;
  CLI::App* canny_cmd = app.add_subcommand("canny", "Detect Canny edges");
  canny_cmd->add_option("--image", ca.image, "Input raster")->required();
  canny_cmd->add_option("--sigma", ca.sigma)->capture_default_str();
  canny_cmd->add_option("--low", ca.low)->capture_default_str();
  canny_cmd->add_option("--high", ca.high)->capture_default_str();
  canny_cmd->add_option("--colorspace", ca.colorspace, "Encoding of PNG input")->check(colorspaces)->capture_default_str();
  canny_cmd->add_option("--out", ca.out, "Edge mask output");
  canny_cmd->add_option("--overlay", ca.overlay, "Overlay PNG output");

  SolveArgs so;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Decompose an image or a dataset");
  solve_cmd->add_option("--image", so.image, "Input raster; PNG inputs are checked against the annotation hash");
  solve_cmd->add_option("--manifest", so.manifest, "Dataset manifest");
  solve_cmd->add_option("--method", so.method)
      ->check(CLI::IsMember({"retinex", "edge-prior", "energy"}))
      ->capture_default_str();
  solve_cmd->add_option("--annotation", so.annotation, "Annotation JSON");
  solve_cmd->add_option("--discriminator", so.discriminator, "Discriminator model JSON");
  solve_cmd->add_option("--out-r", so.out_r, "Reflectance output (.png or .ciif)");
  solve_cmd->add_option("--out-s", so.out_s, "Shading output (.png or .ciif)");
  solve_cmd->add_option("--out-dir", so.out_dir, "Prediction directory for --manifest");
  solve_cmd->add_option("--config", so.config, "SolverConfig JSON file");
  solve_cmd->add_option("--colorspace", so.colorspace)->check(colorspaces)->capture_default_str();

  EvaluateArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score predictions against annotations");
  eval_cmd->add_option("--image", ev.image);
  eval_cmd->add_option("--annotation", ev.annotation);
  eval_cmd->add_option("--pred-r", ev.pred_r);
  eval_cmd->add_option("--pred-s", ev.pred_s);
  eval_cmd->add_option("--manifest", ev.manifest);
  eval_cmd->add_option("--pred-dir", ev.pred_dir, "Predictions named like the ground-truth files");
  eval_cmd->add_option("--colorspace", ev.colorspace)->check(colorspaces)->capture_default_str();
  eval_cmd->add_option("--tau", ev.metric.tau)->capture_default_str();
  eval_cmd->add_option("--w1", ev.metric.w1)->capture_default_str();
  eval_cmd->add_option("--w2", ev.metric.w2)->capture_default_str();
  eval_cmd->add_option("--deadband", ev.metric.deadband)->capture_default_str();

  GradcheckArgs gc;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  grad_cmd->add_option("--seeds", gc.suite.seeds)->capture_default_str();
  grad_cmd->add_option("--size", gc.suite.width, "Raster side")->capture_default_str();
  grad_cmd->add_option("--eps", gc.suite.fd.eps)->capture_default_str();
  grad_cmd->add_option("--tolerance", gc.suite.tolerance)->capture_default_str();
  grad_cmd->add_flag("--inject-fault", gc.inject_fault, "Scale analytic gradients by 1.01");

  CLI::App* disc_cmd = app.add_subcommand("discriminator", "Train or apply the shading discriminator");
  disc_cmd->require_subcommand(1);
  TrainArgs tr;
  CLI::App* train_cmd = disc_cmd->add_subcommand("train", "Train on dataset shadings versus textured images");
  train_cmd->add_option("--manifest", tr.manifest, "Positives: shading of every scene")->required();
  train_cmd->add_option("--negatives-manifest", tr.negatives_manifest, "Negatives: image luminance (default --manifest)");
  train_cmd->add_option("--generated", tr.generated, "Solver shadings mixed into the negatives");
  train_cmd->add_option("--holdout", tr.holdout, "Held-out fraction per class")->capture_default_str();
  train_cmd->add_option("--epochs", tr.train.epochs)->capture_default_str();
  train_cmd->add_option("--lr", tr.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Model JSON output")->required();
  ScoreArgs sc;
  CLI::App* score_cmd = disc_cmd->add_subcommand("score", "Score shading rasters");
  score_cmd->add_option("--model", sc.model)->required();
  score_cmd->add_option("--image", sc.images)->required();

  CorruptArgs co;
  CLI::App* corrupt_cmd = app.add_subcommand("corrupt", "Plant artifacts into ground-truth decompositions");
  corrupt_cmd->add_option("--manifest", co.manifest)->required();
  corrupt_cmd->add_option("--mode", co.mode)
      ->check(CLI::IsMember({"texture_copy", "shading_leak", "blur", "swap"}))
      ->required();
  corrupt_cmd->add_option("--beta", co.beta)->capture_default_str();
  corrupt_cmd->add_option("--out-dir", co.out_dir)->required();

  service::ServiceConfig sv;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--port", sv.port)->capture_default_str();
  serve_cmd->add_option("--host", sv.host)->capture_default_str();
  serve_cmd->add_option("--cors-origin", sv.cors_origin)->capture_default_str();
  serve_cmd->add_option("--max-solves", sv.max_concurrent_solves)->capture_default_str();
  serve_cmd->add_option("--max-side", sv.max_side)->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (!g.quiet) echo_config(app, "", err);
  try {
    if (*synth_cmd) return cmd_synth(sy, *synth_cmd, g, out, err);
    if (*canny_cmd) return cmd_canny(ca, g, out);
    if (*solve_cmd) return cmd_solve(so, g, out, err);
    if (*eval_cmd) return cmd_evaluate(ev, g, out);
    if (*grad_cmd) return cmd_gradcheck(gc, g, out);
    if (*train_cmd) return cmd_train(tr, g, out);
    if (*score_cmd) return cmd_score(sc, g, out);
    if (*corrupt_cmd) return cmd_corrupt(co, g, out);
    if (*serve_cmd) return cmd_serve(sv, g, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << " (residual " << e.residual() << ")\n";
    return kConvergence;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace intrinsic::cli
