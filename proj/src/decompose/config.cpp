#include <cmath>

#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "json.hpp"

namespace intrinsic::decompose {

namespace {

const char* init_name(EnergyInit init) {
  switch (init) {
    case EnergyInit::identity:
      return "identity";
    case EnergyInit::luminance:
      return "luminance";
    case EnergyInit::split:
      return "split";
    case EnergyInit::blur:
      return "blur";
    case EnergyInit::retinex:
      return "retinex";
    case EnergyInit::soft:
      return "soft";
  }
  return "split";
}

}  // namespace

void SolverConfig::check() const {
  if (!(retinex_threshold > 0.0)) throw ParameterError("retinex_threshold must be positive");
  if (!(cg_tolerance > 0.0) || cg_max_iterations <= 0) throw ParameterError("CG tolerance and cap must be positive");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ParameterError("step_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must lie in [0, 1)");
  if (iterations < 0 || max_halvings < 0) throw ParameterError("iteration counts must be non-negative");
  if (!(smoothness >= 0.0)) throw ParameterError("smoothness must be non-negative");
  if (!(init_threshold >= 0.0) || !(init_width > 0.0)) throw ParameterError("bad soft-split parameters");
  weights.check();
}

std::string to_json(const SolverConfig& c) {
  nlohmann::ordered_json j;
  j["retinex_threshold"] = c.retinex_threshold;
  j["cg_tolerance"] = c.cg_tolerance;
  j["cg_max_iterations"] = c.cg_max_iterations;
  j["step_size"] = c.step_size;
  j["momentum"] = c.momentum;
  j["iterations"] = c.iterations;
  j["max_halvings"] = c.max_halvings;
  j["smoothness"] = c.smoothness;
  j["init"] = init_name(c.init);
  j["init_threshold"] = c.init_threshold;
  j["init_width"] = c.init_width;
  j["weights"] = {{"lambda_r", c.weights.lambda_r},
                  {"lambda_s", c.weights.lambda_s},
                  {"lambda_ad", c.weights.lambda_ad},
                  {"lambda_grad", c.weights.lambda_grad}};
  return j.dump(2);
}

SolverConfig solver_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("solver config: ") + e.what(), "byte " + std::to_string(e.byte));
  }
  if (!j.is_object()) throw ParseError("solver config must be a JSON object", "/");
  SolverConfig c;
  auto num = [&](const nlohmann::json& obj, const std::string& key, const std::string& ptr, auto& into) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number()) throw ParseError("expected a number", ptr + key);
    into = obj[key].get<std::remove_reference_t<decltype(into)>>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "retinex_threshold") num(j, key, "/", c.retinex_threshold);
    else if (key == "cg_tolerance") num(j, key, "/", c.cg_tolerance);
    else if (key == "cg_max_iterations") num(j, key, "/", c.cg_max_iterations);
    else if (key == "step_size") num(j, key, "/", c.step_size);
    else if (key == "momentum") num(j, key, "/", c.momentum);
    else if (key == "iterations") num(j, key, "/", c.iterations);
    else if (key == "max_halvings") num(j, key, "/", c.max_halvings);
    else if (key == "smoothness") num(j, key, "/", c.smoothness);
    else if (key == "init_threshold") num(j, key, "/", c.init_threshold);
    else if (key == "init_width") num(j, key, "/", c.init_width);
    else if (key == "init") {
      const std::string s = value.is_string() ? value.get<std::string>() : "";
      if (s == "identity") c.init = EnergyInit::identity;
      else if (s == "luminance") c.init = EnergyInit::luminance;
      else if (s == "split") c.init = EnergyInit::split;
      else if (s == "blur") c.init = EnergyInit::blur;
      else if (s == "retinex") c.init = EnergyInit::retinex;
      else if (s == "soft") c.init = EnergyInit::soft;
      else throw ParseError("init must be identity, luminance, split, blur, retinex or soft", "/init");
    } else if (key == "weights") {
      if (!value.is_object()) throw ParseError("weights must be an object", "/weights");
      for (const auto& [wk, wv] : value.items()) {
        (void)wv;
        if (wk == "lambda_r") num(value, wk, "/weights/", c.weights.lambda_r);
        else if (wk == "lambda_s") num(value, wk, "/weights/", c.weights.lambda_s);
        else if (wk == "lambda_ad") num(value, wk, "/weights/", c.weights.lambda_ad);
        else if (wk == "lambda_grad") num(value, wk, "/weights/", c.weights.lambda_grad);
        else throw ParseError("unknown weight '" + wk + "'", "/weights/" + wk);
      }
    } else {
      throw ParseError("unknown solver option '" + key + "'", "/" + key);
    }
  }
  try {
    c.check();
  } catch (const ParameterError& e) {
    throw ParseError(e.what(), "/");
  }
  return c;
}

}  // namespace intrinsic::decompose
