#include "model/spec.hpp"

#include "util/errors.hpp"

namespace cvrlab::model {

void ModelSpec::validate() const {
  if (fields.empty()) throw ValidationError("model spec: no feature fields");
  for (const auto& f : fields) {
    if (f.name.empty()) throw ValidationError("model spec: unnamed field");
    if (f.vocab <= 0)
      throw ValidationError("model spec: field '" + f.name + "' vocab must be positive");
    if (f.dim <= 0 || f.dim > 4096)
      throw ValidationError("model spec: field '" + f.name + "' dim out of range");
  }
  for (int w : head_widths)
    if (w <= 0) throw ValidationError("model spec: head widths must be positive");
  if (weights.ctr < 0 || weights.dmi < 0 || weights.dma < 0 || weights.ctcvr < 0)
    throw ValidationError("model spec: loss weights must be >= 0");
}

int64_t ModelSpec::input_dim() const {
  int64_t d = 0;
  for (const auto& f : fields) d += f.dim;
  return d;
}

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json j;
  j["variant"] = std::string(graph::variant_name(variant));
  j["fields"] = nlohmann::json::array();
  for (const auto& f : fields)
    j["fields"].push_back({{"name", f.name}, {"vocab", f.vocab}, {"dim", f.dim}});
  j["head_widths"] = head_widths;
  j["loss_weights"] = {{"ctr", weights.ctr},
                       {"dmi", weights.dmi},
                       {"dma", weights.dma},
                       {"ctcvr", weights.ctcvr}};
  j["seed"] = seed;
  return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  const auto v = graph::variant_from_name(j.at("variant").get<std::string>());
  if (!v) throw ValidationError("model spec: unknown variant in header");
  s.variant = *v;
  s.fields.clear();
  for (const auto& f : j.at("fields"))
    s.fields.push_back({f.at("name").get<std::string>(),
                        f.at("vocab").get<int64_t>(), f.at("dim").get<int64_t>()});
  s.head_widths = j.at("head_widths").get<std::vector<int>>();
  const auto& w = j.at("loss_weights");
  s.weights = {w.at("ctr").get<double>(), w.at("dmi").get<double>(),
               w.at("dma").get<double>(), w.at("ctcvr").get<double>()};
  s.seed = j.at("seed").get<uint64_t>();
  s.validate();
  return s;
}

}  // namespace cvrlab::model
