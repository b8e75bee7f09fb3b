#include "cpmoe/serialization.hpp"

namespace cpmoe {

using nlohmann::json;

namespace {

template <class Enum>
Enum enum_from(const json& j, std::initializer_list<Enum> values) {
  const auto token = j.get<std::string>();
  for (auto v : values)
    if (to_string(v) == token) return v;
  throw DataError("unknown enum token '" + token + "'");
}

json kernel_json(const Kernel& k) {
  return {{"kind", std::string(to_string(k.kind))}, {"degree", k.degree}, {"offset", k.offset}, {"gamma", k.gamma}};
}

Kernel kernel_from(const json& j) {
  Kernel k;
  k.kind = enum_from(j.at("kind"), {KernelKind::Linear, KernelKind::Poly, KernelKind::Rbf});
  k.degree = j.at("degree").get<int>();
  k.offset = j.at("offset").get<double>();
  k.gamma = j.at("gamma").get<double>();
  return k;
}

}  // namespace

json to_json(const ClassifierSpec& spec) {
  return {{"kind", std::string(to_string(spec.kind))},
          {"kernel", kernel_json(spec.kernel)},
          {"c", spec.c},
          {"l2", spec.l2},
          {"max_iter", spec.max_iter},
          {"tol", spec.tol},
          {"seed", spec.seed}};
}

ClassifierSpec spec_from_json(const json& j) {
  ClassifierSpec s;
  s.kind = enum_from(j.at("kind"), {ClassifierKind::NaiveBayes, ClassifierKind::Logistic, ClassifierKind::Svm});
  s.kernel = kernel_from(j.at("kernel"));
  s.c = j.at("c").get<double>();
  s.l2 = j.at("l2").get<double>();
  s.max_iter = j.at("max_iter").get<int>();
  s.tol = j.at("tol").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

json to_json(const TrainedModel& model) {
  json j;
  j["spec"] = to_json(model.spec());
  j["scaler"] = {{"mean", model.scaler().mean}, {"scale", model.scaler().scale}};
  j["fit"] = {{"iterations", model.fit_info().iterations},
              {"converged", model.fit_info().converged},
              {"final_violation", model.fit_info().final_violation}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, NaiveBayesParams>) {
          j["params"] = {{"log_prior_evol", p.log_prior_evol}, {"log_prior_noevol", p.log_prior_noevol},
                         {"mean_evol", p.mean_evol},           {"var_evol", p.var_evol},
                         {"mean_noevol", p.mean_noevol},       {"var_noevol", p.var_noevol}};
        } else if constexpr (std::is_same_v<P, LinearParams>) {
          j["params"] = {{"weights", p.weights}, {"bias", p.bias}};
        } else {
          j["params"] = {{"kernel", kernel_json(p.kernel)}, {"support", p.support}, {"coef", p.coef}, {"bias", p.bias}};
        }
      },
      model.params());
  return j;
}

TrainedModel model_from_json(const json& j) {
  auto spec = spec_from_json(j.at("spec"));
  Standardizer scaler;
  scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
  scaler.scale = j.at("scaler").at("scale").get<std::vector<double>>();
  if (scaler.mean.size() != scaler.scale.size()) throw DataError("model scaler arrays differ in length");
  const std::size_t d = scaler.mean.size();
  FitInfo info;
  info.iterations = j.at("fit").at("iterations").get<int>();
  info.converged = j.at("fit").at("converged").get<bool>();
  info.final_violation = j.at("fit").at("final_violation").get<double>();

  const auto& p = j.at("params");
  TrainedModel::Params params;
  switch (spec.kind) {
    case ClassifierKind::NaiveBayes: {
      NaiveBayesParams nb;
      nb.log_prior_evol = p.at("log_prior_evol").get<double>();
      nb.log_prior_noevol = p.at("log_prior_noevol").get<double>();
      nb.mean_evol = p.at("mean_evol").get<std::vector<double>>();
      nb.var_evol = p.at("var_evol").get<std::vector<double>>();
      nb.mean_noevol = p.at("mean_noevol").get<std::vector<double>>();
      nb.var_noevol = p.at("var_noevol").get<std::vector<double>>();
      for (const auto* v : {&nb.mean_evol, &nb.var_evol, &nb.mean_noevol, &nb.var_noevol})
        if (v->size() != d) throw DataError("naive Bayes parameter length mismatch");
      params = std::move(nb);
      break;
    }
    case ClassifierKind::Logistic: {
      LinearParams lin;
      lin.weights = p.at("weights").get<std::vector<double>>();
      lin.bias = p.at("bias").get<double>();
      if (lin.weights.size() != d) throw DataError("logistic weight length mismatch");
      params = std::move(lin);
      break;
    }
    case ClassifierKind::Svm: {
      SvmParams svm;
      svm.kernel = kernel_from(p.at("kernel"));
      svm.support = p.at("support").get<std::vector<double>>();
      svm.coef = p.at("coef").get<std::vector<double>>();
      svm.bias = p.at("bias").get<double>();
      if (svm.support.size() != svm.coef.size() * d) throw DataError("svm support array length mismatch");
      params = std::move(svm);
      break;
    }
  }
  return TrainedModel(std::move(spec), std::move(scaler), std::move(params), info);
}

json to_json(const Imputer& imputer) {
  json cols = json::array();
  for (const auto& c : imputer.columns()) {
    json col = {{"name", c.name}, {"source", c.source}};
    if (c.kind == Imputer::ColumnKind::Real) {
      col["kind"] = "real";
      col["median"] = c.median;
    } else {
      col["kind"] = "categorical";
      col["categories"] = c.categories;
    }
    cols.push_back(std::move(col));
  }
  return {{"raw_names", imputer.raw_names()}, {"columns", std::move(cols)}};
}

Imputer imputer_from_json(const json& j) {
  std::vector<Imputer::Column> columns;
  for (const auto& col : j.at("columns")) {
    Imputer::Column c;
    c.name = col.at("name").get<std::string>();
    c.source = col.at("source").get<std::size_t>();
    const auto kind = col.at("kind").get<std::string>();
    if (kind == "real") {
      c.kind = Imputer::ColumnKind::Real;
      c.median = col.at("median").get<double>();
    } else if (kind == "categorical") {
      c.kind = Imputer::ColumnKind::Categorical;
      c.categories = col.at("categories").get<std::vector<std::string>>();
    } else {
      throw DataError("unknown imputer column kind '" + kind + "'");
    }
    columns.push_back(std::move(c));
  }
  return Imputer(j.at("raw_names").get<std::vector<std::string>>(), std::move(columns));
}

json to_json(const CcpModel& model) {
  json folds = json::array();
  for (const auto& f : model.folds) {
    std::vector<double> alphas;
    std::vector<int> labels;
    for (const auto& s : f.calibration) {
      alphas.push_back(s.alpha);
      labels.push_back(static_cast<int>(s.label));
    }
    folds.push_back({{"features", f.features},
                     {"model", to_json(f.model)},
                     {"calibration_alpha", alphas},
                     {"calibration_label", labels}});
  }
  return {{"window", std::string(to_string(model.window))},
          {"spec", to_json(model.spec)},
          {"input_dim", model.input_dim},
          {"feature_names", model.feature_names},
          {"folds", std::move(folds)}};
}

CcpModel ccp_from_json(const json& j) {
  CcpModel m;
  const auto window = parse_window(j.at("window").get<std::string>());
  if (!window) throw DataError("unknown window in model file");
  m.window = *window;
  m.spec = spec_from_json(j.at("spec"));
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& jf : j.at("folds")) {
    FoldModel f;
    f.features = jf.at("features").get<std::vector<std::size_t>>();
    for (auto idx : f.features)
      if (idx >= m.input_dim) throw DataError("fold feature index out of range");
    f.model = model_from_json(jf.at("model"));
    const std::size_t expected_dim = f.features.empty() ? m.input_dim : f.features.size();
    if (f.model.dimension() != expected_dim) throw DataError("fold model dimension does not match its features");
    const auto alphas = jf.at("calibration_alpha").get<std::vector<double>>();
    const auto labels = jf.at("calibration_label").get<std::vector<int>>();
    if (alphas.size() != labels.size()) throw DataError("calibration arrays differ in length");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1) throw DataError("calibration label must be 0 or 1");
      if (i && alphas[i] < alphas[i - 1]) throw DataError("calibration alphas must be sorted");
      f.calibration.push_back({alphas[i], static_cast<Label>(labels[i])});
    }
    m.folds.push_back(std::move(f));
  }
  if (m.folds.empty()) throw DataError("model file has no folds");
  return m;
}

std::string serialize(const ExpertBundle& bundle) {
  json j = {{"format", "cpmoe-expert"},
            {"version", kModelFormatVersion},
            {"imputer", to_json(bundle.imputer)},
            {"model", to_json(bundle.model)}};
  return j.dump(1) + "\n";
}

ExpertBundle deserialize_bundle(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "cpmoe-expert") throw DataError("not a cpmoe expert file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("unsupported model format version " + std::to_string(version));
    ExpertBundle b{imputer_from_json(j.at("imputer")), ccp_from_json(j.at("model"))};
    if (b.imputer.encoded_size() != b.model.input_dim) throw DataError("model input size does not match its encoder");
    return b;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace cpmoe
