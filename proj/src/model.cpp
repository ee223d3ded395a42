#include <cmath>

#include "cohort/core.hpp"
#include "cohort/learners.hpp"

namespace cohort::learn {

std::string_view kind_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::LogReg: return "logreg";
    case ModelKind::LinearSVM: return "linear_svm";
    case ModelKind::RandomForest: return "random_forest";
    case ModelKind::GBT: return "gbt";
  }
  return "unknown";
}

ModelKind parse_kind(std::string_view name) {
  for (ModelKind k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  throw ValidationError("unknown model kind '" + std::string(name) + "'");
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double TrainedModel::score(const Eigen::VectorXd& x) const {
  if (x.size() != dimension) {
    throw ValidationError("model expects dimension " + std::to_string(dimension) + ", got " +
                          std::to_string(x.size()));
  }
  switch (kind) {
    case ModelKind::LogReg: {
      const auto& m = std::get<LinearModel>(params);
      return sigmoid(m.w.dot(x) + m.b);
    }
    case ModelKind::LinearSVM: {
      const auto& m = std::get<LinearModel>(params);
      return m.w.dot(x) + m.b;
    }
    case ModelKind::RandomForest: {
      const auto& f = std::get<ForestModel>(params);
      if (f.trees.empty()) return 1.0;
      int ones = 0;
      for (const auto& t : f.trees) ones += t.predict(x) >= 0.5 ? 1 : 0;
      return static_cast<double>(ones) / static_cast<double>(f.trees.size());
    }
    case ModelKind::GBT: {
      const auto& b = std::get<BoostModel>(params);
      double z = b.base_score;
      for (const auto& t : b.trees) z += t.predict(x);
      return sigmoid(z);
    }
  }
  return 0;
}

int TrainedModel::predict(const Eigen::VectorXd& x) const {
  const double s = score(x);
  return kind == ModelKind::LinearSVM ? (s >= 0 ? 1 : 0) : (s >= 0.5 ? 1 : 0);
}

std::vector<int> TrainedModel::predict(const Dataset& d) const {
  std::vector<int> out;
  out.reserve(d.size());
  for (const auto& r : d.rows) out.push_back(predict(r.x));
  return out;
}

TrainedModel train_kind(ModelKind kind, const Dataset& d, std::uint64_t seed,
                        const LearnerConfig& cfg, const TrainedModel* warm) {
  const LinearModel* w = nullptr;
  if (warm && warm->kind == kind) w = std::get_if<LinearModel>(&warm->params);
  switch (kind) {
    case ModelKind::LogReg: return train_logreg(d, seed, cfg, w);
    case ModelKind::LinearSVM: return train_linear_svm(d, seed, cfg, w);
    case ModelKind::RandomForest: return train_random_forest(d, seed, cfg);
    case ModelKind::GBT: return train_gbt(d, seed, cfg);
  }
  throw ValidationError("unknown model kind");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json node_json(const Tree& t, int i) {
  const TreeNode& n = t.nodes[i];
  if (n.feature < 0) return {{"value", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"value", n.value},
          {"left", node_json(t, n.left)},
          {"right", node_json(t, n.right)}};
}

int node_from(const nlohmann::json& j, Tree& t, int depth) {
  if (depth > 64) throw ValidationError("tree too deep in model document");
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  t.nodes[id].value = j.at("value").get<double>();
  if (!j.contains("feature")) return id;
  t.nodes[id].feature = j.at("feature").get<int>();
  t.nodes[id].threshold = j.at("threshold").get<double>();
  const int left = node_from(j.at("left"), t, depth + 1);
  const int right = node_from(j.at("right"), t, depth + 1);
  t.nodes[id].left = left;
  t.nodes[id].right = right;
  return id;
}

nlohmann::json trees_json(const std::vector<Tree>& trees) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : trees) out.push_back(t.nodes.empty() ? nlohmann::json() : node_json(t, 0));
  return out;
}

std::vector<Tree> trees_from(const nlohmann::json& j) {
  std::vector<Tree> out;
  for (const auto& tj : j) {
    Tree t;
    if (!tj.is_null()) node_from(tj, t, 0);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

nlohmann::json model_to_json(const TrainedModel& m) {
  nlohmann::json j = {{"schema_version", kModelSchemaVersion},
                      {"kind", kind_name(m.kind)},
                      {"seed", m.seed},
                      {"iterations", m.iterations},
                      {"dimension", m.dimension}};
  if (const auto* lin = std::get_if<LinearModel>(&m.params)) {
    j["weights"] = vec_json(lin->w);
    j["bias"] = lin->b;
    j["steps"] = lin->steps;
  } else if (const auto* f = std::get_if<ForestModel>(&m.params)) {
    j["trees"] = trees_json(f->trees);
  } else if (const auto* b = std::get_if<BoostModel>(&m.params)) {
    j["base_score"] = b->base_score;
    j["learning_rate"] = b->learning_rate;
    j["trees"] = trees_json(b->trees);
  }
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
    throw ValidationError("unsupported model schema_version");
  }
  TrainedModel m;
  m.kind = parse_kind(j.at("kind").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.iterations = j.at("iterations").get<int>();
  m.dimension = j.at("dimension").get<Eigen::Index>();
  switch (m.kind) {
    case ModelKind::LogReg:
    case ModelKind::LinearSVM: {
      LinearModel lin;
      lin.w = vec_from(j.at("weights"));
      lin.b = j.at("bias").get<double>();
      lin.steps = j.at("steps").get<long>();
      m.params = std::move(lin);
      break;
    }
    case ModelKind::RandomForest:
      m.params = ForestModel{trees_from(j.at("trees"))};
      break;
    case ModelKind::GBT: {
      BoostModel b;
      b.base_score = j.at("base_score").get<double>();
      b.learning_rate = j.at("learning_rate").get<double>();
      b.trees = trees_from(j.at("trees"));
      m.params = std::move(b);
      break;
    }
  }
  return m;
}

}  // namespace cohort::learn
