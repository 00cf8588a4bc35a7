#include "honestrf/ustat/serialize.hpp"

#include "honestrf/core/errors.hpp"

namespace honestrf {

nlohmann::json to_json(const ForestConfig& cfg) {
  return nlohmann::json{{"n", cfg.n},         {"s", cfg.s},         {"trees", cfg.trees},
                        {"delta", cfg.delta}, {"alpha", cfg.alpha}, {"k", cfg.k},
                        {"grid", cfg.grid_g}, {"seed", cfg.seed}};
}

ForestConfig forest_config_from_json(const nlohmann::json& j) {
  ForestConfig cfg;
  cfg.n = j.at("n").get<std::size_t>();
  cfg.s = j.at("s").get<std::size_t>();
  cfg.trees = j.at("trees").get<std::size_t>();
  cfg.delta = j.at("delta").get<double>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.k = j.at("k").get<std::size_t>();
  cfg.grid_g = j.at("grid").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

nlohmann::json to_json(const JointEstimate& est) {
  nlohmann::json out;
  out["points"] = est.points;
  out["estimates"] = std::vector<double>(est.estimates.data(),
                                         est.estimates.data() + est.estimates.size());
  out["cov"] = matrix_to_json(est.cov);
  out["trees_used"] = est.trees_used;
  out["degenerate"] = est.degenerate;
  out["config"] = to_json(est.config);
  out["seed"] = est.config.seed;
  return out;
}

JointEstimate joint_estimate_from_json(const nlohmann::json& j) {
  JointEstimate est;
  est.points = j.at("points").get<std::vector<Point>>();
  const auto values = j.at("estimates").get<std::vector<double>>();
  est.estimates = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                    static_cast<Eigen::Index>(values.size()));
  est.cov = matrix_from_json(j.at("cov"));
  est.trees_used = j.at("trees_used").get<std::size_t>();
  est.degenerate = j.at("degenerate").get<bool>();
  est.config = forest_config_from_json(j.at("config"));
  return est;
}

nlohmann::json to_json(const HajekEstimate& est, const std::vector<Point>& points) {
  nlohmann::json out;
  out["points"] = points;
  out["var_t1"] = matrix_to_json(est.var_t1);
  out["v_hat"] = matrix_to_json(est.v_hat);
  out["t1_noise"] = matrix_to_json(est.t1_noise);
  out["anchors"] = est.anchors;
  out["mc_reps"] = est.mc_reps;
  out["s"] = est.s;
  out["n"] = est.n;
  out["seed"] = est.seed;
  return out;
}

}  // namespace honestrf
