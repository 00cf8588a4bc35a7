#pragma once

#include "json.hpp"

#include "honestrf/core/config.hpp"
#include "honestrf/ustat/forest.hpp"
#include "honestrf/ustat/hajek.hpp"

namespace honestrf {

nlohmann::json to_json(const ForestConfig& cfg);
ForestConfig forest_config_from_json(const nlohmann::json& j);

/// points, estimates, cov, trees_used, degenerate, config echo and seed.
nlohmann::json to_json(const JointEstimate& est);
JointEstimate joint_estimate_from_json(const nlohmann::json& j);

/// points, t1 summary (var_t1, v_hat, t1_noise), counts and seed.
nlohmann::json to_json(const HajekEstimate& est, const std::vector<Point>& points);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace honestrf
