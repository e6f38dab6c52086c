#ifndef CVRP_POLICY_WEIGHTS_HPP
#define CVRP_POLICY_WEIGHTS_HPP

#include <stdexcept>
#include <string>

#include "cvrp/policy/model.hpp"

namespace cvrp::policy {

class WeightsError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Versioned binary container: magic + version + model config echo, then the
// named tensors in visit() order, each as name / rows / cols / row-major
// doubles, everything little-endian. Round-trips bit-exactly.
void save_weights(const std::string& path, const PolicyParams& params);
PolicyParams load_weights(const std::string& path);

// Optional JSON sidecar written next to the weight file (path + ".json").
void save_sidecar(const std::string& weights_path, const std::string& json_text);

}  // namespace cvrp::policy

#endif
