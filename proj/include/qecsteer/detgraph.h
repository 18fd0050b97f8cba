#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qecsteer/circuit.h"
#include "qecsteer/noise.h"

namespace qecsteer {

enum class Phase : uint8_t { First, Bulk, Final };

// Time-translation equivalence class of detectors, keyed by
// (measure qubit, phase). The reward vector has one entry per class.
struct DetectorClass {
    uint32_t class_id;
    std::vector<uint32_t> members;  // det_ids
    uint32_t space_coord;
    Phase phase;
};

std::vector<DetectorClass> fold_detectors(const Circuit& c);

// Sparse bipartite map between detector classes and control parameters;
// an edge exists when the parameter's site lies in the detecting region
// of any class member.
struct FactorGraph {
    std::vector<DetectorClass> classes;
    uint32_t num_params = 0;
    std::vector<std::vector<uint32_t>> class_params;   // class -> sorted params
    std::vector<std::vector<uint32_t>> param_classes;  // param -> sorted classes

    double mean_params_per_class() const;
    double mean_classes_per_param() const;
};

FactorGraph build_factor_graph(const Circuit& c, const DetectingRegionMap& regions,
                               const std::vector<ControlParameter>& params);

// One sensitivity scale per parameter-type group, from the quadratic fit
// DR(sigma) = DR0 + (sigma/sigma0)^2 of exploration-noise sweeps.
struct SensitivityScale {
    std::string group;
    std::vector<uint32_t> params;
    double sigma0 = 0;
    double dr0 = 0;
    double residual = 0;
    bool flagged = false;  // non-positive curvature; sigma0 is +inf
};

struct CalibrationOptions {
    std::vector<double> sigma_grid = {0.0, 0.05, 0.1, 0.2, 0.4};  // physical units
    uint64_t shots = 100000;
    int draws_per_point = 4;
    int threads = 1;
};

// Groups default to one group per (site kind, slot index).
std::vector<std::vector<uint32_t>> default_type_groups(const Circuit& c, const ErrorModel& m);
std::vector<std::string> default_type_group_names(const Circuit& c, const ErrorModel& m);

std::vector<SensitivityScale> calibrate_sensitivities(const Circuit& c, const ErrorModel& m,
                                                      const PolicyVector& base,
                                                      const std::vector<std::vector<uint32_t>>& groups,
                                                      const CalibrationOptions& opt, uint64_t seed);

// Installs the fitted sigma0 values as parameter scales (flagged groups keep
// scale 1).
void apply_scales(ErrorModel& m, const std::vector<SensitivityScale>& scales);

std::string dump_graph_json(const FactorGraph& g);

}  // namespace qecsteer
