#pragma once

#include "firecast/estimation.hpp"
#include "firecast/model.hpp"
#include "firecast/stats.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace firecast {

/// Draws the mark vector of an accepted event.
using MarkSampler = std::function<std::vector<double>(std::size_t location, double time, Rng& rng)>;

/// i.i.d. uniform [0, 1]^dim marks.
[[nodiscard]] MarkSampler uniform_marks(std::size_t dim);

struct SimConfig {
    ModelParams params;
    double horizon{1000.0};
    MarkSampler mark_sampler;  // defaults to uniform_marks(params.mark_dim())
    std::uint64_t seed{1};
};

/// Thrown for parameter settings the simulator cannot sample exactly.
class UnsupportedConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact sampling by Ogata thinning. With nonnegative alpha the total ground
/// intensity only decays between events, so its value just after the current
/// time bounds every later candidate until the next acceptance.
[[nodiscard]] EventSequence simulate(const SimConfig& config);

/// Parameter error per block. The total covers the ground process
/// (mu, alpha, beta); gamma is reported separately since uniform marks carry
/// no information about it.
struct ParameterError {
    double mu{0.0};
    double alpha{0.0};
    double beta{0.0};
    double gamma{0.0};
    double total{0.0};
    double total_relative{0.0};
};

[[nodiscard]] ParameterError parameter_error(const ModelParams& estimate, const ModelParams& truth);

struct RecoveryReport {
    ParameterError error;
    std::size_t num_events{0};
    FitResult fit;
};

/// Simulates from the config's params, fits with grid_fit, and measures the
/// distance to the generating parameters.
[[nodiscard]] RecoveryReport recovery_experiment(const SimConfig& sim, const MarkModel& marks,
                                                 const FitConfig& fit);

}  // namespace firecast
