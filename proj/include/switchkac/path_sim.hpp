#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "switchkac/model.hpp"
#include "switchkac/rng.hpp"
#include "switchkac/stats.hpp"

namespace switchkac {

struct JumpRecord {
    double time;
    Vec mark;
    Vec displacement;  // gamma(X(t-), alpha(t-), z) actually applied
};

struct SwitchRecord {
    double time;
    int from;
    int to;
};

// One realized trajectory of (X, alpha) on its event-split skeleton. States
// and regimes at an event epoch are the post-event values; pre-event values
// are recoverable from the jump/switch records.
struct Path {
    int n = 1;
    std::vector<double> times;
    std::vector<double> states;  // n entries per skeleton point, flattened
    std::vector<int> regimes;
    std::vector<JumpRecord> jumps;
    std::vector<SwitchRecord> switches;
    std::vector<double> brownian_increments;  // n per step when retained
    bool exploded = false;
    bool stopped_early = false;  // a stop predicate fired before the horizon

    std::size_t size() const { return times.size(); }
    double state(std::size_t k, int d = 0) const { return states[k * static_cast<std::size_t>(n) + d]; }
    double final_time() const { return times.back(); }
    int final_regime() const { return regimes.back(); }
    void clear() {
        times.clear();
        states.clear();
        regimes.clear();
        jumps.clear();
        switches.clear();
        brownian_increments.clear();
        exploded = false;
        stopped_early = false;
    }
};

struct SimParams {
    double horizon = 1.0;     // T
    double max_step = 1e-2;   // h, the largest Euler step
    double truncation = 0.0;  // delta, jump truncation level
    bool retain_brownian = false;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    // Optional early stopping at skeleton times (used by Dirichlet problems).
    std::function<bool(double t, const Vec& x, int regime)> stop_when;
};

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, Path partial_path)
        : std::runtime_error(what), partial(std::move(partial_path)) {}
    Path partial;
};

// Euler-Maruyama between events, exact application of sampled large jumps,
// state-dependent switching by thinning against the dominating rate
// m * q_bound. Steps are split at every jump and switch epoch. Throws
// SimulationError (carrying the partial path) if the state leaves |x| <= 1e12
// or becomes non-finite.
Path simulate_path(const ModelSpec& spec, const HybridState& start, const SimParams& params,
                   RngStream& rng);

// Same engine, reusing the caller's buffer; returns false instead of throwing
// when the path explodes.
bool simulate_path_into(const ModelSpec& spec, const HybridState& start, const SimParams& params,
                        RngStream& rng, Path& out);

// Mean and standard error of the functional over n_paths independent paths.
// Streams derive from (seed, stream_id, path index); aggregation runs over
// fixed 1024-path blocks reduced in index order, so results are bit-identical
// for any worker count. Exploded paths are counted, excluded, and flag the
// estimate invalid.
Estimate simulate_ensemble(const ModelSpec& spec, const HybridState& start, const SimParams& params,
                           std::int64_t n_paths, const std::function<double(const Path&)>& functional,
                           int n_threads = 1);

// Estimate of E[ sup_{t <= T} |X(t)|^p ] from the skeleton maximum,
// p in (0, 2]. A stability diagnostic, not a proof.
Estimate empirical_moment_bound(const ModelSpec& spec, const HybridState& start,
                                const SimParams& params, double p, std::int64_t n_paths,
                                int n_threads = 1);

}  // namespace switchkac
