#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "etdp/closed_testing.hpp"
#include "etdp/distributions.hpp"
#include "etdp/eprocess.hpp"

namespace etdp {

struct ScenarioConfig {
    int m = 0;            // hypotheses per replication
    int n_false = 0;      // false nulls, placed at the top indices
    int horizon = 0;      // subjects per stream (one per time point)
    double mu_alt = 0.0;  // mean under false nulls
    double rho = 0.0;     // equicorrelation
    double alpha = 0.0;
    std::vector<double> pi1_list; // target true-discovery proportions
    int r_size = 30;              // size of every discovery set
    int iterations = 0;
    int burn_in = 11;     // first reported time
    EProcessFamily family;
    bool ard = false;     // report anytime running-minimum bounds
    std::uint64_t seed = 0;
};

void validate_scenario(const ScenarioConfig& config);

// Number of false-null members a set with target pi1 must contain.
int false_member_count(double pi1, int r_size);

// One set per pi1: the k = round(pi1 * r_size) lowest-index false nulls
// plus the 1..r_size-k lowest-index true nulls, labels "pi1=<value>".
std::vector<DiscoverySet> build_discovery_sets(const ScenarioConfig& config);

// True-null members of the set, the quantity the bound must not undercut.
int true_null_count(const ScenarioConfig& config, double pi1);

struct MetricsRow {
    int time = 0;
    double pi1 = 0.0;
    double violation_prop = 0.0; // share of iterations with c below the true count
    double mean_bound = 0.0;     // mean reported TDP bound
    double q10 = 0.0;
    double q50 = 0.0;
    double q90 = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows; // time-major, pi1 in list order within a time
};

// Receives every iteration's reported bound series, in iteration order,
// after all replications finish. `c_selected` covers times 0..horizon.
class PerIterationSink {
  public:
    virtual ~PerIterationSink() = default;
    virtual void record(int iteration, double pi1, int set_size,
                        std::span<const int> c_selected) = 0;
};

// Full replication study: equicorrelated Gaussian streams, one e-process per
// hypothesis, simultaneous bounds for every configured set. Deterministic in
// (seed, config) regardless of thread count.
MetricsTable run_scenario(const ScenarioConfig& config,
                          PerIterationSink* sink = nullptr);

// Per-time share of series whose reported c undercuts true_tau.
std::vector<double> violation_proportion(const std::vector<BoundSeries>& series,
                                         int true_tau);

// Interpolated quantile (linear between order statistics) of a nonempty sample.
double sample_quantile(std::vector<double> values, double prob);

} // namespace etdp
