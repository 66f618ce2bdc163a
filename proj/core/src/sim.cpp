#include "etdp/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <set>
#include <thread>

#include "etdp/errors.hpp"

namespace etdp {

namespace {

std::string short_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

} // namespace

int false_member_count(double pi1, int r_size) {
    return static_cast<int>(std::lround(pi1 * static_cast<double>(r_size)));
}

void validate_scenario(const ScenarioConfig& config) {
    if (config.m < 1) throw config_error("scenario: m must be at least 1");
    if (config.n_false < 0 || config.n_false > config.m)
        throw config_error("scenario: n_false must lie in 0..m");
    if (config.horizon < 1) throw config_error("scenario: N must be at least 1");
    if (!(std::isfinite(config.mu_alt) && config.mu_alt >= 0.0))
        throw config_error("scenario: mu_alt must be finite and nonnegative");
    if (!(config.rho >= 0.0 && config.rho < 1.0))
        throw config_error("scenario: rho must lie in [0, 1)");
    if (!(config.alpha > 0.0 && config.alpha < 1.0))
        throw config_error("scenario: alpha must lie in (0, 1)");
    if (config.r_size < 1 || config.r_size > config.m)
        throw config_error("scenario: r_size must lie in 1..m");
    if (config.iterations < 1) throw config_error("scenario: iterations must be at least 1");
    if (config.burn_in < 1) throw config_error("scenario: burn_in must be at least 1");
    if (config.burn_in > config.horizon)
        throw config_error("scenario: burn_in exceeds the horizon, nothing to report");
    if (config.pi1_list.empty()) throw config_error("scenario: pi1_list is empty");
    validate_family(config.family);

    std::set<double> seen;
    for (double pi1 : config.pi1_list) {
        if (!(std::isfinite(pi1) && pi1 > 0.0 && pi1 <= 1.0))
            throw config_error("scenario: pi1=" + short_double(pi1) +
                               " must lie in (0, 1]");
        if (!seen.insert(pi1).second)
            throw config_error("scenario: duplicate pi1=" + short_double(pi1));
        const int k = false_member_count(pi1, config.r_size);
        const int k_ceil =
            static_cast<int>(std::ceil(pi1 * static_cast<double>(config.r_size)));
        if (k < 1)
            throw config_error("scenario: pi1=" + short_double(pi1) +
                               " yields a discovery set with no false-null members");
        if (k_ceil > config.n_false || k > config.n_false)
            throw config_error("scenario: pi1=" + short_double(pi1) + " needs " +
                               std::to_string(std::max(k, k_ceil)) +
                               " false nulls but only " + std::to_string(config.n_false) +
                               " exist");
        if (config.r_size - k > config.m - config.n_false)
            throw config_error("scenario: pi1=" + short_double(pi1) + " needs " +
                               std::to_string(config.r_size - k) +
                               " true nulls but only " +
                               std::to_string(config.m - config.n_false) + " exist");
    }
}

std::vector<DiscoverySet> build_discovery_sets(const ScenarioConfig& config) {
    validate_scenario(config);
    std::vector<DiscoverySet> sets;
    sets.reserve(config.pi1_list.size());
    for (double pi1 : config.pi1_list) {
        const int k = false_member_count(pi1, config.r_size);
        DiscoverySet set;
        set.label = "pi1=" + short_double(pi1);
        set.indices.reserve(config.r_size);
        // True-null block precedes the false-null block, so appending the
        // lowest indices of each class in turn keeps the list sorted.
        for (int i = 1; i <= config.r_size - k; ++i) set.indices.push_back(i);
        const int first_false = config.m - config.n_false + 1;
        for (int i = 0; i < k; ++i) set.indices.push_back(first_false + i);
        validate_discovery_set(set, config.m);
        sets.push_back(std::move(set));
    }
    return sets;
}

int true_null_count(const ScenarioConfig& config, double pi1) {
    return config.r_size - false_member_count(pi1, config.r_size);
}

std::vector<double> violation_proportion(const std::vector<BoundSeries>& series,
                                         int true_tau) {
    if (series.empty()) throw input_error("violation_proportion: no series supplied");
    const int horizon = series.front().horizon();
    for (const auto& s : series) {
        if (s.horizon() != horizon)
            throw input_error("violation_proportion: series horizons differ");
    }
    std::vector<double> out(horizon + 1, 0.0);
    for (int t = 0; t <= horizon; ++t) {
        int count = 0;
        for (const auto& s : series)
            if (s.selected_c(t) < true_tau) ++count;
        out[t] = static_cast<double>(count) / static_cast<double>(series.size());
    }
    return out;
}

double sample_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw input_error("sample_quantile: empty sample");
    if (!(prob >= 0.0 && prob <= 1.0))
        throw input_error("sample_quantile: probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = prob * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

MetricsTable run_scenario(const ScenarioConfig& config, PerIterationSink* sink) {
    validate_scenario(config);
    const std::vector<DiscoverySet> sets = build_discovery_sets(config);
    const int n_sets = static_cast<int>(sets.size());
    const int horizon = config.horizon;
    const int iters = config.iterations;

    EquicorrelatedModel model;
    model.m = config.m;
    model.rho = config.rho;
    model.mu.assign(config.m, 0.0);
    for (int i = config.m - config.n_false; i < config.m; ++i)
        model.mu[i] = config.mu_alt;
    validate_model(model);

    // c_store[s][iter * (horizon+1) + t]: reported (mode-selected) bound.
    std::vector<std::vector<int>> c_store(
        n_sets, std::vector<int>(static_cast<std::size_t>(iters) * (horizon + 1), 0));

    const auto run_iteration = [&](int iter) {
        std::mt19937_64 rng = substream_rng(config.seed, static_cast<std::uint64_t>(iter));
        const FamilyUpdater update(config.family);
        std::vector<ElementaryState> states(config.m, init_eprocess(config.family));
        EValueMatrix matrix = make_evalue_matrix(config.m, horizon);
        std::vector<double> y(config.m);
        for (int t = 1; t <= horizon; ++t) {
            sample_equicorrelated(model, rng, y);
            for (int j = 0; j < config.m; ++j) {
                states[j] = update(states[j], y[j]);
                matrix.values[t][j] = e_value(states[j]);
            }
        }
        for (int s = 0; s < n_sets; ++s) {
            const BoundSeries series = bound_series(matrix, sets[s], config.alpha,
                                                    config.ard);
            int* slot = c_store[s].data() + static_cast<std::size_t>(iter) * (horizon + 1);
            for (int t = 0; t <= horizon; ++t) slot[t] = series.selected_c(t);
        }
    };

    unsigned hw = std::thread::hardware_concurrency();
    const int n_threads = std::max(1, std::min<int>(hw == 0 ? 1 : static_cast<int>(hw),
                                                    iters));
    if (n_threads == 1) {
        for (int iter = 0; iter < iters; ++iter) run_iteration(iter);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> failures(n_threads);
        pool.reserve(n_threads);
        for (int tid = 0; tid < n_threads; ++tid) {
            pool.emplace_back([&, tid] {
                try {
                    for (int iter = tid; iter < iters; iter += n_threads)
                        run_iteration(iter);
                } catch (...) {
                    failures[tid] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& failure : failures)
            if (failure) std::rethrow_exception(failure);
    }

    if (sink != nullptr) {
        for (int iter = 0; iter < iters; ++iter) {
            for (int s = 0; s < n_sets; ++s) {
                const int* slot =
                    c_store[s].data() + static_cast<std::size_t>(iter) * (horizon + 1);
                sink->record(iter, config.pi1_list[s], config.r_size,
                             std::span<const int>(slot, horizon + 1));
            }
        }
    }

    MetricsTable table;
    table.rows.reserve(static_cast<std::size_t>(horizon - config.burn_in + 1) * n_sets);
    const double r = static_cast<double>(config.r_size);
    std::vector<double> tdp(iters);
    for (int t = config.burn_in; t <= horizon; ++t) {
        for (int s = 0; s < n_sets; ++s) {
            const int tau = true_null_count(config, config.pi1_list[s]);
            int violations = 0;
            for (int iter = 0; iter < iters; ++iter) {
                const int c = c_store[s][static_cast<std::size_t>(iter) * (horizon + 1) + t];
                if (c < tau) ++violations;
                tdp[iter] = 1.0 - static_cast<double>(c) / r;
            }
            MetricsRow row;
            row.time = t;
            row.pi1 = config.pi1_list[s];
            row.violation_prop =
                static_cast<double>(violations) / static_cast<double>(iters);
            double sum = 0.0;
            for (double v : tdp) sum += v;
            row.mean_bound = sum / static_cast<double>(iters);
            row.q10 = sample_quantile(tdp, 0.10);
            row.q50 = sample_quantile(tdp, 0.50);
            row.q90 = sample_quantile(tdp, 0.90);
            if (!std::isfinite(row.violation_prop) || !std::isfinite(row.mean_bound) ||
                !std::isfinite(row.q10) || !std::isfinite(row.q50) ||
                !std::isfinite(row.q90))
                throw internal_error("non-finite aggregate at time " + std::to_string(t) +
                                     ", pi1=" + short_double(row.pi1));
            table.rows.push_back(row);
        }
    }
    return table;
}

} // namespace etdp
