#include "etdp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "etdp/closed_testing.hpp"
#include "etdp/distributions.hpp"
#include "etdp/errors.hpp"
#include "etdp/io.hpp"
#include "etdp/sim.hpp"

namespace etdp::cli {

namespace {

bool same_family(const EProcessFamily& a, const EProcessFamily& b) {
    return a.kind == b.kind && a.delta == b.delta && a.delta_min == b.delta_min &&
           a.quadrature_nodes == b.quadrature_nodes && a.prior_side == b.prior_side;
}

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

} // namespace

void cmd_bound(const RunManifest& manifest, std::ostream&) {
    const bool obs_mode = !manifest.observations_path.empty();
    const bool ev_mode = !manifest.evalues_path.empty();
    if (obs_mode == ev_mode)
        throw config_error("bound: exactly one of --observations and --evalues is required");
    if (manifest.sets_path.empty()) throw config_error("bound: --sets is required");
    if (manifest.output_path.empty()) throw config_error("bound: --output is required");
    if (!(manifest.alpha > 0.0 && manifest.alpha < 1.0))
        throw config_error("bound: --alpha must lie in (0, 1)");
    if (obs_mode) {
        if (!manifest.family_given)
            throw config_error("bound: observation input requires --family");
        validate_family(manifest.family);
    }

    std::vector<DiscoverySet> sets = read_sets_file(manifest.sets_path);

    Snapshot snap;
    bool resuming = false;
    if (!manifest.state_path.empty() && std::filesystem::exists(manifest.state_path)) {
        snap = read_snapshot(manifest.state_path);
        resuming = true;
    }
    const std::string mode = obs_mode ? "observations" : "evalues";
    if (resuming) {
        if (snap.mode != mode)
            throw config_error("refusing to resume: snapshot mode '" + snap.mode +
                               "' does not match input mode '" + mode + "'");
        if (snap.alpha != manifest.alpha)
            throw config_error("refusing to resume: alpha differs from the snapshot");
        if (obs_mode && !same_family(snap.family, manifest.family))
            throw config_error("refusing to resume: e-process family parameters changed");
        if (snap.sets.size() != sets.size())
            throw config_error("refusing to resume: discovery sets changed");
        for (std::size_t i = 0; i < sets.size(); ++i) {
            if (snap.sets[i].label != sets[i].label ||
                snap.sets[i].indices != sets[i].indices)
                throw config_error("refusing to resume: discovery set '" + sets[i].label +
                                   "' changed");
        }
    }

    const MatrixBlock block =
        read_matrix_block_file(obs_mode ? manifest.observations_path : manifest.evalues_path,
                               /*nonnegative_required=*/!obs_mode);
    const int m = block.m;
    if (resuming && m != snap.m)
        throw config_error("refusing to resume: hypothesis count changed from " +
                           std::to_string(snap.m) + " to " + std::to_string(m));
    for (const auto& set : sets) validate_discovery_set(set, m);

    if (obs_mode) {
        if (block.first_time < 1)
            throw input_error("observation times are 1-based (time 0 is the pre-data state)");
        if (!resuming && block.first_time != 1)
            throw input_error("fresh observation stream must start at time 1, got " +
                              std::to_string(block.first_time));
    } else {
        if (!resuming && block.first_time > 1)
            throw input_error("e-matrix must start at time 0 or 1, got time " +
                              std::to_string(block.first_time));
        if (block.first_time == 0) {
            for (double v : block.rows[0])
                if (v != 1.0)
                    throw input_error("time-0 row must be all ones (pre-data e-values)");
        }
    }
    const int start_time = resuming ? snap.time + 1 : 0;
    if (resuming && block.first_time > start_time)
        throw input_error("input starts at time " + std::to_string(block.first_time) +
                          " but resume state ends at time " + std::to_string(snap.time));

    struct SetCarry {
        const DiscoverySet* set;
        int c_min;
    };
    std::vector<SetCarry> carries;
    carries.reserve(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i)
        carries.push_back({&sets[i], resuming ? snap.sets[i].c_min : sets[i].size()});

    std::vector<ElementaryState> states;
    std::optional<FamilyUpdater> update;
    if (obs_mode) {
        update.emplace(manifest.family);
        if (resuming) states = snap.states;
        else states.assign(m, init_eprocess(manifest.family));
    }

    std::ofstream outfile(manifest.output_path,
                          resuming ? std::ios::app : std::ios::trunc);
    if (!outfile)
        throw input_error("cannot open '" + manifest.output_path + "' for writing");
    if (!resuming) write_bound_header(outfile);

    const auto emit = [&](int t, std::span<const double> erow) {
        for (auto& carry : carries) {
            const int c = shortcut_bound(erow, *carry.set, manifest.alpha).first;
            carry.c_min = std::min(carry.c_min, c);
            const double r = static_cast<double>(carry.set->size());
            outfile << t << ',' << carry.set->label << ',' << c << ',' << carry.c_min
                    << ',' << format_double(1.0 - static_cast<double>(c) / r) << ','
                    << format_double(1.0 - static_cast<double>(carry.c_min) / r) << '\n';
        }
    };

    int processed_through = resuming ? snap.time : -1;
    if (!resuming && (obs_mode || block.first_time == 1)) {
        const std::vector<double> ones(m, 1.0);
        emit(0, ones);
        processed_through = 0;
    }
    std::vector<double> erow(m);
    for (std::size_t i = 0; i < block.rows.size(); ++i) {
        const int t = block.first_time + static_cast<int>(i);
        if (t <= processed_through) continue; // already consumed before the snapshot
        if (obs_mode) {
            for (int j = 0; j < m; ++j) {
                states[j] = (*update)(states[j], block.rows[i][j]);
                erow[j] = e_value(states[j]);
            }
            emit(t, erow);
        } else {
            emit(t, block.rows[i]);
        }
        processed_through = t;
    }
    outfile.flush();
    if (!outfile)
        throw input_error("failed writing bounds to '" + manifest.output_path + "'");

    if (!manifest.state_path.empty()) {
        Snapshot next;
        next.mode = mode;
        next.m = m;
        next.alpha = manifest.alpha;
        next.time = processed_through;
        if (obs_mode) {
            next.family = manifest.family;
            next.states = states;
        }
        for (const auto& carry : carries)
            next.sets.push_back({carry.set->label, carry.set->indices, carry.c_min});
        write_snapshot(next, manifest.state_path);
    }
}

void cmd_simulate(const RunManifest& manifest, std::ostream& out) {
    if (manifest.scenario_path.empty()) throw config_error("simulate: --scenario is required");
    if (manifest.output_path.empty()) throw config_error("simulate: --output is required");

    ScenarioConfig config = read_scenario_file(manifest.scenario_path);
    if (manifest.seed_given) config.seed = manifest.seed;
    if (manifest.ard) config.ard = true;
    validate_scenario(config);

    class CsvDumpSink : public PerIterationSink {
      public:
        CsvDumpSink(const std::string& path, int burn_in)
            : burn_in_(burn_in), out_(path, std::ios::trunc) {
            if (!out_) throw input_error("cannot open '" + path + "' for writing");
            out_ << "iteration,time,pi1,c,tdp\n";
        }
        void record(int iteration, double pi1, int set_size,
                    std::span<const int> c_selected) override {
            for (int t = burn_in_; t < static_cast<int>(c_selected.size()); ++t) {
                out_ << iteration << ',' << t << ',' << format_double(pi1) << ','
                     << c_selected[t] << ','
                     << format_double(1.0 - static_cast<double>(c_selected[t]) /
                                                static_cast<double>(set_size))
                     << '\n';
            }
        }
        bool good() const { return static_cast<bool>(out_); }

      private:
        int burn_in_;
        std::ofstream out_;
    };

    std::unique_ptr<CsvDumpSink> sink;
    if (!manifest.dump_path.empty())
        sink = std::make_unique<CsvDumpSink>(manifest.dump_path, config.burn_in);

    const MetricsTable table = run_scenario(config, sink.get());
    if (sink && !sink->good())
        throw input_error("failed writing iteration dump to '" + manifest.dump_path + "'");
    write_metrics_csv_file(table, manifest.output_path);

    double max_violation = 0.0;
    std::map<double, int> convergence; // pi1 -> first reported time within 0.05
    for (const auto& row : table.rows) {
        max_violation = std::max(max_violation, row.violation_prop);
        if (!convergence.count(row.pi1) && std::abs(row.mean_bound - row.pi1) <= 0.05)
            convergence[row.pi1] = row.time;
    }
    out << "simulate: iterations=" << config.iterations
        << " max_violation=" << format_double(max_violation) << " convergence(0.05):";
    for (double pi1 : config.pi1_list) {
        out << " pi1=" << format_double(pi1) << ":";
        const auto it = convergence.find(pi1);
        if (it == convergence.end()) out << "never";
        else out << "t" << it->second;
    }
    out << '\n';
}

int cmd_oracle(const RunManifest& manifest, std::ostream& out) {
    if (manifest.instances < 1) throw config_error("oracle: --instances must be positive");
    constexpr int kMaxM = 12;
    const double alphas[] = {0.05, 0.2};

    int checked = 0;
    const auto compare = [&](const std::vector<double>& e, const DiscoverySet& set,
                             double alpha, const std::string& origin) {
        const int s = shortcut_bound(e, set, alpha).first;
        const int b = brute_force_bound(e, set, alpha);
        ++checked;
        if (s == b) return true;
        out << "MISMATCH (" << origin << ")\n";
        out << "alpha=" << format_double(alpha) << '\n';
        out << "e=";
        for (std::size_t i = 0; i < e.size(); ++i)
            out << (i ? "," : "") << format_double(e[i]);
        out << '\n';
        out << "R=" << join_ints(set.indices) << '\n';
        out << "shortcut=" << s << " brute_force=" << b << '\n';
        return false;
    };

    // Adversarial ties: every e-value exactly at the rejection threshold.
    for (double alpha : alphas) {
        for (int m = 1; m <= kMaxM; ++m) {
            const std::vector<double> e(m, 1.0 / alpha);
            std::vector<DiscoverySet> shapes;
            DiscoverySet full;
            for (int i = 1; i <= m; ++i) full.indices.push_back(i);
            full.label = "full";
            shapes.push_back(full);
            DiscoverySet front;
            for (int i = 1; i <= (m + 1) / 2; ++i) front.indices.push_back(i);
            front.label = "front";
            shapes.push_back(front);
            DiscoverySet last;
            last.indices.push_back(m);
            last.label = "last";
            shapes.push_back(last);
            for (const auto& set : shapes) {
                if (!compare(e, set, alpha, "tie battery m=" + std::to_string(m)))
                    return 4;
            }
        }
    }

    const int ties = checked;
    for (int i = 0; i < manifest.instances; ++i) {
        std::mt19937_64 rng = substream_rng(manifest.seed, static_cast<std::uint64_t>(i));
        const int m = 1 + static_cast<int>(rng() % kMaxM);
        std::vector<double> e(m);
        for (int j = 0; j < m; ++j) e[j] = std::exp(-3.0 + 8.0 * unit_uniform(rng));
        std::uint32_t mask = 0;
        while (mask == 0)
            mask = static_cast<std::uint32_t>(rng()) & ((1u << m) - 1u);
        DiscoverySet set;
        set.label = "instance";
        for (int j = 0; j < m; ++j)
            if (mask & (1u << j)) set.indices.push_back(j + 1);
        const double alpha = (rng() & 1u) ? 0.2 : 0.05;
        if (!compare(e, set, alpha,
                     "instance " + std::to_string(i) + " of seed " +
                         std::to_string(manifest.seed)))
            return 4;
    }

    out << "oracle: " << checked << " instances (" << ties << " adversarial ties, "
        << manifest.instances << " random with seed " << manifest.seed
        << "), 0 mismatches\n";
    return 0;
}

void cmd_convert(const RunManifest& manifest, std::ostream&) {
    if (manifest.evalues_path.empty()) throw config_error("convert: --evalues is required");
    if (manifest.output_path.empty()) throw config_error("convert: --output is required");

    const EValueMatrix matrix = read_evalue_matrix_file(manifest.evalues_path);
    const int horizon = matrix.horizon();
    EValueMatrix p;
    p.m = matrix.m;
    p.values.assign(matrix.values.size(), std::vector<double>(matrix.m, 1.0));
    std::vector<double> column(matrix.values.size());
    for (int j = 0; j < matrix.m; ++j) {
        for (int t = 0; t <= horizon; ++t) column[t] = matrix.values[t][j];
        const std::vector<double> pcol = e_to_p_process(column);
        for (int t = 0; t <= horizon; ++t) p.values[t][j] = pcol[t];
    }
    write_evalue_matrix_file(p, manifest.output_path);

    // Re-read what actually landed on disk and recheck the p-process shape.
    const MatrixBlock check = read_matrix_block_file(manifest.output_path, true);
    for (int j = 0; j < check.m; ++j) {
        double prev = 1.0;
        for (std::size_t t = 0; t < check.rows.size(); ++t) {
            const double v = check.rows[t][j];
            if (!(v > 0.0 && v <= 1.0))
                throw internal_error("written p-process leaves (0, 1] at column h" +
                                     std::to_string(j + 1));
            if (v > prev)
                throw internal_error("written p-process increases at column h" +
                                     std::to_string(j + 1));
            prev = v;
        }
    }
}

int run(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
    try {
        switch (manifest.command) {
            case Command::bound: cmd_bound(manifest, out); return 0;
            case Command::simulate: cmd_simulate(manifest, out); return 0;
            case Command::oracle: return cmd_oracle(manifest, out);
            case Command::convert: cmd_convert(manifest, out); return 0;
            case Command::none: break;
        }
        err << "error: no command selected\n";
        return 2;
    } catch (const input_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const config_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const internal_error& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
}

int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunManifest manifest;
    std::string family_str;
    std::string prior_side_str;

    CLI::App app{"Anytime-valid simultaneous lower confidence bounds on the true "
                 "discovery proportion"};
    app.require_subcommand(1);

    CLI::App* bound = app.add_subcommand(
        "bound", "Bound series for labeled discovery sets from a data stream");
    bound->add_option("--evalues", manifest.evalues_path,
                      "Precomputed e-value matrix CSV (time,h1,...,hm)");
    bound->add_option("--observations", manifest.observations_path,
                      "Raw observation CSV, one subject per row");
    bound->add_option("--sets", manifest.sets_path,
                      "Discovery sets, one 'label:1,2,5-9' per line")
        ->required();
    bound->add_option("--alpha", manifest.alpha, "Simultaneous level in (0,1)")->required();
    bound->add_option("--output", manifest.output_path, "Destination bound CSV")->required();
    bound->add_option("--resume", manifest.state_path,
                      "State snapshot: loaded when present, rewritten after the run");
    bound->add_option("--family", family_str, "gaussian_lr, t_lr, or mom");
    bound->add_option("--delta", manifest.family.delta,
                      "Alternative effect size (gaussian_lr, t_lr)");
    bound->add_option("--delta-min", manifest.family.delta_min,
                      "Minimal relevant effect (mom)");
    bound->add_option("--quadrature-nodes", manifest.family.quadrature_nodes,
                      "Moment-prior quadrature nodes (1 = point mass)");
    bound->add_option("--prior-side", prior_side_str, "one_sided or symmetric");
    bound->add_flag("--ard", manifest.ard,
                    "Report running-minimum (accept-to-reject) bounds");

    CLI::App* simulate =
        app.add_subcommand("simulate", "Monte-Carlo replication study from a scenario file");
    simulate->add_option("--scenario", manifest.scenario_path,
                         "Scenario file (key = value lines or one JSON object)")
        ->required();
    simulate->add_option("--output", manifest.output_path, "Destination metrics CSV")
        ->required();
    CLI::Option* sim_seed =
        simulate->add_option("--seed", manifest.seed, "Override the scenario seed");
    simulate->add_flag("--ard", manifest.ard, "Force running-minimum reporting");
    simulate->add_option("--dump-iterations", manifest.dump_path,
                         "Also write every iteration's bounds to this CSV");

    CLI::App* oracle = app.add_subcommand(
        "oracle", "Cross-check the shortcut against exponential closed testing");
    oracle->add_option("--instances", manifest.instances, "Random instances to draw");
    oracle->add_option("--seed", manifest.seed, "Seed for the random instances");

    CLI::App* convert =
        app.add_subcommand("convert", "Turn an e-value matrix into p-processes");
    convert->add_option("--evalues", manifest.evalues_path, "Input e-matrix CSV")
        ->required();
    convert->add_option("--output", manifest.output_path, "Destination p-process CSV")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!family_str.empty()) {
            manifest.family.kind = family_kind_from_string(family_str);
            manifest.family_given = true;
        }
        if (!prior_side_str.empty())
            manifest.family.prior_side = prior_side_from_string(prior_side_str);
    } catch (const config_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    if (bound->parsed()) manifest.command = Command::bound;
    else if (simulate->parsed()) manifest.command = Command::simulate;
    else if (oracle->parsed()) manifest.command = Command::oracle;
    else if (convert->parsed()) manifest.command = Command::convert;
    manifest.seed_given = sim_seed->count() > 0;

    return run(manifest, out, err);
}

} // namespace etdp::cli
