#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "etdp/eprocess.hpp"

namespace etdp::cli {

enum class Command { none, bound, simulate, oracle, convert };

struct RunManifest {
    Command command = Command::none;

    std::string evalues_path;      // bound/convert input: e-matrix CSV
    std::string observations_path; // bound input: raw observation CSV
    std::string sets_path;         // bound: labeled discovery sets
    std::string output_path;
    std::string state_path;        // bound: snapshot for incremental runs
    std::string scenario_path;     // simulate
    std::string dump_path;         // simulate: per-iteration raw bounds

    double alpha = 0.0;
    EProcessFamily family;
    bool family_given = false;
    bool ard = false;
    std::uint64_t seed = 42;
    bool seed_given = false;
    int instances = 1000; // oracle
};

// Exit codes: 0 success, 1 input error, 2 configuration error, 3 internal
// numeric error, 4 oracle mismatch.
int run(const RunManifest& manifest, std::ostream& out, std::ostream& err);

// Full front end: argv -> manifest -> run.
int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Command bodies. They throw the library error types; the oracle instead
// returns 4 and prints a reproducer when the comparison fails.
void cmd_bound(const RunManifest& manifest, std::ostream& out);
void cmd_simulate(const RunManifest& manifest, std::ostream& out);
int cmd_oracle(const RunManifest& manifest, std::ostream& out);
void cmd_convert(const RunManifest& manifest, std::ostream& out);

} // namespace etdp::cli
