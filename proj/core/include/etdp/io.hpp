#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "etdp/closed_testing.hpp"
#include "etdp/eprocess.hpp"
#include "etdp/sim.hpp"

namespace etdp {

// Shortest decimal that parses back to exactly the same double.
std::string format_double(double value);

// One CSV block with header `time,h1,...,hm` and consecutive integer times.
// Used for both e-value and raw observation streams; only the former demands
// nonnegative entries.
struct MatrixBlock {
    int m = 0;
    int first_time = 0;
    std::vector<std::vector<double>> rows;

    int last_time() const { return first_time + static_cast<int>(rows.size()) - 1; }
};

MatrixBlock read_matrix_block(std::istream& in, bool nonnegative_required);
MatrixBlock read_matrix_block_file(const std::string& path, bool nonnegative_required);

// Full-history e-matrix: the block must start at time 0 (with an all-ones
// row) or at time 1 (the pre-data row is implied).
EValueMatrix read_evalue_matrix(std::istream& in);
EValueMatrix read_evalue_matrix_file(const std::string& path);

void write_evalue_matrix(const EValueMatrix& matrix, std::ostream& out);
void write_evalue_matrix_file(const EValueMatrix& matrix, const std::string& path);

// Bound CSV: `time,set_label,c_inst,c_ard,tdp_inst,tdp_ard`, one row per
// (time, set), time-major. from_time supports appending on resumption.
void write_bound_header(std::ostream& out);
void write_bound_rows(const LabeledBoundSeries& series, int from_time, std::ostream& out);

// Metrics CSV: `time,pi1,violation_prop,mean_bound,q10,q50,q90`.
void write_metrics_csv(const MetricsTable& table, std::ostream& out);
void write_metrics_csv_file(const MetricsTable& table, const std::string& path);

// Discovery-set file: one `label:1,2,5-9` per line, `#` comments allowed.
std::vector<DiscoverySet> read_sets(std::istream& in);
std::vector<DiscoverySet> read_sets_file(const std::string& path);

// Scenario file: flat `key = value` lines, or one JSON object if the first
// non-space character is '{'.
ScenarioConfig read_scenario(std::istream& in);
ScenarioConfig read_scenario_file(const std::string& path);

// Persisted bound-command state, enough to continue a stream exactly where
// it stopped.
struct SetSnapshot {
    std::string label;
    std::vector<int> indices;
    int c_min = 0; // running minimum of instantaneous bounds through `time`
};

struct Snapshot {
    int schema_version = 1;
    std::string mode; // "observations" or "evalues"
    int m = 0;
    double alpha = 0.0;
    int time = 0; // last consumed time index
    EProcessFamily family;       // observations mode only
    std::vector<ElementaryState> states; // observations mode only
    std::vector<SetSnapshot> sets;
};

void write_snapshot(const Snapshot& snapshot, const std::string& path);
Snapshot read_snapshot(const std::string& path);

} // namespace etdp
