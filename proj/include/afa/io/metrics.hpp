#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace afa::io {

// One greedy-evaluation measurement during RL training. Discharge/mortality
// are only meaningful for the sepsis task and stay 0 elsewhere.
struct MetricsRow {
    long env_steps = 0;
    long updates = 0;
    double mean_task_reward = 0.0;
    double mean_cost_adjusted_return = 0.0;
    double mean_episodic_acquisitions = 0.0;
    double discharge_rate = 0.0;
    double mortality_rate = 0.0;
    double wall_seconds = 0.0;
};

// Append-only CSV stream with the fixed training-metrics schema. In
// deterministic mode wall_seconds is forced to 0 so two runs with the same
// seed produce byte-identical files.
class MetricsWriter {
public:
    MetricsWriter(const std::string& path, bool deterministic_timing);

    void append(MetricsRow row);
    const std::string& path() const { return path_; }

    static const char* header();

private:
    std::string path_;
    std::ofstream out_;
    bool deterministic_;
    double start_seconds_;
};

// Generic numeric CSV with a header row; used to read metrics back for
// plotting and summarizing.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // one inner vector per data row

    int column_index(const std::string& name) const;  // -1 when absent
    std::vector<double> column(const std::string& name) const;
};

// Parses a CSV written by this project. Malformed cells, ragged rows, or an
// empty (headerless) file raise ValidationError naming the column involved.
CsvTable read_csv(const std::string& path);

// Long-format measurement emitted by evaluation so external tools can rebuild
// every figure: (run_id, seed, cost, env_steps, metric, value).
struct TidyRow {
    std::string run_id;
    uint64_t seed = 0;
    double cost = 0.0;
    long env_steps = 0;
    std::string metric;
    double value = 0.0;
};

void write_tidy_csv(const std::string& path, const std::vector<TidyRow>& rows);

// Canonical float formatting shared by every CSV writer (shortest round-trip
// form, so re-emitting parsed data is byte-stable).
std::string format_double(double v);

}  // namespace afa::io
