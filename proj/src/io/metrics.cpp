#include "afa/io/metrics.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>

#include "afa/core/errors.hpp"

namespace afa::io {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

const char* MetricsWriter::header() {
    return "env_steps,updates,mean_task_reward,mean_cost_adjusted_return,"
           "mean_episodic_acquisitions,discharge_rate,mortality_rate,wall_seconds";
}

MetricsWriter::MetricsWriter(const std::string& path, bool deterministic_timing)
    : path_(path), deterministic_(deterministic_timing), start_seconds_(now_seconds()) {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const bool fresh =
        !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw IntegrityError("metrics: cannot open " + path);
    if (fresh) out_ << header() << "\n";
}

void MetricsWriter::append(MetricsRow row) {
    row.wall_seconds = deterministic_ ? 0.0 : now_seconds() - start_seconds_;
    out_ << row.env_steps << ',' << row.updates << ',' << format_double(row.mean_task_reward)
         << ',' << format_double(row.mean_cost_adjusted_return) << ','
         << format_double(row.mean_episodic_acquisitions) << ','
         << format_double(row.discharge_rate) << ',' << format_double(row.mortality_rate)
         << ',' << format_double(row.wall_seconds) << '\n';
    out_.flush();
}

int CsvTable::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<double> CsvTable::column(const std::string& name) const {
    const int idx = column_index(name);
    if (idx < 0) throw ValidationError("csv: missing column " + name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[idx]);
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.empty())
        throw ValidationError("csv: " + path + " has no header row");

    auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        size_t start = 0;
        while (true) {
            const size_t comma = s.find(',', start);
            parts.push_back(s.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return parts;
    };

    CsvTable table;
    table.columns = split(line);
    for (const std::string& c : table.columns)
        if (c.empty()) throw ValidationError("csv: " + path + " has an unnamed column");

    size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != table.columns.size())
            throw ValidationError("csv: " + path + " line " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(table.columns.size()));
        std::vector<double> row(cells.size());
        for (size_t i = 0; i < cells.size(); ++i) {
            const std::string& cell = cells[i];
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                throw ValidationError("csv: " + path + " line " + std::to_string(line_no) +
                                      ": column " + table.columns[i] +
                                      " holds a non-numeric cell");
            row[i] = v;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_tidy_csv(const std::string& path, const std::vector<TidyRow>& rows) {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IntegrityError("tidy csv: cannot open " + path);
    f << "run_id,seed,cost,env_steps,metric,value\n";
    for (const TidyRow& r : rows)
        f << r.run_id << ',' << r.seed << ',' << format_double(r.cost) << ',' << r.env_steps
          << ',' << r.metric << ',' << format_double(r.value) << '\n';
}

}  // namespace afa::io
