#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace htr::exp {

/// One results CSV record: a finished (or failed) matrix cell.
struct ResultRow {
  std::string dataset;
  std::string model;
  std::size_t k = 0;
  std::size_t j = 0;
  std::uint64_t seed = 0;
  double test_cer = 0.0;
  double val_cer_best = 0.0;
  std::size_t params = 0;
  std::size_t steps = 0;
  std::string status = "ok";
  std::string subset_hash;
  std::string cell_hash;

  bool ok() const { return status == "ok"; }
  bool operator==(const ResultRow&) const = default;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
};

inline constexpr const char* kResultsHeader =
    "dataset,model,K,J,seed,test_CER,val_CER_best,params,steps,status,subset_hash,cell_hash";

/// CSV line without the trailing newline; numbers use the shortest exact form.
std::string format_row(const ResultRow& row);
ResultRow parse_row(std::string_view line);
/// Reads a results file. An unterminated final line (interrupted write) is ignored.
ResultsTable read_results(const std::filesystem::path& path);

/// Append-only writer. Creates the file with its header, drops any unterminated final
/// line left by an interrupted write, and flushes every row as one complete line.
class ResultsWriter {
 public:
  explicit ResultsWriter(const std::filesystem::path& path);
  void append(const ResultRow& row);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Multi-script run paired with its single-script counterpart.
struct DeltaRow {
  std::string dataset;
  std::string model;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string subset_hash;
  double cer_single = 0.0;
  double cer_multi = 0.0;
  double delta = 0.0;
};

/// Pairs each ok J=2 row with the ok J=0 row of equal (dataset, model, K, seed, subset
/// hash). Rows repeated under the same cell hash count once.
std::vector<DeltaRow> pair_deltas(const ResultsTable& table);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};
Aggregate aggregate(const std::vector<double>& values);

/// Seed-averaged ΔCER per (dataset, K) row and model column.
struct Table2 {
  std::vector<std::string> models;
  std::map<std::pair<std::string, std::size_t>, std::map<std::string, Aggregate>> cells;

  const Aggregate* find(const std::string& dataset, std::size_t k, const std::string& model) const;
  /// Fixed-width text table; missing entries are blank.
  std::string format() const;
};

/// Throws DataError when no pair exists.
Table2 report_table2(const ResultsTable& table,
                     const std::vector<std::string>& models = {"cnn", "cnn-expand", "crnn"});

struct SeriesPoint {
  std::size_t k = 0;
  std::size_t j = 0;
  double mean_cer = 0.0;
  double std_cer = 0.0;
  bool operator==(const SeriesPoint&) const = default;
};

/// Test CER of ok runs over seeds, per (K, J), for one dataset and model.
struct Series {
  std::string dataset;
  std::string model;
  std::vector<SeriesPoint> points;  // sorted by K then J
  bool operator==(const Series&) const = default;
};

std::vector<Series> plot_series(const ResultsTable& table, const std::vector<std::string>& datasets,
                                const std::vector<std::string>& models);
inline constexpr const char* kSeriesHeader = "K\tJ\tmean_CER\tstd_CER";
std::filesystem::path series_path(const std::filesystem::path& dir, const std::string& dataset,
                                  const std::string& model);
void write_series(const std::filesystem::path& path, const Series& s);
Series read_series(const std::filesystem::path& path, const std::string& dataset = {},
                   const std::string& model = {});
/// One file per (dataset, model), header-only when there is no data. Returns the paths.
std::vector<std::filesystem::path> emit_plotdata(const ResultsTable& table, const std::filesystem::path& dir,
                                                 const std::vector<std::string>& datasets,
                                                 const std::vector<std::string>& models);

}  // namespace htr::exp
