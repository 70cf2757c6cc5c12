#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "lowrank_var/estimators.hpp"

namespace lrvar {

// Multivariate series read from CSV: header of series names, one row per
// time step (oldest first), optional leading `date` column.
struct DataSet {
  std::vector<std::string> names;
  std::vector<std::string> dates;  // empty when there is no date column
  Matrix values;                   // series x time
  long rejected_rows = 0;          // rows dropped for missing values

  Index length() const { return values.cols(); }
  Index index_of(const std::string& name) const;  // -1 if absent
};

// Empty, "NA", "NaN" or "nan" cells mark a row as missing (rejected and
// counted); any other non-numeric cell raises DataError with the line number.
DataSet read_dataset_csv(std::istream& in);
DataSet load_dataset(const std::filesystem::path& path);

enum class ForecastMode { rolling, iterated };

struct ForecastModel {
  enum class Kind { constant_trend, independent_ar1, estimator };
  std::string label;
  Kind kind = Kind::estimator;
  EstimatorSpec spec;  // used when kind == estimator
};

struct ForecastTask {
  std::filesystem::path dataset;
  std::vector<std::string> target_columns;
  // Training rows: a count, or the date of the last training row.
  std::variant<long, std::string> train_end = 0L;
  long horizon = 0;  // test rows after the training window; 0 = all
  ForecastMode mode = ForecastMode::rolling;
  std::vector<ForecastModel> models;

  void validate() const;
};

struct ForecastScore {
  std::string model;
  std::string target;
  double mse = 0.0;
};

struct ForecastPrediction {
  long row = 0;  // 0-based row of the dataset (after rejections)
  std::string date;
  std::string model;
  std::string series;
  double actual = 0.0;
  double predicted = 0.0;
};

struct ForecastReport {
  std::vector<ForecastScore> scores;
  std::vector<ForecastPrediction> predictions;
  std::map<std::string, int> selected_ranks;
  long train_rows = 0;
  long test_rows = 0;
  long rejected_rows = 0;
  std::vector<std::string> warnings;
};

// Fits every model on the mean-centred training window and scores
// predictions on the test window in original units. Rolling mode predicts
// each test row from the observed previous row; iterated mode propagates
// the last training row h steps ahead.
ForecastReport run_forecast_task(const ForecastTask& task, const DataSet& data);

// forecast_mse.csv, predictions.csv and forecast.json.
void write_forecast_report(const ForecastReport& report,
                           const std::filesystem::path& out_dir);

}  // namespace lrvar
