#include "lowrank_var/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "lowrank_var/csv_io.hpp"
#include "lowrank_var/errors.hpp"

namespace lrvar {

namespace {

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" ||
         cell == "na" || cell == "N/A";
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

long training_rows(const ForecastTask& task, const DataSet& data) {
  if (const auto* rows = std::get_if<long>(&task.train_end)) return *rows;
  const auto& date = std::get<std::string>(task.train_end);
  if (data.dates.empty()) {
    throw ConfigError("forecast: train_end is a date but the dataset has no "
                      "date column");
  }
  const auto it = std::find(data.dates.begin(), data.dates.end(), date);
  if (it == data.dates.end()) {
    throw ConfigError("forecast: train_end date '" + date +
                      "' not found in the dataset");
  }
  return static_cast<long>(it - data.dates.begin()) + 1;
}

}  // namespace

Index DataSet::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Index>(it - names.begin());
}

DataSet read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset: empty file");
  std::vector<std::string> header;
  for (const auto& h : split_csv_line(line)) header.emplace_back(trim(h));
  DataSet data;
  const bool has_dates = !header.empty() && lower(header.front()) == "date";
  const std::size_t first = has_dates ? 1 : 0;
  if (header.size() <= first) throw DataError("dataset: no series columns");
  std::set<std::string> seen;
  for (std::size_t i = first; i < header.size(); ++i) {
    if (header[i].empty()) {
      throw DataError("dataset line 1: empty name for column " +
                      std::to_string(i + 1));
    }
    if (!seen.insert(header[i]).second) {
      throw DataError("dataset line 1: duplicate column '" + header[i] + "'");
    }
    data.names.push_back(header[i]);
  }

  const std::size_t m = data.names.size();
  std::vector<double> values;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("dataset line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    std::vector<double> row(m);
    bool missing = false;
    for (std::size_t i = first; i < cells.size(); ++i) {
      const auto cell = trim(cells[i]);
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      const auto v = parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        throw DataError("dataset line " + std::to_string(line_no) +
                        ", column '" + header[i] + "': non-numeric value '" +
                        std::string(cell) + "'");
      }
      row[i - first] = *v;
    }
    if (missing) {
      ++data.rejected_rows;
      continue;
    }
    if (has_dates) data.dates.emplace_back(trim(cells[0]));
    values.insert(values.end(), row.begin(), row.end());
  }
  const auto t = static_cast<Index>(values.size() / std::max<std::size_t>(m, 1));
  if (t == 0) throw DataError("dataset: no complete rows");
  data.values = Eigen::Map<const Matrix>(values.data(), static_cast<Index>(m), t);
  return data;
}

DataSet load_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_dataset_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void ForecastTask::validate() const {
  if (target_columns.empty()) throw DomainError("forecast: no target columns");
  if (const auto* rows = std::get_if<long>(&train_end); rows && *rows < 2) {
    throw DomainError("forecast: training window needs at least 2 rows");
  }
  if (horizon < 0) throw DomainError("forecast: horizon must be >= 0");
  if (models.empty()) throw DomainError("forecast: no estimators");
  std::set<std::string> labels;
  for (const auto& m : models) {
    if (!labels.insert(m.label).second) {
      throw DomainError("forecast: duplicate estimator label '" + m.label + "'");
    }
  }
}

ForecastReport run_forecast_task(const ForecastTask& task, const DataSet& data) {
  task.validate();
  std::vector<Index> targets;
  for (const auto& name : task.target_columns) {
    const Index i = data.index_of(name);
    if (i < 0) {
      throw ConfigError("forecast: target column '" + name +
                        "' not in the dataset header");
    }
    targets.push_back(i);
  }
  const long total = data.length();
  const long train = training_rows(task, data);
  if (train < 2) {
    throw ConfigError("forecast: training window needs at least 2 rows");
  }
  if (train >= total) {
    throw ConfigError("forecast: training window (" + std::to_string(train) +
                      " rows) leaves no test rows out of " +
                      std::to_string(total));
  }
  const long end =
      task.horizon > 0 ? std::min(total, train + task.horizon) : total;

  ForecastReport report;
  report.train_rows = train;
  report.test_rows = end - train;
  report.rejected_rows = data.rejected_rows;
  if (data.rejected_rows > 0) {
    report.warnings.push_back(std::to_string(data.rejected_rows) +
                              " rows with missing values were dropped; the "
                              "rows around each gap are treated as consecutive");
  }

  const Matrix& x = data.values;
  const Vector mu = x.leftCols(train).rowwise().mean();
  const Matrix centred = x.leftCols(train).colwise() - mu;
  const LaggedPairs pairs{centred.rightCols(train - 1),
                          centred.leftCols(train - 1)};
  const Index m = x.rows();

  for (const auto& model : task.models) {
    Matrix q;
    switch (model.kind) {
      case ForecastModel::Kind::constant_trend:
        q = Matrix::Identity(m, m);
        break;
      case ForecastModel::Kind::independent_ar1: {
        std::vector<std::string> warnings;
        q = fit_diagonal_ar(pairs, &warnings).asDiagonal();
        for (auto& w : warnings) report.warnings.push_back(model.label + ": " + w);
        break;
      }
      case ForecastModel::Kind::estimator: {
        FitResult fitted = fit(pairs, model.spec);
        q = std::move(fitted.matrix);
        report.selected_ranks[model.label] = fitted.selected_rank;
        for (auto& w : fitted.warnings) {
          report.warnings.push_back(model.label + ": " + w);
        }
        break;
      }
    }

    std::vector<double> sq(targets.size(), 0.0);
    Vector state = x.col(train - 1) - mu;
    for (long t = train; t < end; ++t) {
      if (task.mode == ForecastMode::rolling) {
        state = x.col(t - 1) - mu;
      }
      state = q * state;
      const Vector pred = mu + state;
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const Index i = targets[k];
        const double err = x(i, t) - pred(i);
        sq[k] += err * err;
        report.predictions.push_back(ForecastPrediction{
            t, data.dates.empty() ? std::string() : data.dates[t], model.label,
            data.names[static_cast<std::size_t>(i)], x(i, t), pred(i)});
      }
    }
    for (std::size_t k = 0; k < targets.size(); ++k) {
      report.scores.push_back(ForecastScore{
          model.label, task.target_columns[k],
          sq[k] / static_cast<double>(report.test_rows)});
    }
  }
  return report;
}

void write_forecast_report(const ForecastReport& report,
                           const std::filesystem::path& out_dir) {
  {
    auto out = open_output(out_dir / "forecast_mse.csv");
    out << "model,target,mse\n";
    for (const auto& s : report.scores) {
      out << csv_field(s.model) << ',' << csv_field(s.target) << ','
          << format_double(s.mse) << '\n';
    }
  }
  {
    auto out = open_output(out_dir / "predictions.csv");
    out << "row,date,model,series,actual,predicted\n";
    for (const auto& p : report.predictions) {
      out << p.row << ',' << csv_field(p.date) << ',' << csv_field(p.model)
          << ',' << csv_field(p.series) << ',' << format_double(p.actual) << ','
          << format_double(p.predicted) << '\n';
    }
  }
  nlohmann::json j;
  j["train_rows"] = report.train_rows;
  j["test_rows"] = report.test_rows;
  j["rejected_rows"] = report.rejected_rows;
  j["selected_ranks"] = report.selected_ranks;
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : report.scores) {
    scores.push_back({{"model", s.model}, {"target", s.target}, {"mse", s.mse}});
  }
  j["scores"] = scores;
  j["warnings"] = report.warnings;
  auto out = open_output(out_dir / "forecast.json");
  out << j.dump(2) << '\n';
}

}  // namespace lrvar
