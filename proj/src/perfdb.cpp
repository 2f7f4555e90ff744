#include "looptune/perfdb.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

namespace looptune {

namespace fs = std::filesystem;

namespace {

struct Field {
  std::string text;
  bool quoted = false;
};

using Record = std::vector<Field>;

// Parses complete CSV records; a trailing record without its line break is
// treated as torn and dropped.
std::vector<Record> parse_csv(std::string_view text) {
  std::vector<Record> records;
  Record record;
  Field field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.text += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.text += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field.quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field = {};
      field_started = false;
    } else if (c == '\n') {
      record.push_back(std::move(field));
      records.push_back(std::move(record));
      record = {};
      field = {};
      field_started = false;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else {
      field.text += c;
      field_started = true;
    }
  }
  return records;
}

bool needs_quotes(std::string_view s) {
  if (s.empty()) return true;
  if (s.front() == ' ' || s.back() == ' ') return true;
  return s.find_first_of(",\"\n\r") != std::string_view::npos;
}

std::string csv_field(std::string_view s) {
  if (!needs_quotes(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

double parse_double(const std::string& s, const char* what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DbError(std::string("bad ") + what + " '" + s + "'");
  return value;
}

std::size_t parse_index(const std::string& s) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value == 0)
    throw DbError("bad row index '" + s + "'");
  return value;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_sequence(const std::vector<ResultRow>& rows, const char* source) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].index != i + 1)
      throw DbError(std::string(source) + " row " + std::to_string(i + 1) + " has index " +
                    std::to_string(rows[i].index));
  }
}

void sync_file(std::FILE* f, const fs::path& path) {
  if (std::fflush(f) != 0 || ::fsync(::fileno(f)) != 0)
    throw DbError("cannot flush '" + path.string() + "'");
}

void write_durably(const fs::path& path, const std::string& data) {
  const fs::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw DbError("cannot write '" + tmp.string() + "'");
  const bool ok = std::fwrite(data.data(), 1, data.size(), f) == data.size();
  sync_file(f, tmp);
  std::fclose(f);
  if (!ok) throw DbError("cannot write '" + tmp.string() + "'");
  fs::rename(tmp, path);
}

std::FILE* open_append(const fs::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw DbError("cannot open '" + path.string() + "' for appending");
  return f;
}

}  // namespace

std::vector<std::string> column_names(const ParamSpace& space) {
  std::vector<std::string> names;
  for (const auto& p : space.parameters()) names.push_back(p.name);
  return names;
}

ResultRow make_row(std::size_t index, const TrialRecord& trial, std::string timestamp) {
  return ResultRow{index, trial.configuration, trial.metric, trial.elapsed, trial.status,
                   std::move(timestamp)};
}

TrialRecord to_trial(const ResultRow& row) {
  TrialRecord trial;
  trial.configuration = row.configuration;
  trial.metric = row.metric;
  trial.elapsed = row.elapsed;
  trial.status = row.status;
  return trial;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw DbError("cannot format number");
  return std::string(buf, ptr);
}

std::string csv_header(const std::vector<std::string>& columns) {
  std::string out = "index";
  for (const auto& name : columns) out += "," + csv_field(name);
  out += ",metric,elapsed,status,timestamp\n";
  return out;
}

std::string csv_line(const ResultRow& row, const std::vector<std::string>& columns) {
  std::string out = std::to_string(row.index);
  for (const auto& name : columns) {
    out += ',';
    if (const auto& value = row.configuration.at(name)) out += csv_field(*value);
  }
  out += ',' + format_double(row.metric);
  out += ',' + format_double(row.elapsed);
  out += ',' + std::string(to_string(row.status));
  out += ',' + csv_field(row.timestamp);
  out += '\n';
  return out;
}

std::string json_line(const ResultRow& row, const std::vector<std::string>& columns) {
  nlohmann::ordered_json doc;
  doc["index"] = row.index;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& name : columns) {
    const auto& value = row.configuration.at(name);
    cfg[name] = value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json(nullptr);
  }
  doc["configuration"] = std::move(cfg);
  doc["metric"] = row.metric;
  doc["elapsed"] = row.elapsed;
  doc["status"] = to_string(row.status);
  doc["timestamp"] = row.timestamp;
  return doc.dump() + "\n";
}

std::vector<ResultRow> read_csv(std::string_view text, const std::vector<std::string>& columns) {
  const auto records = parse_csv(text);
  std::vector<ResultRow> rows;
  if (records.empty()) return rows;

  const std::size_t width = columns.size() + 5;
  const auto& header = records.front();
  bool header_ok = header.size() == width && header.front().text == "index";
  for (std::size_t i = 0; header_ok && i < columns.size(); ++i)
    header_ok = header[i + 1].text == columns[i];
  if (!header_ok) throw DbError("results.csv header does not match the expected columns");

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != width)
      throw DbError("results.csv row " + std::to_string(r) + " has " +
                    std::to_string(rec.size()) + " fields, expected " + std::to_string(width));
    ResultRow row;
    row.index = parse_index(rec[0].text);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const Field& f = rec[i + 1];
      row.configuration.set(columns[i],
                            (f.text.empty() && !f.quoted) ? Configuration::Value{}
                                                          : Configuration::Value{f.text});
    }
    row.metric = parse_double(rec[columns.size() + 1].text, "metric");
    row.elapsed = parse_double(rec[columns.size() + 2].text, "elapsed");
    try {
      row.status = parse_trial_status(rec[columns.size() + 3].text);
    } catch (const std::invalid_argument& e) {
      throw DbError(e.what());
    }
    row.timestamp = rec[columns.size() + 4].text;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> read_json_lines(std::string_view text, const std::vector<std::string>& columns) {
  std::vector<ResultRow> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) break;  // torn final line
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      ResultRow row;
      row.index = doc.at("index").get<std::size_t>();
      const auto& cfg = doc.at("configuration");
      for (const auto& name : columns) {
        const auto& v = cfg.at(name);
        row.configuration.set(name, v.is_null() ? Configuration::Value{}
                                                  : Configuration::Value{v.get<std::string>()});
      }
      row.metric = doc.at("metric").get<double>();
      row.elapsed = doc.at("elapsed").get<double>();
      row.status = parse_trial_status(doc.at("status").get<std::string>());
      row.timestamp = doc.at("timestamp").get<std::string>();
      rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw DbError("malformed results.json line " + std::to_string(rows.size() + 1) + ": " +
                    e.what());
    }
  }
  return rows;
}

PerfDb::PerfDb(const fs::path& dir, const std::vector<std::string>& columns, std::vector<ResultRow> rows)
    : columns_(columns), dir_(dir), rows_(std::move(rows)) {
  csv_ = open_append(dir_ / kCsvName);
  try {
    json_ = open_append(dir_ / kJsonName);
  } catch (...) {
    std::fclose(csv_);
    throw;
  }
}

PerfDb::PerfDb(PerfDb&& other) noexcept
    : columns_(std::move(other.columns_)), dir_(std::move(other.dir_)), rows_(std::move(other.rows_)),
      csv_(other.csv_), json_(other.json_) {
  other.csv_ = nullptr;
  other.json_ = nullptr;
}

PerfDb::~PerfDb() {
  if (csv_) std::fclose(csv_);
  if (json_) std::fclose(json_);
}

PerfDb PerfDb::create(const fs::path& dir, const std::vector<std::string>& columns) {
  fs::create_directories(dir);
  for (const char* name : {kCsvName, kJsonName}) {
    const fs::path path = dir / name;
    if (fs::exists(path) && fs::file_size(path) > 0 &&
        !(name == std::string_view(kCsvName) && read_file(path) == csv_header(columns)))
      throw DbError("'" + path.string() + "' already holds results");
  }
  write_durably(dir / kCsvName, csv_header(columns));
  write_durably(dir / kJsonName, "");
  return PerfDb(dir, columns, {});
}

PerfDb PerfDb::open(const fs::path& dir, const std::vector<std::string>& columns) {
  if (!fs::exists(dir / kCsvName) && !fs::exists(dir / kJsonName)) return create(dir, columns);
  auto csv_rows = read_csv(read_file(dir / kCsvName), columns);
  auto json_rows = read_json_lines(read_file(dir / kJsonName), columns);
  check_sequence(csv_rows, kCsvName);
  check_sequence(json_rows, kJsonName);
  const std::size_t n = std::min(csv_rows.size(), json_rows.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!(csv_rows[i] == json_rows[i]))
      throw DbError("results.csv and results.json disagree at row " + std::to_string(i + 1));
  }
  csv_rows.resize(n);

  std::string csv = csv_header(columns);
  std::string json;
  for (const auto& row : csv_rows) {
    csv += csv_line(row, columns);
    json += json_line(row, columns);
  }
  write_durably(dir / kCsvName, csv);
  write_durably(dir / kJsonName, json);
  return PerfDb(dir, columns, std::move(csv_rows));
}

void PerfDb::append(const ResultRow& row) {
  if (row.index != last_index() + 1)
    throw SequenceError("row index " + std::to_string(row.index) + " does not follow " +
                        std::to_string(last_index()));
  if (!std::isfinite(row.metric)) throw DbError("row metric must be finite");
  const std::string csv = csv_line(row, columns_);
  const std::string json = json_line(row, columns_);
  if (std::fwrite(csv.data(), 1, csv.size(), csv_) != csv.size())
    throw DbError("cannot append to results.csv");
  sync_file(csv_, dir_ / kCsvName);
  if (std::fwrite(json.data(), 1, json.size(), json_) != json.size())
    throw DbError("cannot append to results.json");
  sync_file(json_, dir_ / kJsonName);
  rows_.push_back(row);
}

std::vector<ResultRow> load_rows(const fs::path& dir, const std::vector<std::string>& columns) {
  std::vector<ResultRow> rows;
  if (fs::exists(dir / PerfDb::kCsvName)) {
    rows = read_csv(read_file(dir / PerfDb::kCsvName), columns);
  } else if (fs::exists(dir / PerfDb::kJsonName)) {
    rows = read_json_lines(read_file(dir / PerfDb::kJsonName), columns);
  } else {
    throw DbError("no results in '" + dir.string() + "'");
  }
  check_sequence(rows, "results");
  return rows;
}

std::optional<ResultRow> find_min(std::span<const ResultRow> rows) {
  const ResultRow* best = nullptr;
  for (const auto& row : rows) {
    if (row.ok() && (!best || row.metric < best->metric)) best = &row;
  }
  if (!best) return std::nullopt;
  return *best;
}

std::vector<SeriesPoint> convergence_series(std::span<const ResultRow> rows) {
  std::vector<SeriesPoint> series;
  series.reserve(rows.size());
  std::optional<double> best;
  for (const auto& row : rows) {
    if (row.ok() && (!best || row.metric < *best)) best = row.metric;
    series.push_back({row.index, row.metric, best});
  }
  return series;
}

void write_series_tsv(std::ostream& out, std::span<const SeriesPoint> series) {
  out << "index\tmetric\tbest_so_far\n";
  for (const auto& p : series) {
    out << p.index << '\t' << format_double(p.metric) << '\t'
        << (p.best_so_far ? format_double(*p.best_so_far) : std::string()) << '\n';
  }
}

}  // namespace looptune
