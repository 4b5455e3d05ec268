#include "defglm_cli/traffic.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <tuple>

#include <spdlog/spdlog.h>

#include "defglm/errors.hpp"
#include "defglm_cli/csv.hpp"

namespace defglm::cli {

bool valid_date(const std::string& date) {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (date[i] < '0' || date[i] > '9') return false;
  }
  const int y = std::stoi(date.substr(0, 4));
  const unsigned m = static_cast<unsigned>(std::stoi(date.substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(date.substr(8, 2)));
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

TrafficIngest ingest_traffic(const std::string& path) {
  std::vector<std::size_t> lines;
  const CsvTable table = read_csv_file(path, &lines);
  const std::size_t c_sensor = table.column("sensor");
  const std::size_t c_dir = table.column("direction");
  const std::size_t c_date = table.column("date");
  const std::size_t c_hour = table.column("hour");
  const std::size_t c_count = table.column("count");
  const std::size_t need = std::max({c_sensor, c_dir, c_date, c_hour, c_count}) + 1;

  TrafficIngest out;
  std::set<std::tuple<std::string, std::string, std::string, int>> seen;
  auto reject = [&](std::size_t r, const std::string& why) {
    ++out.malformed;
    if (out.first_errors.size() < 5) {
      out.first_errors.push_back(path + ":" + std::to_string(lines[r]) + ": " + why);
    }
  };
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() < need) {
      reject(r, "expected at least " + std::to_string(need) + " fields");
      continue;
    }
    TrafficRecord rec;
    rec.sensor = row[c_sensor];
    rec.direction = row[c_dir];
    rec.date = row[c_date];
    if (rec.sensor.empty()) {
      reject(r, "empty sensor id");
      continue;
    }
    if (rec.direction != "inbound" && rec.direction != "outbound") {
      reject(r, "direction '" + rec.direction + "' is not inbound or outbound");
      continue;
    }
    if (!valid_date(rec.date)) {
      reject(r, "date '" + rec.date + "' is not a valid YYYY-MM-DD date");
      continue;
    }
    try {
      const long h = parse_integer(row[c_hour], "hour");
      if (h < 0 || h > 24) throw DataError("hour " + std::to_string(h) + " outside 0..24");
      rec.hour = static_cast<int>(h % 24);
      rec.count = parse_integer(row[c_count], "count");
      if (rec.count < 0) throw DataError("negative count");
    } catch (const DataError& e) {
      reject(r, e.what());
      continue;
    }
    if (!seen.emplace(rec.sensor, rec.direction, rec.date, rec.hour).second) {
      ++out.duplicates;
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  if (out.malformed > 0) {
    spdlog::warn("traffic: rejected {} malformed rows of {}", out.malformed, table.rows.size());
    for (const auto& e : out.first_errors) spdlog::warn("  {}", e);
  }
  if (out.duplicates > 0) {
    spdlog::warn("traffic: dropped {} duplicate (sensor, direction, date, hour) rows", out.duplicates);
  }
  return out;
}

std::vector<std::string> available_keys(const std::vector<TrafficRecord>& records) {
  std::set<std::string> keys;
  for (const auto& r : records) keys.insert(r.sensor + "/" + r.direction);
  return {keys.begin(), keys.end()};
}

std::vector<TrafficRecord> select_traffic(const std::vector<TrafficRecord>& records,
                                          const std::string& sensor, const std::string& direction,
                                          const std::optional<std::string>& date_from,
                                          const std::optional<std::string>& date_to) {
  std::vector<TrafficRecord> out;
  bool key_present = false;
  for (const auto& r : records) {
    if (r.sensor != sensor || r.direction != direction) continue;
    key_present = true;
    if (date_from && r.date < *date_from) continue;
    if (date_to && r.date > *date_to) continue;
    out.push_back(r);
  }
  if (!key_present) {
    std::string keys;
    for (const auto& k : available_keys(records)) keys += (keys.empty() ? "" : ", ") + k;
    throw DataError("no records for sensor '" + sensor + "' direction '" + direction +
                    "'; available: " + (keys.empty() ? "(none)" : keys));
  }
  if (out.empty()) throw DataError("the date filter leaves no records for " + sensor + "/" + direction);
  return out;
}

}  // namespace defglm::cli
