#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace defglm::cli {

/// One row of the traffic snapshot. Expected CSV columns (any order, extra
/// columns ignored): sensor, direction, date, hour, count.
///   direction  inbound | outbound
///   date       YYYY-MM-DD
///   hour       integer 0..23; 24 is accepted and wrapped to 0
///   count      nonnegative integer
struct TrafficRecord {
  std::string sensor;
  std::string direction;
  std::string date;
  int hour = 0;
  long count = 0;
};

struct TrafficIngest {
  std::vector<TrafficRecord> records;
  std::size_t malformed = 0;   ///< rows failing the schema
  std::size_t duplicates = 0;  ///< repeated (sensor, direction, date, hour); first kept
  std::vector<std::string> first_errors;  ///< up to a few line-numbered reasons
};

TrafficIngest ingest_traffic(const std::string& path);

/// "sensor/direction" keys present, sorted.
std::vector<std::string> available_keys(const std::vector<TrafficRecord>& records);

/// Records for one sensor and direction, optionally restricted to an
/// inclusive date range (string comparison on YYYY-MM-DD). Throws DataError
/// listing the available keys when the pair is absent.
std::vector<TrafficRecord> select_traffic(const std::vector<TrafficRecord>& records,
                                          const std::string& sensor, const std::string& direction,
                                          const std::optional<std::string>& date_from,
                                          const std::optional<std::string>& date_to);

bool valid_date(const std::string& date);

}  // namespace defglm::cli
