#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace swqkd {

struct LogRecord {
  double time_s = 0.0;
  std::string kind;
  nlohmann::json payload;
};

// Append-only, line-delimited JSON: {"kind":..., "payload":{...}, "time_s":...}
// per line. Object keys serialize in sorted order, so a run's log bytes are a
// pure function of the records.
class EventLog {
 public:
  void append(double time_s, std::string kind, nlohmann::json payload);
  const std::vector<LogRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  std::string to_jsonl() const;
  void write_file(const std::string& path) const;
  static EventLog from_jsonl(const std::string& text);   // throws ScenarioError on bad lines
  static EventLog read_file(const std::string& path);

 private:
  std::vector<LogRecord> records_;
};

}  // namespace swqkd
