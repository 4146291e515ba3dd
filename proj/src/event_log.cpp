#include "swqkd/event_log.hpp"

#include <fstream>
#include <sstream>

#include "swqkd/errors.hpp"

namespace swqkd {

void EventLog::append(double time_s, std::string kind, nlohmann::json payload) {
  records_.push_back(LogRecord{time_s, std::move(kind), std::move(payload)});
}

std::string EventLog::to_jsonl() const {
  std::string out;
  for (const auto& rec : records_) {
    nlohmann::json line{{"kind", rec.kind}, {"payload", rec.payload}, {"time_s", rec.time_s}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void EventLog::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StateError("cannot write event log: " + path);
  out << to_jsonl();
}

EventLog EventLog::from_jsonl(const std::string& text) {
  EventLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ScenarioError("log line " + std::to_string(line_no), e.what());
    }
    if (!j.contains("time_s") || !j.contains("kind") || !j.contains("payload"))
      throw ScenarioError("log line " + std::to_string(line_no),
                          "record must carry time_s, kind, payload");
    log.append(j["time_s"].get<double>(), j["kind"].get<std::string>(), j["payload"]);
  }
  return log;
}

EventLog EventLog::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path, "cannot open event log");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

}  // namespace swqkd
