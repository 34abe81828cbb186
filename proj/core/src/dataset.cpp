#include "sragmav/dataset.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sragmav/text.hpp"

namespace sragmav {

namespace {

using nlohmann::json;

Sample sample_from_json(const json& row, const std::string& where) {
  if (!row.is_object()) {
    throw InvalidRecord(where + ": expected a JSON object");
  }
  if (!row.contains("id") || !row["id"].is_number_integer()) {
    throw InvalidRecord(where + ": missing integer \"id\"");
  }
  if (!row.contains("content") || !row["content"].is_string()) {
    throw InvalidRecord(where + ": missing string \"content\"");
  }
  if (!row.contains("output") || !row["output"].is_string()) {
    throw InvalidRecord(where + ": missing string \"output\"");
  }
  Sample s;
  s.id = row["id"].get<std::int64_t>();
  s.content = row["content"].get<std::string>();
  s.output = row["output"].get<std::string>();
  if (s.content.empty()) {
    throw InvalidRecord(where + ": \"content\" must be non-empty");
  }
  return s;
}

void check_unique_ids(const std::vector<Sample>& samples,
                      const std::string& path) {
  std::unordered_map<std::int64_t, std::size_t> seen;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = seen.emplace(samples[i].id, i);
    if (!inserted) {
      throw DuplicateId(path + ": sample id " + std::to_string(samples[i].id) +
                        " appears more than once");
    }
  }
}

}  // namespace

std::vector<Sample> load_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open dataset file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();

  std::vector<Sample> samples;
  std::string_view body = trim(text);
  if (body.empty()) {
    throw IoError(path + ": dataset file is empty");
  }
  if (body.front() == '[') {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::parse_error& e) {
      throw IoError(path + ": " + e.what());
    }
    for (std::size_t i = 0; i < doc.size(); ++i) {
      samples.push_back(
          sample_from_json(doc[i], path + ": element " + std::to_string(i)));
    }
  } else {
    std::istringstream lines{std::move(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (trim(line).empty()) {
        continue;
      }
      const std::string where = path + ":" + std::to_string(lineno);
      json row;
      try {
        row = json::parse(line);
      } catch (const json::parse_error& e) {
        throw IoError(where + ": " + e.what());
      }
      samples.push_back(sample_from_json(row, where));
    }
  }
  if (samples.empty()) {
    throw IoError(path + ": no samples found");
  }
  check_unique_ids(samples, path);
  return samples;
}

void save_samples(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write dataset file: " + path);
  }
  for (const Sample& s : samples) {
    nlohmann::json row{{"id", s.id}, {"content", s.content}, {"output", s.output}};
    out << row.dump() << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

std::unordered_map<std::int64_t, std::size_t> index_by_id(
    const std::vector<Sample>& samples) {
  std::unordered_map<std::int64_t, std::size_t> map;
  map.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = map.emplace(samples[i].id, i);
    if (!inserted) {
      throw DuplicateId("sample id " + std::to_string(samples[i].id) +
                        " appears more than once");
    }
  }
  return map;
}

}  // namespace sragmav
