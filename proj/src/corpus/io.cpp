#include "coep/corpus/io.hpp"

#include <fstream>

#include "json.hpp"

namespace coep {

namespace {

using json = nlohmann::json;

template <typename F>
void for_each_record(const std::filesystem::path& path, F&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      fn(j);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string nonempty(const json& j, const char* key) {
  std::string s = j.at(key).get<std::string>();
  if (s.empty()) throw DataError(std::string("field '") + key + "' is empty");
  return s;
}

}  // namespace

std::vector<InferentialTriple> read_inferential(const std::filesystem::path& path) {
  std::vector<InferentialTriple> out;
  for_each_record(path, [&](const json& j) {
    const std::string rel = j.at("relation").get<std::string>();
    const auto r = parse_relation(rel);
    if (!r) throw DataError("unknown inferential relation '" + rel + "'");
    out.push_back({nonempty(j, "head"), *r, nonempty(j, "tail")});
  });
  return out;
}

void write_inferential(const std::filesystem::path& path, const std::vector<InferentialTriple>& triples) {
  auto out = open_out(path);
  for (const auto& t : triples) {
    out << json{{"head", t.head}, {"relation", relation_name(t.relation)}, {"tail", t.tail}}.dump()
        << '\n';
  }
}

std::vector<SequentialPair> read_sequential(const std::filesystem::path& path, SkipCounter* skipped) {
  std::vector<SequentialPair> out;
  for_each_record(path, [&](const json& j) {
    if (j.contains("preceding")) {
      out.push_back({nonempty(j, "preceding"), nonempty(j, "future"), std::nullopt});
      return;
    }
    auto pair = sequentialize_triple(nonempty(j, "head"), j.at("relation").get<std::string>(),
                                     nonempty(j, "tail"), skipped);
    if (pair) out.push_back(std::move(*pair));
  });
  return out;
}

void write_sequential_raw(const std::filesystem::path& path, const std::vector<RawTriple>& triples) {
  auto out = open_out(path);
  for (const auto& t : triples) {
    out << json{{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}}.dump() << '\n';
  }
}

void write_sequential_normalized(const std::filesystem::path& path,
                                 const std::vector<SequentialPair>& pairs) {
  auto out = open_out(path);
  for (const auto& p : pairs) {
    out << json{{"preceding", p.preceding}, {"future", p.future}}.dump() << '\n';
  }
}

std::vector<Story> read_stories(const std::filesystem::path& path) {
  std::vector<Story> out;
  for_each_record(path, [&](const json& j) {
    Story s = j.at("events").get<Story>();
    for (const auto& e : s) {
      if (e.empty()) throw DataError("story contains an empty event");
    }
    out.push_back(std::move(s));
  });
  return out;
}

void write_stories(const std::filesystem::path& path, const std::vector<Story>& stories) {
  auto out = open_out(path);
  for (const auto& s : stories) out << json{{"events", s}}.dump() << '\n';
}

}  // namespace coep
