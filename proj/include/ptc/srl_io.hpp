#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptc/augment.hpp"
#include "ptc/data.hpp"
#include "ptc/error.hpp"

namespace ptc {

// One structured record per line: {"tokens": [...], "frames": [{"pred": i,
// "spans": {"LABEL": [start, stop]}}]}.
inline std::vector<SrlAnnotatedSentence> load_srl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("load_srl: cannot read " + path);
  std::vector<SrlAnnotatedSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("load_srl: bad record at " + path + ":" +
                       std::to_string(line_no) + ": " + e.what());
    }
    SrlAnnotatedSentence s;
    try {
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& jf : j.at("frames")) {
        SrlFrame frame;
        frame.predicate = jf.at("pred").get<std::size_t>();
        for (const auto& [label, span] : jf.at("spans").items()) {
          if (!span.is_array() || span.size() != 2)
            throw InputError("span must be [start, stop]");
          frame.spans[label] = {span[0].get<std::size_t>(),
                                span[1].get<std::size_t>()};
        }
        s.frames.push_back(std::move(frame));
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError("load_srl: bad record at " + path + ":" +
                       std::to_string(line_no) + ": " + e.what());
    }
    for (std::size_t f = 1; f < s.frames.size(); ++f)
      if (s.frames[f].predicate < s.frames[f - 1].predicate)
        throw InputError("load_srl: frames out of predicate order at " + path +
                         ":" + std::to_string(line_no));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ptc
