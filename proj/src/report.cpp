// Copyright (c) the maskris-lab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "maskris/report.hpp"

#include <algorithm>
#include <cstdio>

#include "maskris/config.hpp"

namespace maskris::report {

namespace {

const std::string kCsvVersion = "# version=" + std::to_string(kReportVersion) + "\n";
const char* const kPatNames[] = {"p_at_0.5", "p_at_0.7", "p_at_0.9"};

std::string exact(double v) { return config::format_double(v); }

}  // namespace

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (r.size() > width.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) line += "  ";
      const std::string pad(width[c] - r[c].size(), ' ');
      line += c == 0 ? r[c] + pad : pad + r[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string eval_csv(const metrics::EvalResult& r) {
  std::string out = kCsvVersion + "metric,value\n";
  out += "samples," + std::to_string(r.size()) + "\n";
  out += "miou," + exact(r.miou) + "\n";
  out += "oiou," + exact(r.oiou) + "\n";
  for (std::size_t t = 0; t < r.p_at.size(); ++t) {
    out += std::string(kPatNames[t]) + "," + exact(r.p_at[t]) + "\n";
  }
  return out;
}

std::string eval_text(const metrics::EvalResult& r) {
  std::vector<std::vector<std::string>> rows = {{"metric", "value"},
                                                {"samples", std::to_string(r.size())},
                                                {"mIoU", fmt(r.miou)},
                                                {"oIoU", fmt(r.oiou)}};
  for (std::size_t t = 0; t < r.p_at.size(); ++t) {
    rows.push_back({"P@" + fmt(metrics::kPrecisionThresholds[t], 1), fmt(r.p_at[t])});
  }
  return aligned_table(rows);
}

std::string robustness_csv(const metrics::RobustnessReport& r) {
  std::string out = kCsvVersion +
                    "row,name,samples,miou,oiou,p_at_0.5,p_at_0.7,p_at_0.9,"
                    "severity_1,severity_2,severity_3,severity_4,severity_5\n";
  auto eval_row = [&out](const char* row, const std::string& name, const metrics::EvalResult& e) {
    out += std::string(row) + "," + name + "," + std::to_string(e.size()) + "," + exact(e.miou) +
           "," + exact(e.oiou);
    for (double p : e.p_at) out += "," + exact(p);
    out += ",,,,,\n";
  };
  eval_row("clean", "clean", r.clean);
  for (const auto& c : r.corruptions) {
    out += "corruption," + std::string(synth::corruption_name(c.kind)) + "," +
           std::to_string(r.clean.size()) + ",," + exact(c.mean_oiou) + ",,,";
    for (double s : c.severity_oiou) out += "," + exact(s);
    out += "\n";
  }
  for (const auto& s : r.subsets) eval_row("subset", s.name, s.result);
  return out;
}

std::string robustness_text(const metrics::RobustnessReport& r) {
  std::vector<std::vector<std::string>> rows = {
      {"row", "samples", "mIoU", "oIoU", "sev1", "sev2", "sev3", "sev4", "sev5"}};
  rows.push_back({"clean", std::to_string(r.clean.size()), fmt(r.clean.miou), fmt(r.clean.oiou)});
  for (const auto& c : r.corruptions) {
    std::vector<std::string> row = {std::string(synth::corruption_name(c.kind)),
                                    std::to_string(r.clean.size()), "", fmt(c.mean_oiou)};
    for (double s : c.severity_oiou) row.push_back(fmt(s));
    rows.push_back(row);
  }
  for (const auto& s : r.subsets) {
    rows.push_back({s.name, std::to_string(s.result.size()), fmt(s.result.miou),
                    fmt(s.result.oiou)});
  }
  return aligned_table(rows);
}

std::string robustness_long_csv(const metrics::RobustnessReport& r) {
  std::string out = kCsvVersion + "kind,severity,metric,value\n";
  auto add = [&out](const std::string& kind, int sev, const char* metric, double v) {
    out += kind + "," + std::to_string(sev) + "," + metric + "," + exact(v) + "\n";
  };
  add("clean", 0, "miou", r.clean.miou);
  add("clean", 0, "oiou", r.clean.oiou);
  for (const auto& c : r.corruptions) {
    const std::string name(synth::corruption_name(c.kind));
    for (int s = 0; s < metrics::kSeverities; ++s) add(name, s + 1, "oiou", c.severity_oiou[s]);
    add(name, 0, "mean_oiou", c.mean_oiou);
  }
  for (const auto& s : r.subsets) {
    add(s.name, 0, "miou", s.result.miou);
    add(s.name, 0, "oiou", s.result.oiou);
  }
  return out;
}

}  // namespace maskris::report
