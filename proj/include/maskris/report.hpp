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

#pragma once

// Report writers. CSV outputs begin with a "# version=1" line followed by
// the header row.

#include <string>
#include <vector>

#include "maskris/metrics.hpp"

namespace maskris::report {

inline constexpr int kReportVersion = 1;

std::string eval_csv(const metrics::EvalResult& r);
std::string eval_text(const metrics::EvalResult& r);

// One row for clean, one per corruption kind, one per subset.
std::string robustness_csv(const metrics::RobustnessReport& r);
std::string robustness_text(const metrics::RobustnessReport& r);
// kind,severity,metric,value; severity 0 marks rows without a severity.
std::string robustness_long_csv(const metrics::RobustnessReport& r);

// Left-aligned first column, right-aligned others, two-space gutters.
std::string aligned_table(const std::vector<std::vector<std::string>>& rows);

std::string fmt(double v, int precision = 4);

}  // namespace maskris::report
