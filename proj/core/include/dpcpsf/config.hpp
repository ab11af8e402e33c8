// Copyright 2026 The dpcpsf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run-wide configuration: training, safe-set construction, the filter, the
// MPC baselines and the closed-loop harness, read from one JSON document.

#pragma once

#include <stdexcept>
#include <string>

#include "dpcpsf/bench.hpp"
#include "dpcpsf/dpc.hpp"
#include "dpcpsf/safeset.hpp"

namespace dpcpsf::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Config {
  dpc::TrainConfig train;
  // Terminal distance to the reference under which a rollout converged.
  double eps_conv = 0.2;
  safeset::BuildConfig safeset;
  bench::RunConfig run;

  void validate() const;
};

// Library defaults plus the navigation cylinder and start/goal anchor.
Config default_config();

// Keys absent from the document keep their default_config() value; unknown
// keys are rejected.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);
std::string dump_config(const Config& c);
void save_config(const Config& c, const std::string& path);

}  // namespace dpcpsf::config
