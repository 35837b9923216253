// Copyright 2026 The radt-lab Authors.
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


// The radt-lab command line: gen-data, train, eval, ablate, probe, stats.

#ifndef RADT_TOOLS_CLI_HPP_
#define RADT_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace radt::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIntegrity = 3,
  kPartial = 4,
};

// Runs one command. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace radt::cli

#endif  // RADT_TOOLS_CLI_HPP_
