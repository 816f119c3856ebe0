// Copyright 2026 The tritrain Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <iosfwd>

namespace tritrain::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,      // unexpected failure
  kUsage = 2,         // bad flags, unknown or invalid config keys
  kIo = 3,            // missing or unwritable files
  kVerification = 4,  // bound-check found a violation
  kParse = 5,         // malformed data file or checkpoint
  kInput = 6,         // well-formed but inconsistent input (e.g. dimensions)
};

/// Entry point of the `tritrain` tool. Subcommands: gen-data, train, eval,
/// adist, bound-check. Returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tritrain::cli
