// Copyright 2026 The Trajplan Authors
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

#ifndef TRAJPLAN_CLI_CLI_H_
#define TRAJPLAN_CLI_CLI_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace trajplan {

// Entry point of the `trajplan` tool. Subcommands: make-dataset, tokenize,
// train, plan, evaluate, gamma, plot. Returns 0 on success; errors go to
// `err` as "error: <message>" with a nonzero code.
//
// Settings resolve in order: built-in defaults, the "settings" object of a
// file given with --config, the TRAJPLAN_SEED environment variable (seed
// only), then flags on the command line. Every output directory receives
// config.json with the resolved settings, so re-running with
// --config <dir>/config.json reproduces the outputs.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

// Order-independent checksum of every regular file below `dir`, by relative
// path and content.
std::string DirectoryChecksum(const std::filesystem::path& dir);

const char* ToolVersion();

}  // namespace trajplan

#endif  // TRAJPLAN_CLI_CLI_H_
