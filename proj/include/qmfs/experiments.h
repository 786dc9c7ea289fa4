// Copyright 2026 The qmfs-lab Authors
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

#ifndef QMFS_EXPERIMENTS_H
#define QMFS_EXPERIMENTS_H

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace qmfs {

extern const char *const kToolVersion;

/// Malformed configuration or command line (exit code 2).
class InputError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string &data);

/// Calls fn(i) for every i in [0, n) on up to `threads` worker threads. Callers
/// write results by index, so the outcome does not depend on scheduling. The
/// exception from the lowest failing index is rethrown.
void parallel_for(long n, int threads, const std::function<void(long)> &fn);

/// Entry point of the qmfs command-line tool.
///   qmfs <check|simulate|force|koopman|spin|circuit> [options]
/// Writes CSV tables and summary.json into --out. Exit codes: 0 when every
/// invariant holds, 1 when one fails or a computation aborts, 2 on invalid
/// input.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace qmfs

#endif
