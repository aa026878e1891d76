// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// The `sgn` command line: gendata, train, separate, eval, export-embeddings.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sgn/common/error.h"
#include "sgn/model/config.h"
#include "sgn/training/trainer.h"

namespace sgn::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitDegenerate = 3,
};

// Bad flag values or combinations; maps to kExitUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Resolved settings of one invocation. Keys are "run.<name>",
// "model.<name>" and "train.<name>"; the text form can be fed back through
// --config.
struct RunConfig {
  std::string command;
  std::map<std::string, std::string> run;
  bool has_model = false;
  bool has_train = false;
  model::SgnConfig model;
  train::TrainConfig train;

  std::string ToText() const;
  // Applies prefixed key=value lines. Keys seen are added to `assigned`.
  void ApplyText(const std::string &text, std::set<std::string> *assigned = nullptr);
  void Set(const std::string &key, const std::string &value);
};

// Default output root: $SGN_RUN_DIR if set, else "runs".
std::filesystem::path DefaultRunRoot();

// Parses `args` (args[0] is the program name) and runs the subcommand.
// Returns one of the ExitCode values.
int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace sgn::cli
