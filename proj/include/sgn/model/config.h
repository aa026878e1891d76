// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <string>

namespace sgn::model {

enum class GroupingMode { kSoftmax, kGumbelHard };

const char *GroupingModeName(GroupingMode mode);
GroupingMode ParseGroupingMode(const std::string &name);

struct SgnConfig {
  std::size_t classes = 4;
  std::size_t dim = 64;
  std::size_t depth = 6;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t patch = 16;
  // Side of the square log-frequency input; also the STFT frame count.
  std::size_t grid = 64;
  std::size_t unet_depth = 5;
  std::size_t unet_base_channels = 16;
  std::size_t unet_max_channels = 512;
  GroupingMode grouping = GroupingMode::kSoftmax;
  double gumbel_temperature = 1.0;
  bool use_sct = true;
  bool use_cag = true;

  static SgnConfig Desk() { return {}; }
  static SgnConfig Reference();
  // Small enough for full finite-difference checks.
  static SgnConfig Tiny();

  std::size_t patches() const { return (grid / patch) * (grid / patch); }
  std::size_t UnetChannels(std::size_t level) const;

  // Throws DomainError describing the first violated constraint.
  void Validate() const;

  // key=value lines, one per field.
  std::string ToText() const;
  // Missing keys keep their desk defaults; unknown keys are an error.
  static SgnConfig FromText(const std::string &text);
  // Applies a single key=value assignment.
  void Set(const std::string &key, const std::string &value);

  bool operator==(const SgnConfig &) const = default;
};

}  // namespace sgn::model
