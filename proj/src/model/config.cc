// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sgn/model/config.h"

#include <algorithm>
#include <sstream>

#include "sgn/common/error.h"
#include "sgn/common/key_value.h"

namespace sgn::model {

const char *GroupingModeName(GroupingMode mode) {
  return mode == GroupingMode::kSoftmax ? "softmax" : "gumbel_hard";
}

GroupingMode ParseGroupingMode(const std::string &name) {
  if (name == "softmax") return GroupingMode::kSoftmax;
  if (name == "gumbel_hard" || name == "hard") return GroupingMode::kGumbelHard;
  throw DomainError("unknown grouping mode '" + name + "' (softmax|gumbel_hard)");
}

SgnConfig SgnConfig::Reference() {
  SgnConfig c;
  c.classes = 11;
  c.dim = 256;
  c.grid = 256;
  c.unet_depth = 7;
  return c;
}

SgnConfig SgnConfig::Tiny() {
  SgnConfig c;
  c.classes = 3;
  c.dim = 8;
  c.depth = 2;
  c.heads = 2;
  c.patch = 4;
  c.grid = 16;
  c.unet_depth = 2;
  c.unet_base_channels = 4;
  c.unet_max_channels = 8;
  return c;
}

std::size_t SgnConfig::UnetChannels(std::size_t level) const {
  std::size_t c = unet_base_channels;
  for (std::size_t i = 0; i < level && c < unet_max_channels; ++i) c *= 2;
  return std::min(c, unet_max_channels);
}

void SgnConfig::Validate() const {
  auto fail = [](const std::string &m) { throw DomainError("invalid model config: " + m); };
  if (classes == 0) fail("classes must be positive");
  if (dim == 0 || heads == 0 || dim % heads != 0) fail("dim must be a positive multiple of heads");
  if (patch == 0 || grid == 0 || grid % patch != 0) fail("grid must be divisible by patch");
  if (unet_depth == 0) fail("unet_depth must be positive");
  if (unet_depth >= 64 || grid % (std::size_t{1} << unet_depth) != 0) {
    fail("grid must be divisible by 2^unet_depth");
  }
  if (unet_base_channels == 0 || unet_max_channels < unet_base_channels) {
    fail("unet channel bounds are inconsistent");
  }
  if (mlp_ratio == 0) fail("mlp_ratio must be positive");
  if (!(gumbel_temperature > 0)) fail("gumbel_temperature must be positive");
}

std::string SgnConfig::ToText() const {
  std::ostringstream os;
  os.precision(17);
  os << "classes=" << classes << "\n"
     << "dim=" << dim << "\n"
     << "depth=" << depth << "\n"
     << "heads=" << heads << "\n"
     << "mlp_ratio=" << mlp_ratio << "\n"
     << "patch=" << patch << "\n"
     << "grid=" << grid << "\n"
     << "unet_depth=" << unet_depth << "\n"
     << "unet_base_channels=" << unet_base_channels << "\n"
     << "unet_max_channels=" << unet_max_channels << "\n"
     << "grouping=" << GroupingModeName(grouping) << "\n"
     << "gumbel_temperature=" << gumbel_temperature << "\n"
     << "use_sct=" << (use_sct ? "true" : "false") << "\n"
     << "use_cag=" << (use_cag ? "true" : "false") << "\n";
  return os.str();
}

void SgnConfig::Set(const std::string &raw_key, const std::string &raw_value) {
  const std::string key = Trim(raw_key), v = Trim(raw_value);
  if (key == "classes") classes = ParseUnsigned(key, v);
  else if (key == "dim") dim = ParseUnsigned(key, v);
  else if (key == "depth") depth = ParseUnsigned(key, v);
  else if (key == "heads") heads = ParseUnsigned(key, v);
  else if (key == "mlp_ratio") mlp_ratio = ParseUnsigned(key, v);
  else if (key == "patch") patch = ParseUnsigned(key, v);
  else if (key == "grid") grid = ParseUnsigned(key, v);
  else if (key == "unet_depth") unet_depth = ParseUnsigned(key, v);
  else if (key == "unet_base_channels") unet_base_channels = ParseUnsigned(key, v);
  else if (key == "unet_max_channels") unet_max_channels = ParseUnsigned(key, v);
  else if (key == "grouping") grouping = ParseGroupingMode(v);
  else if (key == "gumbel_temperature") gumbel_temperature = ParseDouble(key, v);
  else if (key == "use_sct") use_sct = ParseBool(key, v);
  else if (key == "use_cag") use_cag = ParseBool(key, v);
  else throw DomainError("unknown model config key '" + key + "'");
}

SgnConfig SgnConfig::FromText(const std::string &text) {
  SgnConfig c;
  ForEachKeyValue(text, [&](const std::string &k, const std::string &v) { c.Set(k, v); });
  c.Validate();
  return c;
}

}  // namespace sgn::model
