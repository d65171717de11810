// SPDX-License-Identifier: Apache-2.0
//
// Plain text policy files.
//
// Line 1:        vocab_size horizon eos_token
// Each further:  prompt_id prefix_len prefix_tokens... logits...
//
// Logits are written with 17 significant digits, which round-trips doubles
// exactly. Blank lines and lines starting with '#' are ignored.
#pragma once

#include <filesystem>
#include <iosfwd>

#include "hybridgrad/policy.hpp"

namespace hybridgrad {

void save_policy(const TabularPolicy& policy, std::ostream& out);
void save_policy(const TabularPolicy& policy, const std::filesystem::path& path);

TabularPolicy load_policy(std::istream& in, const std::string& name = "<stream>");
TabularPolicy load_policy(const std::filesystem::path& path);

}  // namespace hybridgrad
