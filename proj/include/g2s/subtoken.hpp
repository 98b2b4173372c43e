#pragma once

#include <string>
#include <vector>

namespace g2s {

// Splits an identifier into lowercase subtokens at underscores, camel-case
// boundaries and letter/digit transitions. "parseHTTPResponse2" becomes
// {"parse", "http", "response", "2"}. Never returns an empty list for a
// nonempty identifier.
std::vector<std::string> tokenize_name(const std::string& name);

}  // namespace g2s
