// Copyright 2026 The mmplan Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace mmplan {

// Failure categories. The CLI maps each one to a distinct exit code.
enum class Errc {
  parse,         // malformed or unreadable document
  invariant,     // document parsed but violates a domain invariant
  precondition,  // caller-supplied argument outside the operation's domain
  infeasible,    // search space is empty (e.g. every plan runs out of memory)
  budget,        // exact oracle requested on an instance above its budget
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::parse: return "parse error";
    case Errc::invariant: return "invariant violation";
    case Errc::precondition: return "precondition violation";
    case Errc::infeasible: return "infeasible";
    case Errc::budget: return "budget exceeded";
  }
  return "unknown";
}

}  // namespace mmplan
