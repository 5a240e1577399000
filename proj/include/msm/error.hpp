// Copyright 2026 The msmid Authors
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

#ifndef MSM_ERROR_HPP_
#define MSM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace msm {

// Violated precondition or misuse of an API.
class LogicError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values, domain violations, diverged rollouts, singular inertia.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed model, dataset, or configuration content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msm

#endif  // MSM_ERROR_HPP_
