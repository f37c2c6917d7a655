// Copyright 2026 The samarl Authors.
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

#ifndef SAMARL_CHECK_HPP_
#define SAMARL_CHECK_HPP_

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace samarl {

// Thrown on any violated precondition or internal consistency failure.
// Tests rely on these being catchable rather than aborting the process.
class CheckError : public std::runtime_error {
 public:
  explicit CheckError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace internal {
[[noreturn]] inline void CheckFail(const char* file, int line,
                                   const std::string& msg) {
  std::ostringstream os;
  os << file << ":" << line << " check failed: " << msg;
  throw CheckError(os.str());
}
}  // namespace internal

#define SAMARL_CHECK(cond)                                             \
  do {                                                                 \
    if (!(cond)) ::samarl::internal::CheckFail(__FILE__, __LINE__, #cond); \
  } while (false)

#define SAMARL_CHECK_MSG(cond, msg)                                    \
  do {                                                                 \
    if (!(cond)) {                                                     \
      std::ostringstream os_;                                          \
      os_ << #cond << " (" << msg << ")";                              \
      ::samarl::internal::CheckFail(__FILE__, __LINE__, os_.str());    \
    }                                                                  \
  } while (false)

#define SAMARL_CHECK_OP(x, op, y)                                      \
  do {                                                                 \
    auto vx_ = (x);                                                    \
    auto vy_ = (y);                                                    \
    if (!(vx_ op vy_)) {                                               \
      std::ostringstream os_;                                          \
      os_ << #x " " #op " " #y << " (" << vx_ << " vs " << vy_ << ")"; \
      ::samarl::internal::CheckFail(__FILE__, __LINE__, os_.str());    \
    }                                                                  \
  } while (false)

#define SAMARL_CHECK_EQ(x, y) SAMARL_CHECK_OP(x, ==, y)
#define SAMARL_CHECK_NE(x, y) SAMARL_CHECK_OP(x, !=, y)
#define SAMARL_CHECK_LT(x, y) SAMARL_CHECK_OP(x, <, y)
#define SAMARL_CHECK_LE(x, y) SAMARL_CHECK_OP(x, <=, y)
#define SAMARL_CHECK_GT(x, y) SAMARL_CHECK_OP(x, >, y)
#define SAMARL_CHECK_GE(x, y) SAMARL_CHECK_OP(x, >=, y)

#define SAMARL_CHECK_FINITE(x)                                         \
  SAMARL_CHECK_MSG(std::isfinite(x), "non-finite value " << (x))

// |x - y| <= tol, used where an exact comparison would be brittle.
#define SAMARL_CHECK_NEAR(x, y, tol)                                   \
  do {                                                                 \
    double nx_ = (x);                                                  \
    double ny_ = (y);                                                  \
    if (!(std::fabs(nx_ - ny_) <= (tol))) {                            \
      std::ostringstream os_;                                          \
      os_ << #x " near " #y << " (" << nx_ << " vs " << ny_            \
          << ", tol " << (tol) << ")";                                 \
      ::samarl::internal::CheckFail(__FILE__, __LINE__, os_.str());    \
    }                                                                  \
  } while (false)

}  // namespace samarl

#endif  // SAMARL_CHECK_HPP_
