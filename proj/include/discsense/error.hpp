#ifndef DISCSENSE_ERROR_HPP_
#define DISCSENSE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace discsense {

// All library failures surface as this type; the message is user-facing.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace discsense

#endif  // DISCSENSE_ERROR_HPP_
