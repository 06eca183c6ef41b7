#ifndef TRIMETRIC_LOG_HPP_
#define TRIMETRIC_LOG_HPP_

#include <iostream>
#include <string>

namespace trimetric {

inline void warn(const std::string& msg) { std::cerr << "[trimetric] warning: " << msg << "\n"; }

}  // namespace trimetric

#endif  // TRIMETRIC_LOG_HPP_
