#ifndef CELLTRACK_VERSION_HPP
#define CELLTRACK_VERSION_HPP

namespace celltrack {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
