#pragma once

#include <iostream>
#include <string_view>

namespace vlpins::log {

/// Warnings go to std::clog unless silenced (tests and batch runs).
inline bool& quiet() {
  static bool q = false;
  return q;
}

inline void warn(std::string_view msg) {
  if (!quiet()) std::clog << "[vlpins] warning: " << msg << '\n';
}

}  // namespace vlpins::log
