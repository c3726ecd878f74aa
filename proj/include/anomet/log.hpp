#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace anomet {

inline std::atomic<bool>& warnings_enabled() {
    static std::atomic<bool> enabled{true};
    return enabled;
}

inline void warn(std::string_view msg) {
    if (warnings_enabled()) std::cerr << "warning: " << msg << '\n';
}

} // namespace anomet
