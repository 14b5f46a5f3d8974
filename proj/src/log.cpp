#include "mset/log.hpp"

#include <iostream>
#include <mutex>

namespace mset {

namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler() {
    static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler next) {
    std::lock_guard lock(handler_mutex());
    WarningHandler previous = std::move(handler());
    handler() = std::move(next);
    return previous;
}

void warn(const std::string& message) {
    std::lock_guard lock(handler_mutex());
    if (handler()) {
        handler()(message);
    }
}

}  // namespace mset
