#include "pipgan/logging.hpp"

#include <iostream>
#include <mutex>

namespace pipgan {
namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

LogSink& current_sink() {
    static LogSink sink = [](LogLevel level, const std::string& message) {
        if (level == LogLevel::warning) std::cerr << "warning: " << message << '\n';
    };
    return sink;
}

void emit(LogLevel level, const std::string& message) {
    std::lock_guard lock(sink_mutex());
    if (current_sink()) current_sink()(level, message);
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
    std::lock_guard lock(sink_mutex());
    auto previous = std::move(current_sink());
    current_sink() = std::move(sink);
    return previous;
}

void log_info(const std::string& message) { emit(LogLevel::info, message); }
void log_warning(const std::string& message) { emit(LogLevel::warning, message); }

}  // namespace pipgan
