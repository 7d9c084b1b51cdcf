#pragma once

#include <functional>
#include <string_view>

namespace coach {

enum class LogLevel { Info, Warning, Error };

using LogSink = std::function<void(LogLevel, std::string_view)>;

/// Replaces the process-wide sink (stderr by default). Returns the previous one.
LogSink set_log_sink(LogSink sink);

void log_message(LogLevel level, std::string_view message);
inline void log_info(std::string_view m) { log_message(LogLevel::Info, m); }
inline void log_warning(std::string_view m) { log_message(LogLevel::Warning, m); }
inline void log_error(std::string_view m) { log_message(LogLevel::Error, m); }

}  // namespace coach
