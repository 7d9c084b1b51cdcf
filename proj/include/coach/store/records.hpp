#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coach/store/codec.hpp"

namespace coach::store {

inline constexpr int kRecordVersion = 1;

// Transition corpora: one JSON object per line.
void write_transitions(const std::filesystem::path& path, std::span<const Transition> corpus);
std::vector<Transition> read_transitions(const std::filesystem::path& path);

/// One line per turn followed by a summary line; every line carries the
/// session id so interleaved writers stay separable.
std::vector<std::string> session_log_lines(const dialogue::SessionLog& log);

/// Appends the session's lines with one O_APPEND write per line.
void append_session_log(const std::filesystem::path& path, const dialogue::SessionLog& log);

/// Reassembles every session whose summary line is present, in summary order.
std::vector<dialogue::SessionLog> parse_session_logs(std::string_view jsonl, const std::string& source = "<memory>");
std::vector<dialogue::SessionLog> read_session_logs(const std::filesystem::path& path);

}  // namespace coach::store
