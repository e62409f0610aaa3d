#pragma once

#include <cstddef>
#include <functional>
#include <string>

namespace latree::util {

/// Number of worker threads used by parallel_for. Controlled by the
/// LT_THREADS environment variable; defaults to 1 (fully serial).
int worker_count();

/// Run fn(i) for i in [0, count). With worker_count() == 1 this is a plain
/// loop; otherwise the index range is split into contiguous blocks, one
/// worker per block. Each invocation must write only to its own slot(s), so
/// results are identical for every thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

/// Write `content` to `path` atomically: write to a sibling temp file, then
/// rename over the target. Throws latree::InputError on I/O failure.
void atomic_write_file(const std::string& path, const std::string& content);

/// Read a whole file into a string. Throws latree::InputError if unreadable.
std::string read_file(const std::string& path);

/// Shortest round-trippable decimal form of a double (printf %.17g trimmed).
std::string format_double(double v);

}  // namespace latree::util
