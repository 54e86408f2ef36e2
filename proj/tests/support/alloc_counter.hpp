#pragma once

// Global allocation accounting. Linking alloc_counter.cpp replaces the global
// operator new/delete; counters only advance while tracking is enabled.

#include <cstddef>

namespace alloc_counter {

void start() noexcept;
void stop() noexcept;
std::size_t bytes() noexcept;
std::size_t count() noexcept;

}  // namespace alloc_counter
