#pragma once

namespace wsct {

// Keeps freed training buffers in the heap instead of handing them back to
// the OS after every step. Call once at program start.
void configure_allocator();

}  // namespace wsct
