#pragma once

namespace scale {

// OpenBLAS picks its compute kernels once, when the library is loaded. On
// some virtual machines its CPU probe fails and it falls back to generic SSE3
// kernels that run several times slower. When OPENBLAS_CORETYPE is unset this
// derives it from the CPU features the compiler runtime reports and
// re-executes the program once with the variable set. Returns normally when
// nothing needs to change or the re-exec is not possible.
void select_blas_kernels(char** argv);

// glibc serves blocks of 32 MB and up with a fresh mmap and unmaps them on
// free, so every large temporary pays for page faults. This makes the
// allocator keep freed memory in the heap for the rest of the process.
// No-op on other C libraries.
void retain_freed_memory();

}  // namespace scale
