#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace protosum {

// Runs fn(i) for i in [0, n) on OpenMP threads. An exception thrown by any
// iteration is rethrown on the caller (the lowest index wins).
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long ii = 0; ii < count; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace protosum
