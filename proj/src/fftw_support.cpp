#include "fftw_support.hpp"

namespace cvqrng::detail {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace cvqrng::detail
