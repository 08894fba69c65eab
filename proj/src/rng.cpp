#include "drccmdp/rng.hpp"

#include "drccmdp/phidiv.hpp"

namespace drccmdp {

namespace {

// splitmix64 finalizer; two rounds over the keyed counter give a solid
// stateless bijection
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t CounterRng::at(std::uint64_t counter) const {
    std::uint64_t h = mix(seed_ ^ 0x2545f4914f6cdd1dULL);
    h = mix(h ^ stream_);
    h = mix(h ^ counter);
    return mix(h + counter * 0xda942042e4dd58b5ULL);
}

prec_t CounterRng::normal() {
    prec_t u = uniform01();
    if (u <= 0.0) u = 0x1.0p-53;
    return normal_quantile(u);
}

}  // namespace drccmdp
