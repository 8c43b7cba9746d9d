#pragma once
// Counter-based random numbers (Philox4x32-10).
//
// Every variate is a pure function of (key, counter), so ensembles can be
// generated in any order, on any number of threads, or extended to more
// particles without disturbing values already drawn.  Coupled systems get
// identical noise by construction: they just evaluate the same counters.
//
// Streams are separated by deriving a 64-bit key from (seed, stream tag)
// with a splitmix64-style mix; counters carry (id, step).

#include <cstdint>
#include <cmath>

namespace rbm {

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// key for an independent stream of a given purpose under one master seed
inline uint64_t derive_stream(uint64_t seed, uint64_t tag) {
    return mix64(mix64(seed) ^ mix64(tag * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull));
}

// per-replication seeds all descend from the base seed
inline uint64_t derive_replication_seed(uint64_t seed, uint64_t rep) {
    return mix64(mix64(seed) + 0x100000001b3ull * rep + 0xcbf29ce484222325ull);
}

namespace detail {

struct u32x4 { uint32_t v[4]; };

inline void philox_round(u32x4& ctr, uint32_t k0, uint32_t k1) {
    const uint64_t m0 = 0xD2511F53ull * ctr.v[0];
    const uint64_t m1 = 0xCD9E8D57ull * ctr.v[2];
    const uint32_t hi0 = uint32_t(m0 >> 32), lo0 = uint32_t(m0);
    const uint32_t hi1 = uint32_t(m1 >> 32), lo1 = uint32_t(m1);
    ctr = {hi1 ^ ctr.v[1] ^ k0, lo1, hi0 ^ ctr.v[3] ^ k1, lo0};
}

inline u32x4 philox10(uint64_t key, uint64_t id, uint64_t step) {
    u32x4 ctr{uint32_t(id), uint32_t(id >> 32), uint32_t(step), uint32_t(step >> 32)};
    uint32_t k0 = uint32_t(key), k1 = uint32_t(key >> 32);
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, k0, k1);
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    return ctr;
}

} // namespace detail

// uniform on (0,1], indexed by (id, step)
inline double uniform01(uint64_t key, uint64_t id, uint64_t step) {
    const detail::u32x4 r = detail::philox10(key, id, step);
    return (double)(((uint64_t(r.v[0]) << 32 | r.v[1]) >> 11) + 1) * 0x1.0p-53;
}

// standard normal, indexed by (id, step).  One Philox block yields a
// Box-Muller pair covering steps 2j and 2j+1 of the same id.
inline double normal(uint64_t key, uint64_t id, uint64_t step) {
    const detail::u32x4 r = detail::philox10(key, id, step >> 1);
    const double u1 = (double)(((uint64_t(r.v[0]) << 32 | r.v[1]) >> 11) + 1) * 0x1.0p-53;
    const double u2 = (double)(((uint64_t(r.v[2]) << 32 | r.v[3]) >> 11) + 1) * 0x1.0p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    return (step & 1) ? rad * std::sin(ang) : rad * std::cos(ang);
}

// both members of the pair at once, for tight generation loops
inline void normal_pair(uint64_t key, uint64_t id, uint64_t pair, double& z0, double& z1) {
    const detail::u32x4 r = detail::philox10(key, id, pair);
    const double u1 = (double)(((uint64_t(r.v[0]) << 32 | r.v[1]) >> 11) + 1) * 0x1.0p-53;
    const double u2 = (double)(((uint64_t(r.v[2]) << 32 | r.v[3]) >> 11) + 1) * 0x1.0p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    z0 = rad * std::cos(ang);
    z1 = rad * std::sin(ang);
}

// stream tags used across the library (values arbitrary but frozen;
// changing them changes every golden output)
enum : uint64_t {
    STREAM_BROWNIAN = 0x42524f574e49414eull,
    STREAM_X0       = 0x5830303030303030ull,
    STREAM_ENV      = 0x454e5649524f4e4dull,
    STREAM_PAIRS    = 0x5041495253454c43ull,
    STREAM_ORACLE   = 0x4f5241434c453030ull,
};

} // namespace rbm
