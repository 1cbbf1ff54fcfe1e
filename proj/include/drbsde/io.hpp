#pragma once

#include <iosfwd>
#include <cstddef>
#include <cstdint>
#include <string>

namespace drbsde {

/// Round-trippable decimal text for a double: 17 significant digits, "." as
/// the decimal separator regardless of the global locale.
std::string format_real(double value);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

}  // namespace drbsde
