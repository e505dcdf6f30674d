#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cvqrng/detector.hpp"

// Raw sample file layout: eight newline-terminated text lines
//
//   CVQRNG-RAW
//   version 1
//   bits <adc bits>
//   count <number of codes>
//   config_hash <16 lowercase hex digits>
//   run_id <decimal>
//   clipped <decimal>
//   encoding int16le
//
// followed by `count` two's-complement 16-bit little-endian codes.
namespace cvqrng::io {

inline constexpr std::string_view kRawMagic = "CVQRNG-RAW";
inline constexpr int kRawVersion = 1;

struct RawBlockFile {
    int bits = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t run_id = 0;
    std::uint64_t clipped = 0;
    std::vector<std::int16_t> codes;
};

std::string encode_raw_block(const detector::RawSampleBlock& block);
RawBlockFile decode_raw_block(std::string_view bytes);

void write_raw_block(const std::filesystem::path& path, const detector::RawSampleBlock& block);
RawBlockFile read_raw_block(const std::filesystem::path& path);

/// One code per line, header "code".
std::string encode_codes_csv(const std::vector<std::int16_t>& codes);

}  // namespace cvqrng::io
