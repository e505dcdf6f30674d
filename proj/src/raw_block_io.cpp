#include "cvqrng/raw_block_io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "cvqrng/error.hpp"
#include "cvqrng/io.hpp"

namespace cvqrng::io {
namespace {

std::string_view next_line(std::string_view& bytes) {
    const auto pos = bytes.find('\n');
    if (pos == std::string_view::npos) throw InvalidInput("truncated raw block header");
    auto line = bytes.substr(0, pos);
    bytes.remove_prefix(pos + 1);
    return line;
}

std::string_view field(std::string_view line, std::string_view key) {
    if (line.substr(0, key.size()) != key || line.size() <= key.size() || line[key.size()] != ' ')
        throw InvalidInput("raw block header: expected '" + std::string(key) + "'");
    return line.substr(key.size() + 1);
}

template <class T>
T parse_number(std::string_view text, int base = 10) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw InvalidInput("raw block header: bad number '" + std::string(text) + "'");
    return value;
}

}  // namespace

std::string encode_raw_block(const detector::RawSampleBlock& block) {
    std::ostringstream os;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(block.config.hash()));
    os << kRawMagic << '\n'
       << "version " << kRawVersion << '\n'
       << "bits " << block.config.adc_bits << '\n'
       << "count " << block.codes.size() << '\n'
       << "config_hash " << hash << '\n'
       << "run_id " << block.run_id << '\n'
       << "clipped " << block.clipped << '\n'
       << "encoding int16le\n";
    std::string out = os.str();
    out.reserve(out.size() + 2 * block.codes.size());
    for (std::int16_t c : block.codes) {
        const auto u = static_cast<std::uint16_t>(c);
        out.push_back(static_cast<char>(u & 0xff));
        out.push_back(static_cast<char>(u >> 8));
    }
    return out;
}

RawBlockFile decode_raw_block(std::string_view bytes) {
    if (next_line(bytes) != kRawMagic) throw InvalidInput("not a raw sample file");
    if (parse_number<int>(field(next_line(bytes), "version")) != kRawVersion)
        throw InvalidInput("unsupported raw sample file version");
    RawBlockFile f;
    f.bits = parse_number<int>(field(next_line(bytes), "bits"));
    const auto count = parse_number<std::uint64_t>(field(next_line(bytes), "count"));
    f.config_hash = parse_number<std::uint64_t>(field(next_line(bytes), "config_hash"), 16);
    f.run_id = parse_number<std::uint64_t>(field(next_line(bytes), "run_id"));
    f.clipped = parse_number<std::uint64_t>(field(next_line(bytes), "clipped"));
    if (field(next_line(bytes), "encoding") != "int16le") throw InvalidInput("unsupported encoding");
    if (f.bits < 2 || f.bits > 16) throw InvalidInput("raw block bits out of range");
    if (bytes.size() != 2 * count) throw InvalidInput("raw block payload length mismatch");
    const std::int32_t lo = -(1 << (f.bits - 1));
    const std::int32_t hi = (1 << (f.bits - 1)) - 1;
    f.codes.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[2 * i]) |
                                                  (static_cast<unsigned char>(bytes[2 * i + 1]) << 8));
        const auto c = static_cast<std::int16_t>(u);
        if (c < lo || c > hi) throw InvalidInput("raw block code outside ADC range");
        f.codes[i] = c;
    }
    return f;
}

void write_raw_block(const std::filesystem::path& path, const detector::RawSampleBlock& block) {
    write_file_atomic(path, encode_raw_block(block));
}

RawBlockFile read_raw_block(const std::filesystem::path& path) {
    return decode_raw_block(read_file(path));
}

std::string encode_codes_csv(const std::vector<std::int16_t>& codes) {
    std::string out = "code\n";
    for (auto c : codes) {
        out += std::to_string(c);
        out += '\n';
    }
    return out;
}

}  // namespace cvqrng::io
