#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cvqrng/detector.hpp"
#include "cvqrng/entropy.hpp"

namespace cvqrng::extractor {

/// Packed bit string. Bit i lives in word i/64 at position i%64.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}
    static BitVector from_string(const std::string& bits);  // "0110..."

    std::size_t size() const { return size_; }
    bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
    void set(std::size_t i, bool v) {
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        words_[i >> 6] = v ? (words_[i >> 6] | mask) : (words_[i >> 6] & ~mask);
    }
    void push_back(bool v);
    void append(const BitVector& other);
    const std::vector<std::uint64_t>& words() const { return words_; }
    std::vector<std::uint64_t>& words() { return words_; }
    std::string to_string() const;
    /// Bytes with the first bit in the most significant position; the tail is zero-padded.
    std::vector<std::uint8_t> pack_msb_first() const;
    static BitVector unpack_msb_first(std::span<const std::uint8_t> bytes, std::size_t bits);

    BitVector operator^(const BitVector& o) const;
    bool operator==(const BitVector& o) const = default;

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct ExtractionPlan {
    int bits_per_sample = 8;
    std::int64_t samples_per_block = 0;
    std::int64_t input_bits = 0;
    double h_min_per_sample = 0.0;
    /// log2(1/epsilon); kept exactly instead of epsilon itself.
    double log2_inv_epsilon = 0.0;
    std::int64_t output_bits = 0;
    std::int64_t seed_bits = 0;

    double epsilon() const;
    double output_bits_per_sample() const;
    /// N*h - 2 log2(1/eps) - m; never negative for a valid plan.
    double leftover_hash_slack() const;
    void validate() const;
};

/// Smallest N with floor(N*h - 2 log2(1/eps)) >= target*N. Throws InfeasiblePlan when
/// target >= h_min.
ExtractionPlan plan_extraction(int bits_per_sample, double h_min_per_sample, double epsilon,
                               double target_bits_per_sample);
ExtractionPlan plan_extraction_log2(int bits_per_sample, double h_min_per_sample, double log2_inv_epsilon,
                                    double target_bits_per_sample);

enum class SeedProvenance { ExternalQrng, TestPrng };
std::string to_string(SeedProvenance p);

struct ToeplitzSeed {
    BitVector bits;
    SeedProvenance provenance = SeedProvenance::ExternalQrng;
    std::string source;

    bool secure() const { return provenance == SeedProvenance::ExternalQrng; }
};

/// Deterministic seed from the library PRNG. Not suitable for deployment.
ToeplitzSeed make_test_seed(std::size_t bits, std::uint64_t rng_seed);

/// Raw binary seed file, bits packed MSB-first; must hold exactly ceil(bits/8) bytes.
ToeplitzSeed read_seed_file(const std::string& path, std::size_t bits);
void write_seed_file(const std::string& path, const ToeplitzSeed& seed);

/// Reference GF(2) product with T[i][j] = seed[i + n - 1 - j].
BitVector toeplitz_hash_naive(const BitVector& input, const BitVector& seed, std::size_t m);

/// Word-parallel evaluation of the same product.
class ToeplitzHasher {
public:
    ToeplitzHasher(const BitVector& seed, std::size_t n, std::size_t m);
    BitVector operator()(const BitVector& input) const;
    std::size_t input_bits() const { return n_; }
    std::size_t output_bits() const { return m_; }

private:
    std::size_t n_, m_;
    // shifted_[s] holds seed bits starting at offset s, so a row starting at 64q+s is word aligned.
    std::vector<std::vector<std::uint64_t>> shifted_;
};

BitVector toeplitz_hash(const BitVector& input, const BitVector& seed, std::size_t m);

/// Two's-complement codes, `bits` per sample, most significant bit first.
BitVector serialize_samples(std::span<const std::int16_t> codes, int bits);

/// What extraction may rely on: the certified bound and the scheduler's verdict.
struct EntropyCertificate {
    entropy::EntropyBound bound;
    bool fresh = false;
    std::string scheduler_decision = "keep";
};

struct ExtractionReport {
    ExtractionPlan plan;
    SeedProvenance seed_provenance = SeedProvenance::ExternalQrng;
    std::string seed_source;
    double certified_h_min = 0.0;
    double delta = 0.0;
    std::int64_t blocks = 0;
    std::int64_t raw_samples_used = 0;
    std::int64_t raw_samples_discarded = 0;
    std::int64_t raw_bits = 0;
    std::int64_t output_bits = 0;
    double pulse_rate = 0.0;

    double effective_bits_per_sample() const;
    double output_bit_rate() const;
    /// "key: value" lines.
    std::string to_text() const;
};

struct ExtractionResult {
    BitVector output;
    ExtractionReport report;
};

/// Hashes consecutive N-sample blocks with one shared seed. Refuses (StaleCalibration)
/// unless the certificate is fresh, and (CalibrationError) if the plan assumes more
/// entropy than certified.
ExtractionResult extract_stream(std::span<const detector::RawSampleBlock> blocks, const ExtractionPlan& plan,
                                const ToeplitzSeed& seed, const EntropyCertificate& certificate,
                                unsigned threads = 1);

}  // namespace cvqrng::extractor
