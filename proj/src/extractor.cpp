#include "cvqrng/extractor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <thread>

#include "cvqrng/error.hpp"
#include "cvqrng/io.hpp"
#include "cvqrng/rng.hpp"

namespace cvqrng::extractor {

// ---- BitVector ------------------------------------------------------------

BitVector BitVector::from_string(const std::string& bits) {
    BitVector v(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != '0' && bits[i] != '1') throw InvalidInput("bit string may only contain 0 and 1");
        v.set(i, bits[i] == '1');
    }
    return v;
}

void BitVector::push_back(bool v) {
    if ((size_ & 63) == 0) words_.push_back(0);
    ++size_;
    set(size_ - 1, v);
}

void BitVector::append(const BitVector& other) {
    if ((size_ & 63) == 0) {
        words_.insert(words_.end(), other.words_.begin(), other.words_.end());
        size_ += other.size_;
        return;
    }
    for (std::size_t i = 0; i < other.size_; ++i) push_back(other.get(i));
}

std::string BitVector::to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i) s[i] = get(i) ? '1' : '0';
    return s;
}

std::vector<std::uint8_t> BitVector::pack_msb_first() const {
    std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
    for (std::size_t i = 0; i < size_; ++i)
        if (get(i)) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
    return out;
}

BitVector BitVector::unpack_msb_first(std::span<const std::uint8_t> bytes, std::size_t bits) {
    if (bytes.size() * 8 < bits) throw InvalidInput("not enough bytes for the requested bit count");
    BitVector v(bits);
    for (std::size_t i = 0; i < bits; ++i) v.set(i, (bytes[i / 8] >> (7 - i % 8)) & 1U);
    return v;
}

BitVector BitVector::operator^(const BitVector& o) const {
    if (o.size_ != size_) throw InvalidInput("xor of bit vectors with different lengths");
    BitVector r = *this;
    for (std::size_t w = 0; w < words_.size(); ++w) r.words_[w] ^= o.words_[w];
    return r;
}

// ---- plan -------------------------------------------------------------------

double ExtractionPlan::epsilon() const { return std::exp2(-log2_inv_epsilon); }

double ExtractionPlan::output_bits_per_sample() const {
    return static_cast<double>(output_bits) / static_cast<double>(samples_per_block);
}

double ExtractionPlan::leftover_hash_slack() const {
    return static_cast<double>(samples_per_block) * h_min_per_sample - 2.0 * log2_inv_epsilon -
           static_cast<double>(output_bits);
}

void ExtractionPlan::validate() const {
    if (bits_per_sample < 1 || bits_per_sample > 16) throw InvalidInput("bits_per_sample must be in [1, 16]");
    if (samples_per_block < 1) throw InvalidInput("samples_per_block must be >= 1");
    if (input_bits != samples_per_block * bits_per_sample) throw InvalidInput("input_bits must equal N * bits");
    if (!(h_min_per_sample > 0.0) || h_min_per_sample > bits_per_sample)
        throw InvalidInput("h_min_per_sample must lie in (0, bits_per_sample]");
    if (!(log2_inv_epsilon > 1.0)) throw InvalidInput("epsilon must be < 1/2");
    if (output_bits < 1) throw InvalidInput("output_bits must be >= 1");
    if (seed_bits != input_bits + output_bits - 1) throw InvalidInput("seed_bits must equal n + m - 1");
    const double bound =
        std::floor(static_cast<double>(samples_per_block) * h_min_per_sample - 2.0 * log2_inv_epsilon);
    if (static_cast<double>(output_bits) > bound) throw InvalidInput("output_bits exceed the leftover-hash bound");
}

ExtractionPlan plan_extraction_log2(int bits_per_sample, double h_min, double log2_inv_epsilon, double target) {
    if (bits_per_sample < 1 || bits_per_sample > 16) throw InvalidInput("bits_per_sample must be in [1, 16]");
    if (!(log2_inv_epsilon > 1.0) || !std::isfinite(log2_inv_epsilon)) throw InvalidInput("epsilon must lie in (0, 1/2)");
    if (!(h_min > 0.0) || h_min > bits_per_sample) throw InvalidInput("h_min_per_sample must lie in (0, bits_per_sample]");
    if (!(target > 0.0)) throw InvalidInput("target bits per sample must be > 0");
    if (target >= h_min) throw InfeasiblePlan("target rate must be below the min-entropy per sample");

    // Below N0 = 2L/(h - target) the inequality cannot hold; scan upward from there.
    // The target comparison tolerates decimal round-off in `target` (1e-12 relative); the floor does not.
    const double n0 = 2.0 * log2_inv_epsilon / (h_min - target);
    if (n0 > 1e12) throw InfeasiblePlan("required block size exceeds 1e12 samples");
    auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(n0)) - 1);
    for (;; ++n) {
        const double nn = static_cast<double>(n);
        const double m = std::floor(nn * h_min - 2.0 * log2_inv_epsilon);
        if (m >= 1.0 && m >= target * nn * (1.0 - 1e-12)) {
            ExtractionPlan p;
            p.bits_per_sample = bits_per_sample;
            p.samples_per_block = n;
            p.input_bits = n * bits_per_sample;
            p.h_min_per_sample = h_min;
            p.log2_inv_epsilon = log2_inv_epsilon;
            p.output_bits = static_cast<std::int64_t>(m);
            p.seed_bits = p.input_bits + p.output_bits - 1;
            p.validate();
            return p;
        }
    }
}

ExtractionPlan plan_extraction(int bits_per_sample, double h_min, double epsilon, double target) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidInput("epsilon must lie in (0, 1/2)");
    return plan_extraction_log2(bits_per_sample, h_min, -std::log2(epsilon), target);
}

// ---- seed -------------------------------------------------------------------

std::string to_string(SeedProvenance p) {
    return p == SeedProvenance::ExternalQrng ? "external-qrng" : "test-prng (NOT SECURE)";
}

ToeplitzSeed make_test_seed(std::size_t bits, std::uint64_t rng_seed) {
    auto rng = RngStream::substream(rng_seed, "toeplitz-seed", 0);
    ToeplitzSeed s;
    s.bits = BitVector(bits);
    for (auto& w : s.bits.words()) w = rng();
    if (bits % 64) s.bits.words().back() &= (std::uint64_t{1} << (bits % 64)) - 1;
    s.provenance = SeedProvenance::TestPrng;
    s.source = "rng-seed " + std::to_string(rng_seed);
    return s;
}

ToeplitzSeed read_seed_file(const std::string& path, std::size_t bits) {
    const auto raw = io::read_file(path);
    const std::size_t need = (bits + 7) / 8;
    if (raw.size() != need)
        throw InvalidInput("seed file " + path + " holds " + std::to_string(raw.size()) + " bytes, expected " +
                           std::to_string(need));
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
    ToeplitzSeed s;
    s.bits = BitVector::unpack_msb_first(bytes, bits);
    s.provenance = SeedProvenance::ExternalQrng;
    s.source = path;
    return s;
}

void write_seed_file(const std::string& path, const ToeplitzSeed& seed) {
    const auto bytes = seed.bits.pack_msb_first();
    io::write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---- hashing ----------------------------------------------------------------

namespace {

void check_lengths(std::size_t n, std::size_t seed_bits, std::size_t m) {
    if (n == 0 || m == 0) throw InvalidInput("Toeplitz dimensions must be >= 1");
    if (seed_bits != n + m - 1) throw InvalidInput("seed length must equal n + m - 1");
}

}  // namespace

BitVector toeplitz_hash_naive(const BitVector& input, const BitVector& seed, std::size_t m) {
    const std::size_t n = input.size();
    check_lengths(n, seed.size(), m);
    std::vector<std::uint8_t> x(n), t(seed.size());
    for (std::size_t j = 0; j < n; ++j) x[j] = input.get(j);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = seed.get(k);
    BitVector out(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::uint8_t acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc ^= static_cast<std::uint8_t>(t[i + n - 1 - j] & x[j]);
        out.set(i, acc & 1U);
    }
    return out;
}

ToeplitzHasher::ToeplitzHasher(const BitVector& seed, std::size_t n, std::size_t m)
    : n_(n), m_(m) {
    check_lengths(n, seed.size(), m);
    const std::size_t total_words = (seed.size() + 63) / 64 + 1;  // +1 so row reads never run past the end
    auto padded = seed.words();
    padded.resize(total_words + 1, 0);
    shifted_.assign(64, std::vector<std::uint64_t>(total_words, 0));
    for (unsigned s = 0; s < 64; ++s) {
        for (std::size_t w = 0; w < total_words; ++w) {
            shifted_[s][w] = s == 0 ? padded[w] : (padded[w] >> s) | (padded[w + 1] << (64 - s));
        }
    }
}

BitVector ToeplitzHasher::operator()(const BitVector& input) const {
    if (input.size() != n_) throw InvalidInput("input length does not match the hasher");
    // Column form: out = XOR over j with x_j = 1 of seed[n-1-j .. n-1-j+m).
    const std::size_t out_words = (m_ + 63) / 64;
    std::vector<std::uint64_t> acc(out_words, 0);
    for (std::size_t j = 0; j < n_; ++j) {
        if (!input.get(j)) continue;
        const std::size_t k = n_ - 1 - j;
        const std::uint64_t* row = shifted_[k & 63].data() + (k >> 6);
        for (std::size_t w = 0; w < out_words; ++w) acc[w] ^= row[w];
    }
    if (m_ % 64) acc.back() &= (std::uint64_t{1} << (m_ % 64)) - 1;
    BitVector out(m_);
    out.words() = std::move(acc);
    return out;
}

BitVector toeplitz_hash(const BitVector& input, const BitVector& seed, std::size_t m) {
    return ToeplitzHasher(seed, input.size(), m)(input);
}

BitVector serialize_samples(std::span<const std::int16_t> codes, int bits) {
    if (bits < 1 || bits > 16) throw InvalidInput("bits per sample must be in [1, 16]");
    const std::int32_t lo = -(1 << (bits - 1)), hi = (1 << (bits - 1)) - 1;
    BitVector out(codes.size() * static_cast<std::size_t>(bits));
    std::size_t pos = 0;
    for (auto c : codes) {
        if (c < lo || c > hi) throw InvalidInput("sample outside the two's-complement range");
        const auto u = static_cast<std::uint32_t>(c) & ((1U << bits) - 1);
        for (int b = bits - 1; b >= 0; --b) out.set(pos++, (u >> b) & 1U);
    }
    return out;
}

// ---- stream -----------------------------------------------------------------

double ExtractionReport::effective_bits_per_sample() const {
    return raw_samples_used ? static_cast<double>(output_bits) / static_cast<double>(raw_samples_used) : 0.0;
}

double ExtractionReport::output_bit_rate() const {
    return entropy::output_bit_rate(pulse_rate, effective_bits_per_sample());
}

std::string ExtractionReport::to_text() const {
    std::ostringstream os;
    os.precision(10);
    os << "bits_per_sample: " << plan.bits_per_sample << '\n'
       << "samples_per_block: " << plan.samples_per_block << '\n'
       << "input_bits_per_block: " << plan.input_bits << '\n'
       << "output_bits_per_block: " << plan.output_bits << '\n'
       << "seed_bits: " << plan.seed_bits << '\n'
       << "seed_provenance: " << to_string(seed_provenance) << '\n'
       << "seed_source: " << seed_source << '\n'
       << "seed_reuse: one seed shared by all blocks\n"
       << "log2_inv_epsilon: " << plan.log2_inv_epsilon << '\n'
       << "h_min_per_sample_planned: " << plan.h_min_per_sample << '\n'
       << "h_min_per_sample_certified: " << certified_h_min << '\n'
       << "delta: " << delta << '\n'
       << "leftover_hash_slack_bits: " << plan.leftover_hash_slack() << '\n'
       << "blocks: " << blocks << '\n'
       << "raw_samples_used: " << raw_samples_used << '\n'
       << "raw_samples_discarded: " << raw_samples_discarded << '\n'
       << "raw_bits: " << raw_bits << '\n'
       << "output_bits: " << output_bits << '\n'
       << "effective_bits_per_sample: " << effective_bits_per_sample() << '\n'
       << "pulse_rate_hz: " << pulse_rate << '\n'
       << "output_bit_rate_bps: " << output_bit_rate() << '\n';
    return os.str();
}

ExtractionResult extract_stream(std::span<const detector::RawSampleBlock> blocks, const ExtractionPlan& plan,
                                const ToeplitzSeed& seed, const EntropyCertificate& certificate, unsigned threads) {
    plan.validate();
    if (!certificate.fresh)
        throw StaleCalibration("calibration is not fresh (scheduler: " + certificate.scheduler_decision +
                               "); refusing to extract");
    if (plan.h_min_per_sample > certificate.bound.h_min_bits)
        throw CalibrationError("plan assumes more min-entropy per sample than the calibration certifies");
    if (seed.bits.size() != static_cast<std::size_t>(plan.seed_bits))
        throw InvalidInput("seed length does not match the plan");

    std::vector<std::int16_t> codes;
    double pulse_rate = 0.0;
    for (const auto& b : blocks) {
        if (b.config.adc_bits != plan.bits_per_sample)
            throw InvalidInput("raw block resolution does not match the plan's bits_per_sample");
        codes.insert(codes.end(), b.codes.begin(), b.codes.end());
        pulse_rate = b.config.pulse_rate;
    }
    const auto n_samples = static_cast<std::int64_t>(codes.size());
    const std::int64_t n_blocks = n_samples / plan.samples_per_block;

    const ToeplitzHasher hasher(seed.bits, static_cast<std::size_t>(plan.input_bits),
                                static_cast<std::size_t>(plan.output_bits));
    std::vector<BitVector> outputs(static_cast<std::size_t>(n_blocks));
    auto work = [&](std::int64_t first, std::int64_t stride) {
        for (std::int64_t b = first; b < n_blocks; b += stride) {
            const std::span<const std::int16_t> chunk(codes.data() + b * plan.samples_per_block,
                                                      static_cast<std::size_t>(plan.samples_per_block));
            outputs[static_cast<std::size_t>(b)] = hasher(serialize_samples(chunk, plan.bits_per_sample));
        }
    };
    threads = std::max(1u, threads);
    if (threads == 1 || n_blocks < 2) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }

    ExtractionResult result;
    for (const auto& o : outputs) result.output.append(o);
    auto& r = result.report;
    r.plan = plan;
    r.seed_provenance = seed.provenance;
    r.seed_source = seed.source;
    r.certified_h_min = certificate.bound.h_min_bits;
    r.delta = certificate.bound.delta;
    r.blocks = n_blocks;
    r.raw_samples_used = n_blocks * plan.samples_per_block;
    r.raw_samples_discarded = n_samples - r.raw_samples_used;
    r.raw_bits = r.raw_samples_used * plan.bits_per_sample;
    r.output_bits = static_cast<std::int64_t>(result.output.size());
    r.pulse_rate = pulse_rate;
    return result;
}

}  // namespace cvqrng::extractor
