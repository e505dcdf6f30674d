#include "cvqrng/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "cvqrng/error.hpp"
#include "cvqrng/io.hpp"
#include "fftw_support.hpp"

namespace cvqrng::stats {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

void need(Bits e, std::size_t n, const char* test) {
    if (e.size() < n) throw InvalidInput(std::string(test) + " needs at least " + std::to_string(n) + " bits");
}

// Overlapping m-bit pattern counts with wrap-around.
std::vector<std::uint64_t> pattern_counts(Bits e, int m) {
    const std::size_t n = e.size();
    std::vector<std::uint64_t> counts(std::size_t{1} << m, 0);
    const std::uint64_t mask = (std::uint64_t{1} << m) - 1;
    std::uint64_t w = 0;
    for (int i = 0; i < m - 1; ++i) w = (w << 1) | e[static_cast<std::size_t>(i) % n];
    for (std::size_t i = 0; i < n; ++i) {
        w = ((w << 1) | e[(i + static_cast<std::size_t>(m) - 1) % n]) & mask;
        ++counts[w];
    }
    return counts;
}

int floor_log2(std::size_t n) {
    int r = -1;
    while (n) {
        n >>= 1;
        ++r;
    }
    return r;
}

}  // namespace

double igamc(double a, double x) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(a, x);
}

double frequency_test(Bits e) {
    need(e, 1, "frequency test");
    long long s = 0;
    for (auto b : e) s += b ? 1 : -1;
    const double s_obs = std::abs(static_cast<double>(s)) / std::sqrt(static_cast<double>(e.size()));
    return std::erfc(s_obs / std::numbers::sqrt2);
}

double block_frequency_test(Bits e, std::size_t m) {
    if (m == 0) throw InvalidInput("block length must be >= 1");
    const std::size_t blocks = e.size() / m;
    if (blocks == 0) throw InvalidInput("block frequency test needs at least one full block");
    double chi = 0.0;
    for (std::size_t i = 0; i < blocks; ++i) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < m; ++j) ones += e[i * m + j];
        const double pi = static_cast<double>(ones) / static_cast<double>(m) - 0.5;
        chi += pi * pi;
    }
    chi *= 4.0 * static_cast<double>(m);
    return igamc(static_cast<double>(blocks) / 2.0, chi / 2.0);
}

double runs_test(Bits e) {
    need(e, 2, "runs test");
    const auto n = static_cast<double>(e.size());
    double ones = 0;
    for (auto b : e) ones += b;
    const double pi = ones / n;
    if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(n)) return 0.0;  // frequency prerequisite fails
    double v = 1;
    for (std::size_t k = 0; k + 1 < e.size(); ++k) v += e[k] != e[k + 1] ? 1 : 0;
    return std::erfc(std::abs(v - 2.0 * n * pi * (1 - pi)) / (2.0 * std::sqrt(2.0 * n) * pi * (1 - pi)));
}

LongestRunResult longest_run_detail(Bits e) {
    need(e, 128, "longest-run test");
    const std::size_t n = e.size();
    std::size_t m;
    std::vector<int> v;
    std::vector<double> pi;
    if (n < 6272) {
        m = 8;
        v = {1, 2, 3, 4};
        pi = {0.21484375, 0.3671875, 0.23046875, 0.1875};
    } else if (n < 750000) {
        m = 128;
        v = {4, 5, 6, 7, 8, 9};
        pi = {0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847};
    } else {
        m = 10000;
        v = {10, 11, 12, 13, 14, 15, 16};
        pi = {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727};
    }
    const std::size_t blocks = n / m;
    std::vector<double> nu(v.size(), 0.0);
    for (std::size_t i = 0; i < blocks; ++i) {
        int best = 0, cur = 0;
        for (std::size_t j = 0; j < m; ++j) {
            cur = e[i * m + j] ? cur + 1 : 0;
            best = std::max(best, cur);
        }
        const int idx = std::clamp(best, v.front(), v.back()) - v.front();
        nu[static_cast<std::size_t>(idx)] += 1;
    }
    double chi = 0.0;
    const auto nb = static_cast<double>(blocks);
    for (std::size_t i = 0; i < v.size(); ++i) chi += (nu[i] - nb * pi[i]) * (nu[i] - nb * pi[i]) / (nb * pi[i]);
    const double k = static_cast<double>(v.size() - 1);
    return {chi, igamc(k / 2.0, chi / 2.0)};
}

double longest_run_test(Bits e) { return longest_run_detail(e).pvalue; }

double cumulative_sums_test(Bits e, bool reverse) {
    need(e, 1, "cumulative sums test");
    const std::size_t n = e.size();
    long long s = 0, z = 0;
    for (std::size_t i = 0; i < n; ++i) {
        s += e[reverse ? n - 1 - i : i] ? 1 : -1;
        z = std::max(z, std::llabs(s));
    }
    const double nn = static_cast<double>(n), zz = static_cast<double>(z), sq = std::sqrt(nn);
    double t1 = 0.0, t2 = 0.0;
    for (auto k = static_cast<long long>(std::floor((-nn / zz + 1) / 4)); k <= static_cast<long long>(std::floor((nn / zz - 1) / 4)); ++k)
        t1 += normal_cdf((4.0 * k + 1) * zz / sq) - normal_cdf((4.0 * k - 1) * zz / sq);
    for (auto k = static_cast<long long>(std::floor((-nn / zz - 3) / 4)); k <= static_cast<long long>(std::floor((nn / zz - 1) / 4)); ++k)
        t2 += normal_cdf((4.0 * k + 3) * zz / sq) - normal_cdf((4.0 * k + 1) * zz / sq);
    return std::clamp(1.0 - t1 + t2, 0.0, 1.0);
}

double dft_test(Bits e) {
    need(e, 2, "DFT test");
    const std::size_t n = e.size();
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan plan;
    {
        // FFTW's planner is not thread-safe; ESTIMATE keeps plans (and results) deterministic.
        const std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) in[i] = e[i] ? 1.0 : -1.0;
    fftw_execute(plan);
    const double t = std::sqrt(std::log(1.0 / 0.05) * static_cast<double>(n));
    std::size_t below = 0;
    for (std::size_t i = 0; i < n / 2; ++i) below += std::hypot(out[i][0], out[i][1]) < t ? 1 : 0;
    {
        const std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    const double nn = static_cast<double>(n);
    const double n0 = 0.95 * nn / 2.0;
    const double d = (static_cast<double>(below) - n0) / std::sqrt(nn * 0.95 * 0.05 / 4.0);
    return std::erfc(std::abs(d) / std::numbers::sqrt2);
}

double approximate_entropy_test(Bits e, int m) {
    if (m < 1 || m > 24) throw InvalidInput("approximate entropy block length must be in [1, 24]");
    need(e, static_cast<std::size_t>(m) + 1, "approximate entropy test");
    const auto n = static_cast<double>(e.size());
    auto phi = [&](int len) {
        double sum = 0.0;
        for (auto c : pattern_counts(e, len))
            if (c) sum += (static_cast<double>(c) / n) * std::log(static_cast<double>(c) / n);
        return sum;
    };
    const double apen = phi(m) - phi(m + 1);
    const double chi = 2.0 * n * (std::log(2.0) - apen);
    return igamc(std::exp2(m - 1), chi / 2.0);
}

SerialResult serial_test(Bits e, int m) {
    if (m < 2 || m > 24) throw InvalidInput("serial block length must be in [2, 24]");
    need(e, static_cast<std::size_t>(m), "serial test");
    const auto n = static_cast<double>(e.size());
    auto psi2 = [&](int len) {
        if (len <= 0) return 0.0;
        double sum = 0.0;
        for (auto c : pattern_counts(e, len)) sum += static_cast<double>(c) * static_cast<double>(c);
        return std::exp2(len) / n * sum - n;
    };
    const double a = psi2(m), b = psi2(m - 1), c = psi2(m - 2);
    return {igamc(std::exp2(m - 2), (a - b) / 2.0), igamc(std::exp2(m - 3), (a - 2 * b + c) / 2.0)};
}

std::vector<TestId> all_implemented_tests() {
    return {TestId::Frequency, TestId::BlockFrequency, TestId::CumulativeSums, TestId::Runs,
            TestId::LongestRun, TestId::Fft, TestId::ApproximateEntropy, TestId::Serial};
}

std::vector<std::string> unimplemented_tests() {
    return {"Rank", "NonOverlappingTemplate", "OverlappingTemplate", "Universal",
            "RandomExcursions", "RandomExcursionsVariant", "LinearComplexity"};
}

double proportion_lower_bound(std::size_t k, double alpha) {
    if (k == 0) throw InvalidInput("proportion bound needs at least one string");
    const double p = 1.0 - alpha;
    return p - 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(k));
}

double uniformity_pvalue(std::span<const double> pvalues) {
    if (pvalues.empty()) throw InvalidInput("no p-values");
    std::vector<double> bins(10, 0.0);
    for (double p : pvalues) bins[static_cast<std::size_t>(std::min(9.0, std::floor(p * 10.0)))] += 1;
    const double expect = static_cast<double>(pvalues.size()) / 10.0;
    double chi = 0.0;
    for (double f : bins) chi += (f - expect) * (f - expect) / expect;
    return igamc(4.5, chi / 2.0);
}

bool BatteryReport::all_passed() const {
    return std::all_of(outcomes.begin(), outcomes.end(), [](const TestOutcome& o) { return o.passed; });
}

std::string BatteryReport::to_table() const {
    std::ostringstream os;
    os << "strings: " << n_strings << "  length: " << string_length << "  alpha: " << alpha
       << "  proportion bound: " << std::fixed << std::setprecision(4) << proportion_bound << '\n';
    os << std::left << std::setw(26) << "test" << std::right << std::setw(12) << "p-value" << std::setw(12)
       << "proportion" << std::setw(10) << "result" << '\n';
    for (const auto& o : outcomes) {
        os << std::left << std::setw(26) << o.name << std::right << std::setw(12) << std::setprecision(6)
           << o.uniformity_pvalue << std::setw(12) << std::setprecision(4) << o.proportion << std::setw(10)
           << (o.passed ? "Success" : "Failure") << '\n';
    }
    for (const auto& u : unimplemented) os << std::left << std::setw(26) << u << std::right << std::setw(34) << "not implemented" << '\n';
    return os.str();
}

std::string BatteryReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "test,uniformity_pvalue,proportion,proportion_bound,passed,uniform\n";
    for (const auto& o : outcomes)
        os << o.name << ',' << o.uniformity_pvalue << ',' << o.proportion << ',' << proportion_bound << ','
           << (o.passed ? 1 : 0) << ',' << (o.uniform ? 1 : 0) << '\n';
    for (const auto& u : unimplemented) os << u << ",,,,unimplemented,\n";
    return os.str();
}

BatteryReport run_battery(Bits bits, std::size_t n_strings, std::size_t len, const std::vector<TestId>& tests,
                          const BatteryOptions& opt) {
    if (n_strings == 0 || len == 0) throw InvalidInput("battery needs at least one non-empty string");
    if (bits.size() / len < n_strings) throw InvalidInput("not enough bits for the requested strings");
    if (len < 128) throw InvalidInput("battery strings must hold at least 128 bits");
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
    const int lg = floor_log2(len);
    const int apen_m = opt.approximate_entropy_m ? opt.approximate_entropy_m : std::max(1, std::min(10, lg - 6));
    const int serial_m = opt.serial_m ? opt.serial_m : std::max(2, std::min(16, lg - 3));

    // Column layout: one row of p-values per string, one column per sub-test.
    std::vector<std::string> names;
    for (auto t : tests) {
        switch (t) {
            case TestId::Frequency: names.push_back("Frequency"); break;
            case TestId::BlockFrequency: names.push_back("BlockFrequency"); break;
            case TestId::CumulativeSums:
                names.push_back("CumulativeSums-forward");
                names.push_back("CumulativeSums-reverse");
                break;
            case TestId::Runs: names.push_back("Runs"); break;
            case TestId::LongestRun: names.push_back("LongestRun"); break;
            case TestId::Fft: names.push_back("FFT"); break;
            case TestId::ApproximateEntropy: names.push_back("ApproximateEntropy"); break;
            case TestId::Serial:
                names.push_back("Serial-1");
                names.push_back("Serial-2");
                break;
        }
    }
    std::vector<std::vector<double>> p(n_strings);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t s = first; s < n_strings; s += stride) {
            const Bits e = bits.subspan(s * len, len);
            auto& row = p[s];
            for (auto t : tests) {
                switch (t) {
                    case TestId::Frequency: row.push_back(frequency_test(e)); break;
                    case TestId::BlockFrequency: row.push_back(block_frequency_test(e, opt.block_frequency_m)); break;
                    case TestId::CumulativeSums:
                        row.push_back(cumulative_sums_test(e, false));
                        row.push_back(cumulative_sums_test(e, true));
                        break;
                    case TestId::Runs: row.push_back(runs_test(e)); break;
                    case TestId::LongestRun: row.push_back(longest_run_test(e)); break;
                    case TestId::Fft: row.push_back(dft_test(e)); break;
                    case TestId::ApproximateEntropy: row.push_back(approximate_entropy_test(e, apen_m)); break;
                    case TestId::Serial: {
                        const auto r = serial_test(e, serial_m);
                        row.push_back(r.p1);
                        row.push_back(r.p2);
                        break;
                    }
                }
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(n_strings)));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }

    BatteryReport rep;
    rep.n_strings = n_strings;
    rep.string_length = len;
    rep.alpha = opt.alpha;
    rep.proportion_bound = proportion_lower_bound(n_strings, opt.alpha);
    rep.unimplemented = unimplemented_tests();
    for (std::size_t c = 0; c < names.size(); ++c) {
        TestOutcome o;
        o.name = names[c];
        std::size_t pass = 0;
        for (std::size_t s = 0; s < n_strings; ++s) {
            const double v = std::clamp(p[s][c], 0.0, 1.0);
            o.pvalues.push_back(v);
            pass += v >= opt.alpha ? 1 : 0;
        }
        o.proportion = static_cast<double>(pass) / static_cast<double>(n_strings);
        o.uniformity_pvalue = uniformity_pvalue(o.pvalues);
        o.passed = o.proportion >= rep.proportion_bound;
        o.uniform = o.uniformity_pvalue >= 1e-4;
        rep.outcomes.push_back(std::move(o));
    }
    return rep;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t n_bits) {
    if (bytes.size() * 8 < n_bits) throw InvalidInput("not enough bytes for the requested bit count");
    std::vector<std::uint8_t> out(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1U;
    return out;
}

void export_flat_binary(const std::string& path, Bits bits) {
    std::string bytes((bits.size() + 7) / 8, '\0');
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) bytes[i / 8] = static_cast<char>(static_cast<unsigned char>(bytes[i / 8]) | (0x80U >> (i % 8)));
    io::write_file_atomic(path, bytes);
}

double kolmogorov_survival(double lambda) {
    if (lambda < 0.2) return 1.0;  // the alternating series is 1 to double precision here
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-18) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_normal(std::span<const double> samples, double mean, double sd) {
    if (samples.empty()) throw InvalidInput("KS test needs samples");
    if (!(sd > 0.0)) throw InvalidInput("KS reference standard deviation must be > 0");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const auto n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = normal_cdf((x[i] - mean) / sd);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    const double sqn = std::sqrt(n);
    return {d, kolmogorov_survival((sqn + 0.12 + 0.11 / sqn) * d)};
}

}  // namespace cvqrng::stats
