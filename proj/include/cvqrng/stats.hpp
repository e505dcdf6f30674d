#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

// NIST SP 800-22 subset (sts-2.1.2 reference statistics) and a KS helper.
// Bit sequences are spans of 0/1 bytes.
namespace cvqrng::stats {

using Bits = std::span<const std::uint8_t>;

double igamc(double a, double x);

double frequency_test(Bits e);
double block_frequency_test(Bits e, std::size_t block_length);
double runs_test(Bits e);
/// Block length and class table are chosen from n as in SP 800-22 (n >= 128).
double longest_run_test(Bits e);

struct LongestRunResult {
    double chi_squared = 0.0;
    double pvalue = 0.0;
};
LongestRunResult longest_run_detail(Bits e);

double cumulative_sums_test(Bits e, bool reverse);
double dft_test(Bits e);
double approximate_entropy_test(Bits e, int m);

struct SerialResult {
    double p1 = 0.0;
    double p2 = 0.0;
};
SerialResult serial_test(Bits e, int m);

enum class TestId {
    Frequency,
    BlockFrequency,
    CumulativeSums,
    Runs,
    LongestRun,
    Fft,
    ApproximateEntropy,
    Serial,
};

std::vector<TestId> all_implemented_tests();
/// SP 800-22 rows not provided by this battery.
std::vector<std::string> unimplemented_tests();

struct BatteryOptions {
    double alpha = 0.01;
    std::size_t block_frequency_m = 128;
    /// 0 selects min(10, floor(log2 n) - 6).
    int approximate_entropy_m = 0;
    /// 0 selects min(16, floor(log2 n) - 3).
    int serial_m = 0;
    unsigned threads = 1;
};

struct TestOutcome {
    std::string name;
    std::vector<double> pvalues;  // one per string
    double proportion = 0.0;
    double uniformity_pvalue = 0.0;
    bool passed = false;   // proportion >= bound
    bool uniform = false;  // uniformity_pvalue >= 1e-4
};

struct BatteryReport {
    std::size_t n_strings = 0;
    std::size_t string_length = 0;
    double alpha = 0.01;
    double proportion_bound = 0.0;
    std::vector<TestOutcome> outcomes;
    std::vector<std::string> unimplemented;

    bool all_passed() const;
    std::string to_table() const;
    std::string to_csv() const;
};

/// p_hat - 3 sqrt(p_hat (1 - p_hat) / k), p_hat = 1 - alpha.
double proportion_lower_bound(std::size_t n_strings, double alpha = 0.01);
/// Chi-square of the p-values over ten equal bins, igamc(9/2, chi2/2).
double uniformity_pvalue(std::span<const double> pvalues);

BatteryReport run_battery(Bits bits, std::size_t n_strings, std::size_t string_length,
                          const std::vector<TestId>& tests = all_implemented_tests(),
                          const BatteryOptions& options = {});

/// Unpacks MSB-first bytes into 0/1 values.
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t n_bits);
/// Flat binary export for external suites: bits packed MSB-first, no header.
void export_flat_binary(const std::string& path, Bits bits);

struct KsResult {
    double statistic = 0.0;
    double pvalue = 0.0;
};

/// One-sample Kolmogorov-Smirnov test against N(mean, sd^2); asymptotic
/// p-value with Stephens' small-sample correction.
KsResult ks_test_normal(std::span<const double> samples, double mean, double sd);

/// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

}  // namespace cvqrng::stats
