#include "cvqrng/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "cvqrng/attacklab.hpp"
#include "cvqrng/calibration.hpp"
#include "cvqrng/detector.hpp"
#include "cvqrng/dsp.hpp"
#include "cvqrng/entropy.hpp"
#include "cvqrng/error.hpp"
#include "cvqrng/extractor.hpp"
#include "cvqrng/io.hpp"
#include "cvqrng/raw_block_io.hpp"
#include "cvqrng/rng.hpp"
#include "cvqrng/stats.hpp"

namespace cvqrng::pipeline {

using config::RunConfig;

namespace {

std::string fmt(double v, int precision = 10) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

void write_text(CommandResult& result, const fs::path& path, const std::string& text) {
    io::write_file_atomic(path, text);
    result.artifacts.push_back(path);
}

std::string describe_state(const states::QuantumStateModel& state) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, states::Vacuum>) return "vacuum";
            else if constexpr (std::is_same_v<T, states::Fock>) return "fock(" + std::to_string(s.n) + ")";
            else if constexpr (std::is_same_v<T, states::Thermal>) return "thermal(" + fmt(s.mean_photons) + ")";
            else if constexpr (std::is_same_v<T, states::Mixture>) {
                std::string out = "mixture(";
                for (std::size_t i = 0; i < s.terms.size(); ++i)
                    out += (i ? " " : "") + fmt(s.terms[i].probability) + ":" + std::to_string(s.terms[i].n);
                return out + ")";
            } else {
                return "displaced_squeezed(r=" + fmt(s.r) + ", angle=" + fmt(s.squeeze_angle) + ", alpha=" +
                       fmt(s.displacement.real()) + "+" + fmt(s.displacement.imag()) + "i)";
            }
        },
        state);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::uint64_t run_id_for(const RunConfig& config) { return mix64(config.rng_seed); }

detector::RawSampleBlock load_raw(const RunConfig& config) {
    const auto path = output_path(config, artifact::kRaw);
    if (!fs::exists(path)) throw InvalidInput("missing " + path.string() + "; run simulate first");
    auto file = io::read_raw_block(path);
    if (file.config_hash != config.detector.hash() || file.bits != config.detector.adc_bits)
        throw ConfigError(path.string() + " was recorded with a different detector configuration");
    detector::RawSampleBlock block;
    block.codes = std::move(file.codes);
    block.config = config.detector;
    block.run_id = file.run_id;
    block.clipped = file.clipped;
    return block;
}

std::vector<calibration::CalibrationResult> load_history(const RunConfig& config) {
    const auto path = calibration_log_path(config);
    if (!fs::exists(path)) return {};
    return calibration::read_log(path.string());
}

bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)); }

}  // namespace

fs::path output_path(const RunConfig& config, const std::string& name) {
    return fs::path(config.output_dir) / name;
}

fs::path calibration_log_path(const RunConfig& config) {
    const fs::path log(config.calibration_log);
    return log.is_absolute() ? log : fs::path(config.output_dir) / log;
}

std::vector<double> vacuum_code_distribution(const detector::MeasurementConfig& det) {
    det.validate();
    const double sigma = std::sqrt(det.conversion_gain * det.lo_power);
    const double step = det.adc_step();
    std::vector<double> p;
    for (std::int32_t c = det.code_min(); c <= det.code_max(); ++c) {
        const double lo = c == det.code_min() ? 0.0 : normal_cdf((c - 0.5) * step / sigma);
        const double hi = c == det.code_max() ? 1.0 : normal_cdf((c + 0.5) * step / sigma);
        p.push_back(hi - lo);
    }
    return p;
}

CommandResult cmd_simulate(const RunConfig& config) {
    config.validate();
    CommandResult result;
    const auto block = detector::measure_stream(config.state, config.detector, config.n_samples, config.rng_seed,
                                                run_id_for(config), 1 << 16, config.threads);
    io::write_raw_block(output_path(config, artifact::kRaw), block);
    result.artifacts.push_back(output_path(config, artifact::kRaw));

    // Autocorrelation of the filtered stream, with the filter transients cut off.
    const auto margin = dsp::transient_margin(config.dsp.post_mod_taps);
    const auto wanted = static_cast<std::size_t>(config.autocorrelation_samples) + 2 * margin;
    const auto take = std::min(wanted, block.codes.size());
    if (take <= 2 * margin) throw InvalidInput("n_samples too small for the filter transient");
    const auto analog = detector::dequantize(std::span(block.codes).first(take), config.detector);
    const auto filtered = dsp::filter_pulse_samples(analog, config.dsp, config.threads);
    const auto acf = dsp::autocorrelation(std::span(filtered).subspan(margin, take - 2 * margin),
                                          config.autocorrelation_max_lag);
    write_text(result, output_path(config, artifact::kAutocorrelation),
               acf.to_csv("fig3b: autocorrelation of filtered per-pulse samples"));

    // Raw code histogram against the vacuum distribution at the configured gain.
    const auto& det = config.detector;
    const auto vacuum = vacuum_code_distribution(det);
    std::vector<std::uint64_t> counts(vacuum.size(), 0);
    for (auto c : block.codes) ++counts[static_cast<std::size_t>(c - det.code_min())];
    std::ostringstream hist;
    hist << std::setprecision(12);
    hist << "# fig4b: raw ADC code histogram vs vacuum distribution\n"
         << "# vacuum_variance_raw_units2=" << det.conversion_gain * det.lo_power
         << " adc_step=" << det.adc_step() << " n_samples=" << block.codes.size() << "\n"
         << "code,raw_value,count,frequency,vacuum_probability\n";
    const double n = static_cast<double>(block.codes.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto code = det.code_min() + static_cast<std::int32_t>(i);
        hist << code << "," << code * det.adc_step() << "," << counts[i] << "," << counts[i] / n << ","
             << vacuum[i] << "\n";
    }
    write_text(result, output_path(config, artifact::kRawHistogram), hist.str());

    const auto diag = entropy::diagnostic_histogram_min_entropy(block.codes);
    std::ostringstream rep;
    rep << std::setprecision(10);
    rep << "state: " << describe_state(config.state) << "\n"
        << "detector: " << det.describe() << "\n"
        << "rng_seed: " << config.rng_seed << "\n"
        << "samples: " << block.codes.size() << "\n"
        << "clipped: " << block.clipped << "\n"
        << "clipped_fraction: " << block.clipped / n << "\n"
        << "histogram_min_entropy_bits (diagnostic, not certified): " << diag.h_min_bits << "\n"
        << "autocorrelation_samples: " << acf.n_samples << "\n"
        << "autocorrelation_max_lag: " << acf.max_lag() << "\n"
        << "autocorrelation_ci95: " << acf.ci95 << "\n"
        << "autocorrelation_fraction_outside_ci: " << acf.fraction_outside_ci << "\n";
    write_text(result, output_path(config, artifact::kSimulateReport), rep.str());

    result.summary = "simulated " + std::to_string(block.codes.size()) + " samples of " +
                     describe_state(config.state) + "; autocorrelation lags outside 95% CI: " +
                     fmt(100.0 * acf.fraction_outside_ci, 4) + "%\n";
    return result;
}

CommandResult cmd_calibrate(const RunConfig& config) {
    config.validate();
    CommandResult result;
    const auto log_path = calibration_log_path(config);
    const auto history = load_history(config);
    const auto entry = static_cast<std::int64_t>(history.size());

    const std::uint64_t sweep_seed = RngStream::substream(config.rng_seed, "calibration-run", entry)();
    const auto points = calibration::simulate_sweep(config.detector, config.calibration_powers,
                                                    config.calibration_samples, sweep_seed, config.threads);
    auto options = config.calibration;
    options.adc_step = config.detector.adc_step();
    const auto timestamp = config.start_time + config.recalibration.interval_seconds * entry;
    const auto fit = calibration::fit_calibration(points, options, timestamp);
    const auto bound = entropy::vacuum_min_entropy(fit.delta_conservative);

    std::string log = fs::exists(log_path) ? io::read_file(log_path) : std::string{};
    if (!log.empty() && log.back() != '\n') log += '\n';
    log += fit.to_log_line() + "\n";
    write_text(result, log_path, log);

    std::ostringstream rep;
    rep << std::setprecision(10);
    rep << "timestamp: " << calibration::iso_timestamp(fit.timestamp) << "\n"
        << "gradient: " << fit.gradient << "\n"
        << "gradient_stderr: " << fit.gradient_stderr << "\n"
        << "intercept: " << fit.intercept << "\n"
        << "intercept_stderr: " << fit.intercept_stderr << "\n"
        << "r_squared: " << fit.r_squared << "\n"
        << "negative_intercept_warning: " << (fit.negative_intercept_warning ? "yes" : "no") << "\n"
        << "operating_power: " << fit.operating_power << "\n"
        << "adc_step: " << fit.adc_step << "\n"
        << "delta: " << fit.delta << "\n"
        << "delta_conservative: " << fit.delta_conservative << "\n"
        << "bound_basis: " << entropy::to_string(bound.basis) << "\n"
        << "p_guess_bound: " << bound.p_guess_bound << "\n"
        << "h_min_bits: " << bound.h_min_bits << "\n"
        << "h_min_bits_nominal_delta: " << entropy::vacuum_min_entropy(fit.delta).h_min_bits << "\n"
        << "points: " << fit.n_points << "\n"
        << "samples_per_point: " << fit.samples_per_point << "\n"
        << "log_entries: " << history.size() + 1 << "\n";
    write_text(result, output_path(config, artifact::kCalibrationReport), rep.str());

    std::ostringstream line;
    line << std::setprecision(12);
    line << "# fig4a: quadrature variance vs LO power with fitted line\n"
         << "# gradient=" << fit.gradient << " intercept=" << fit.intercept << "\n"
         << "power,variance,fit,n_samples\n";
    for (const auto& p : points)
        line << p.power << "," << p.variance << "," << fit.gradient * p.power + fit.intercept << "," << p.n_samples
             << "\n";
    write_text(result, output_path(config, artifact::kCalibrationLine), line.str());

    result.summary = "calibrated m=" + fmt(fit.gradient, 6) + " intercept=" + fmt(fit.intercept, 6) +
                     " delta=" + fmt(fit.delta_conservative, 6) + " h_min=" + fmt(bound.h_min_bits, 6) +
                     " bits/sample\n";
    return result;
}

CommandResult cmd_extract(const RunConfig& config) {
    config.validate();
    CommandResult result;
    const auto plan = extractor::plan_extraction_log2(config.detector.adc_bits, config.h_min_per_sample,
                                                      config.log2_inv_epsilon, config.target_bits_per_sample);
    const auto block = load_raw(config);

    const auto history = load_history(config);
    if (history.empty()) throw CalibrationError("no calibration entry; run calibrate first");
    const auto& latest = history.back();
    if (!close_rel(latest.adc_step, config.detector.adc_step(), 1e-12))
        throw CalibrationError("latest calibration used a different ADC step");
    if (!close_rel(latest.operating_power, config.detector.lo_power, 1e-9))
        throw CalibrationError("latest calibration was made for LO power " + fmt(latest.operating_power) +
                               ", detector runs at " + fmt(config.detector.lo_power));

    // The acquisition starts at the calibration time and lasts count / pulse_rate seconds.
    const auto duration = static_cast<std::int64_t>(
        std::floor(static_cast<double>(block.codes.size()) / config.detector.pulse_rate));
    const auto now = latest.timestamp + duration;
    const auto decision = calibration::recalibration_scheduler(history, config.recalibration, now);

    extractor::EntropyCertificate certificate;
    certificate.bound = entropy::vacuum_min_entropy(latest.delta_conservative);
    certificate.fresh = decision == calibration::Decision::Keep;
    certificate.scheduler_decision = calibration::to_string(decision);

    const auto seed = config.seed_file.empty()
                          ? extractor::make_test_seed(static_cast<std::size_t>(plan.seed_bits), config.rng_seed)
                          : extractor::read_seed_file(config.seed_file, static_cast<std::size_t>(plan.seed_bits));

    const std::vector<detector::RawSampleBlock> blocks{block};
    const auto extracted = extractor::extract_stream(blocks, plan, seed, certificate, config.threads);
    const auto bytes = extracted.output.pack_msb_first();
    io::write_file_atomic(output_path(config, artifact::kOutput),
                          std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    result.artifacts.push_back(output_path(config, artifact::kOutput));

    std::string report = extracted.report.to_text();
    report += "calibration_timestamp: " + calibration::iso_timestamp(latest.timestamp) + "\n";
    report += "scheduler_time: " + calibration::iso_timestamp(now) + "\n";
    report += "scheduler_decision: " + certificate.scheduler_decision + "\n";
    write_text(result, output_path(config, artifact::kExtractionReport), report);

    result.summary = "extracted " + std::to_string(extracted.report.output_bits) + " bits at " +
                     fmt(extracted.report.effective_bits_per_sample(), 6) + " bits/sample (certified h_min " +
                     fmt(certificate.bound.h_min_bits, 6) + ", " +
                     fmt(extracted.report.output_bit_rate() / 1e6, 6) + " Mbit/s)" +
                     (seed.secure() ? "" : "; seed: " + extractor::to_string(seed.provenance)) + "\n";
    return result;
}

CommandResult cmd_test(const RunConfig& config, const std::optional<fs::path>& bitstream) {
    config.validate();
    CommandResult result;
    const auto path = bitstream ? *bitstream : output_path(config, artifact::kOutput);
    if (!fs::exists(path)) throw InvalidInput("missing bitstream " + path.string());
    const auto bytes = io::read_file(path);
    std::size_t n_bits = bytes.size() * 8;
    // The extraction report knows the exact bit count (the last byte may be padded).
    if (const auto report = path.parent_path() / artifact::kExtractionReport; !bitstream && fs::exists(report)) {
        std::istringstream is(io::read_file(report));
        for (std::string line; std::getline(is, line);)
            if (line.rfind("output_bits: ", 0) == 0) n_bits = std::min<std::size_t>(n_bits, std::stoull(line.substr(13)));
    }
    const auto needed = config.n_strings * config.string_length;
    if (n_bits < needed)
        throw InvalidInput("bitstream has " + std::to_string(n_bits) + " bits; the battery needs " +
                           std::to_string(needed));
    const auto bits = stats::unpack_bits(
        std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), needed);
    stats::BatteryOptions options;
    options.alpha = config.alpha;
    options.threads = config.threads;
    const auto report = stats::run_battery(bits, config.n_strings, config.string_length,
                                           stats::all_implemented_tests(), options);
    write_text(result, output_path(config, artifact::kBatteryText), report.to_table());
    write_text(result, output_path(config, artifact::kBatteryCsv), report.to_csv());
    result.summary = std::string("battery ") + (report.all_passed() ? "passed" : "FAILED") + " over " +
                     std::to_string(config.n_strings) + " strings of " + std::to_string(config.string_length) +
                     " bits\n";
    return result;
}

CommandResult cmd_attack(const RunConfig& config) {
    config.validate();
    CommandResult result;
    attacklab::AttackScenario scenario;
    scenario.r = config.attack_r;
    scenario.delta = config.attack_delta;
    scenario.n_rounds = config.attack_rounds;

    scenario.lo_mode = attacklab::FixedLo{config.attack_lo_theta};
    const auto fixed = attacklab::run_attack(scenario, RngStream::substream(config.rng_seed, "attack-fixed-lo")(),
                                             config.threads);
    scenario.lo_mode = attacklab::RandomLo{};
    const auto random = attacklab::run_attack(
        scenario, RngStream::substream(config.rng_seed, "attack-random-lo")(), config.threads);

    write_text(result, output_path(config, artifact::kAttackFixed), fixed.to_text());
    write_text(result, output_path(config, artifact::kAttackRandom), random.to_text());
    write_text(result, output_path(config, artifact::kAttackFixedHistogram),
               fixed.histogram_csv("fig1d: fixed-LO attack, measured quadrature vs vacuum"));
    write_text(result, output_path(config, artifact::kAttackRandomHistogram),
               random.histogram_csv("fig1e: random-LO attack, measured quadrature vs vacuum"));

    result.summary = "fixed LO: variance " + fmt(fixed.measured_variance, 6) + ", Eve guesses " +
                     fmt(fixed.guess_ratio(), 4) + "x the vacuum bound\n" + "random LO: variance " +
                     fmt(random.measured_variance, 6) + ", Eve guesses " + fmt(random.guess_ratio(), 4) +
                     "x the vacuum bound\n";
    return result;
}

std::vector<VerifyCheck> run_verify_checks(const RunConfig& config) {
    config.validate();
    std::vector<VerifyCheck> checks;

    // Vacuum bound evaluated two ways: closed form and numerical bin integration.
    {
        VerifyCheck c{"vacuum-bound-closed-form", true, 1.0, ""};
        double worst = 0.0;
        for (double delta : config.verify_deltas) {
            const double numeric = states::max_bin_probability(states::Vacuum{}, 0.0, delta);
            worst = std::max(worst, std::abs(numeric - entropy::vacuum_min_entropy(delta).p_guess_bound));
        }
        c.margin = 1e-12 - worst;
        c.passed = c.margin > 0.0;
        c.detail = "max |numeric - erf(delta/2)| = " + fmt(worst, 4);
        checks.push_back(c);
    }

    // No Fock-diagonal state beats the vacuum's most likely bin.
    {
        VerifyCheck c{"fock-states-below-vacuum-bound", true, 1.0, ""};
        std::vector<states::QuantumStateModel> candidates;
        for (unsigned n = 1; n <= config.verify_max_fock; ++n) candidates.push_back(states::Fock{n});
        candidates.push_back(states::Thermal{0.5});
        candidates.push_back(states::Mixture{{{0.5, 0}, {0.5, 1}}});
        candidates.push_back(states::Mixture{{{0.9, 0}, {0.1, 2}}});
        double worst = std::numeric_limits<double>::infinity();
        std::string where;
        for (double delta : config.verify_deltas) {
            try {
                const auto report = entropy::sdi_bound_check(candidates, delta);
                if (report.min_margin() < worst) {
                    worst = report.min_margin();
                    where = "delta=" + fmt(delta, 4);
                }
            } catch (const SecurityModelViolation& e) {
                c.passed = false;
                where = e.what();
                worst = std::min(worst, -entropy::kSdiTolerance);
            }
        }
        c.margin = worst;
        c.passed = c.passed && worst >= -entropy::kSdiTolerance;
        c.detail = std::to_string(candidates.size()) + " states x " + std::to_string(config.verify_deltas.size()) +
                   " widths; tightest at " + where;
        checks.push_back(c);
    }

    // Phase averaging then measuring equals measuring at a random phase then averaging.
    {
        VerifyCheck c{"phase-randomization-orderings-agree", true, 1.0, ""};
        double worst = 0.0, worst_idem = 0.0;
        for (int t = 0; t < config.verify_random_states; ++t) {
            auto rng = RngStream::substream(config.rng_seed, "verify-random-state", static_cast<std::uint64_t>(t));
            const int de = 1 + static_cast<int>(rng.uniform() * config.verify_max_dim);
            const int da = 1 + static_cast<int>(rng.uniform() * config.verify_max_dim);
            const auto s = attacklab::random_pure_state(de, da, rng());
            const double theta = rng.phase();
            for (double delta : {0.1, 0.5, 1.0})
                for (int k : {-1, 0, 2}) {
                    const auto a = attacklab::eve_reduced_path_I(s, theta, delta, k);
                    const auto b = attacklab::eve_reduced_path_II(s, theta, delta, k);
                    worst = std::max(worst, attacklab::trace_distance(a, b));
                }
            const auto avg = attacklab::phase_average_A(s);
            worst_idem = std::max(worst_idem, attacklab::trace_distance(attacklab::phase_average_A(avg).rho, avg.rho));
        }
        c.margin = 1e-10 - worst;
        c.passed = c.margin > 0.0;
        c.detail = std::to_string(config.verify_random_states) + " random states, dim <= " +
                   std::to_string(config.verify_max_dim) + "; max trace distance " + fmt(worst, 4);
        checks.push_back(c);

        VerifyCheck idem{"phase-average-idempotent", worst_idem < 1e-12, 1e-12 - worst_idem,
                         "max trace distance " + fmt(worst_idem, 4)};
        checks.push_back(idem);
    }

    // Leftover-hash accounting: m + 2 log2(1/eps) <= N h, m >= target N, N minimal.
    {
        VerifyCheck c{"leftover-hash-bookkeeping", true, 1.0, ""};
        struct Case {
            double h, target;
        };
        std::vector<Case> cases{{5.53, 5.4}, {4.0, 3.5}, {2.0, 1.0}, {7.9, 7.8}};
        if (config.target_bits_per_sample < config.h_min_per_sample)
            cases.insert(cases.begin(), {config.h_min_per_sample, config.target_bits_per_sample});
        double worst = std::numeric_limits<double>::infinity();
        int n = 0;
        for (const auto& k : cases) {
            const auto plan = extractor::plan_extraction_log2(config.detector.adc_bits, k.h, config.log2_inv_epsilon,
                                                              k.target);
            const double N = static_cast<double>(plan.samples_per_block);
            const double slack = plan.leftover_hash_slack();
            const bool meets = plan.output_bits >= k.target * N * (1.0 - 1e-12);
            const double prev = std::floor((N - 1.0) * k.h - 2.0 * config.log2_inv_epsilon);
            const bool minimal = plan.samples_per_block == 1 || prev < k.target * (N - 1.0) * (1.0 - 1e-12);
            const bool seed_ok = plan.seed_bits == plan.input_bits + plan.output_bits - 1;
            if (!(slack >= 0.0 && meets && minimal && seed_ok)) c.passed = false;
            worst = std::min(worst, slack);
            ++n;
        }
        c.margin = worst;
        c.detail = std::to_string(n) + " plans; smallest slack " + fmt(worst, 6) + " bits";
        checks.push_back(c);
    }

    // Accelerated Toeplitz hashing against the textbook matrix product.
    {
        VerifyCheck c{"toeplitz-accelerated-matches-naive", true, 0.0, ""};
        int mismatches = 0;
        const int instances = 20;
        for (int t = 0; t < instances; ++t) {
            auto rng = RngStream::substream(config.rng_seed, "verify-toeplitz", static_cast<std::uint64_t>(t));
            const auto n = static_cast<std::size_t>(1 + rng() % 2048);
            const auto m = static_cast<std::size_t>(1 + rng() % n);
            extractor::BitVector input;
            for (std::size_t i = 0; i < n; ++i) input.push_back((rng() & 1) != 0);
            const auto seed = extractor::make_test_seed(n + m - 1, rng());
            if (!(extractor::toeplitz_hash(input, seed.bits, m) == extractor::toeplitz_hash_naive(input, seed.bits, m)))
                ++mismatches;
        }
        c.passed = mismatches == 0;
        c.margin = -mismatches;
        c.detail = std::to_string(instances) + " random instances, " + std::to_string(mismatches) + " mismatches";
        checks.push_back(c);
    }
    return checks;
}

CommandResult cmd_verify(const RunConfig& config) {
    CommandResult result;
    const auto checks = run_verify_checks(config);
    std::ostringstream rep;
    bool ok = true;
    for (const auto& c : checks) {
        rep << (c.passed ? "PASS " : "FAIL ") << c.name << " margin=" << fmt(c.margin, 6) << " (" << c.detail
            << ")\n";
        ok = ok && c.passed;
    }
    write_text(result, output_path(config, artifact::kVerifyReport), rep.str());
    result.summary = rep.str();
    if (!ok) throw VerificationFailure("verification failed:\n" + rep.str());
    return result;
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidInput*>(&e)) return 2;
    if (dynamic_cast<const CalibrationError*>(&e) || dynamic_cast<const StaleCalibration*>(&e)) return 3;
    if (dynamic_cast<const InfeasiblePlan*>(&e)) return 4;
    if (dynamic_cast<const VerificationFailure*>(&e) || dynamic_cast<const SecurityModelViolation*>(&e)) return 5;
    return 1;
}

}  // namespace cvqrng::pipeline
