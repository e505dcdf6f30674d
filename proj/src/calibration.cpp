#include "cvqrng/calibration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cvqrng/entropy.hpp"
#include "cvqrng/error.hpp"
#include "cvqrng/io.hpp"
#include "cvqrng/rng.hpp"

namespace cvqrng::calibration {

CalibrationResult fit_calibration(std::span<const CalibrationPoint> points, const CalibrationOptions& options,
                                  std::int64_t timestamp) {
    if (!(options.adc_step > 0.0)) throw InvalidInput("adc_step must be > 0");
    if (options.min_points < 3) throw InvalidInput("min_points must be >= 3");
    if (points.empty()) throw CalibrationError("no calibration points");
    for (const auto& p : points) {
        if (!(p.power > 0.0) || !std::isfinite(p.power)) throw CalibrationError("calibration power must be > 0");
        if (!(p.variance >= 0.0) || !std::isfinite(p.variance)) throw CalibrationError("variance must be >= 0");
        if (p.n_samples < options.min_samples_per_point)
            throw CalibrationError("calibration point has fewer than the required samples");
        if (p.n_samples != points.front().n_samples)
            throw CalibrationError("calibration points must use equal sample counts");
    }
    std::vector<double> powers;
    for (const auto& p : points) powers.push_back(p.power);
    std::sort(powers.begin(), powers.end());
    const auto distinct = static_cast<int>(std::unique(powers.begin(), powers.end()) - powers.begin());
    if (distinct < options.min_points) throw CalibrationError("insufficient distinct calibration powers");
    const double p_min = powers.front();
    const double p_max = powers[static_cast<std::size_t>(distinct - 1)];
    if (p_max < options.min_span_ratio * p_min) throw CalibrationError("insufficient calibration power span");

    const auto n = static_cast<double>(points.size());
    double xbar = 0, ybar = 0;
    for (const auto& p : points) {
        xbar += p.power;
        ybar += p.variance;
    }
    xbar /= n;
    ybar /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : points) {
        sxx += (p.power - xbar) * (p.power - xbar);
        sxy += (p.power - xbar) * (p.variance - ybar);
        syy += (p.variance - ybar) * (p.variance - ybar);
    }
    CalibrationResult r;
    r.gradient = sxy / sxx;
    r.intercept = ybar - r.gradient * xbar;
    double ssr = 0;
    for (const auto& p : points) {
        const double e = p.variance - (r.intercept + r.gradient * p.power);
        ssr += e * e;
    }
    const double s2 = ssr / (n - 2.0);
    r.gradient_stderr = std::sqrt(s2 / sxx);
    r.intercept_stderr = std::sqrt(s2 * (1.0 / n + xbar * xbar / sxx));
    r.r_squared = syy > 0 ? 1.0 - ssr / syy : 1.0;
    r.n_points = points.size();
    r.samples_per_point = points.front().n_samples;
    r.adc_step = options.adc_step;
    r.timestamp = timestamp;
    r.operating_power = options.operating_power.value_or(p_max);
    if (!(r.operating_power > 0.0)) throw InvalidInput("operating power must be > 0");
    r.negative_intercept_warning = r.intercept < -2.0 * r.intercept_stderr;

    if (!(r.gradient > 0.0)) throw CalibrationError("calibration gradient is not positive");
    const double m_low = r.gradient - options.conservatism_sigmas * r.gradient_stderr;
    if (!(m_low > 0.0)) throw CalibrationError("calibration gradient is not resolved above its uncertainty");
    r.delta = options.adc_step / std::sqrt(2.0 * r.gradient * r.operating_power);
    r.delta_conservative = options.adc_step / std::sqrt(2.0 * m_low * r.operating_power);
    r.h_min_bits = entropy::vacuum_min_entropy(r.delta_conservative).h_min_bits;
    return r;
}

std::vector<CalibrationPoint> simulate_sweep(const detector::MeasurementConfig& config,
                                             std::span<const double> powers, std::int64_t samples_per_point,
                                             std::uint64_t seed, unsigned threads) {
    std::vector<CalibrationPoint> out;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        auto cfg = config;
        cfg.lo_power = powers[i];
        const std::uint64_t point_seed = RngStream::substream(seed, "calibration", i)();
        const auto block = detector::measure_stream(states::Vacuum{}, cfg, samples_per_point, point_seed, i,
                                                    1 << 16, threads);
        const double step = cfg.adc_step();
        // Integer codes: exact sums, then one conversion.
        long double s1 = 0, s2 = 0;
        for (auto c : block.codes) {
            s1 += c;
            s2 += static_cast<long double>(c) * c;
        }
        const long double nn = static_cast<long double>(block.codes.size());
        const long double var = (s2 - s1 * s1 / nn) / (nn - 1);
        out.push_back({powers[i], static_cast<double>(var) * step * step, samples_per_point});
    }
    return out;
}

std::string to_string(Decision d) {
    switch (d) {
        case Decision::Keep: return "keep";
        case Decision::Recalibrate: return "recalibrate";
        case Decision::Alarm: return "alarm";
    }
    return "unknown";
}

Decision recalibration_scheduler(std::span<const CalibrationResult> history, const RecalibrationPolicy& policy,
                                 std::int64_t now) {
    if (history.empty()) throw InvalidInput("calibration history is empty");
    const auto& last = history.back();
    if (history.size() >= 2) {
        const double prev = history[history.size() - 2].h_min_bits;
        if (prev > 0.0 && std::abs(last.h_min_bits - prev) / prev > policy.drift_threshold) return Decision::Alarm;
    }
    if (now - last.timestamp >= policy.interval_seconds) return Decision::Recalibrate;
    return Decision::Keep;
}

std::string iso_timestamp(std::int64_t seconds_since_epoch) {
    using namespace std::chrono;
    const sys_seconds tp{seconds{seconds_since_epoch}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss hms{tp - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()));
    return buf;
}

std::int64_t parse_iso_timestamp(const std::string& text) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char z = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%uT%u:%u:%u%c", &y, &mo, &d, &h, &mi, &s, &z) != 7 || z != 'Z')
        throw InvalidInput("bad ISO timestamp: " + text);
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw InvalidInput("bad ISO timestamp: " + text);
    return (sys_days{ymd}.time_since_epoch() / seconds{1}) + h * 3600 + mi * 60 + s;
}

std::string CalibrationResult::to_log_line() const {
    std::ostringstream os;
    os.precision(17);
    os << iso_timestamp(timestamp) << " m=" << gradient << " intercept=" << intercept << " m_stderr="
       << gradient_stderr << " intercept_stderr=" << intercept_stderr << " r2=" << r_squared
       << " p_op=" << operating_power << " adc_step=" << adc_step << " delta=" << delta
       << " delta_conservative=" << delta_conservative << " h_min=" << h_min_bits << " points=" << n_points
       << " samples=" << samples_per_point << " warn_negative_intercept=" << (negative_intercept_warning ? 1 : 0);
    return os.str();
}

CalibrationResult CalibrationResult::from_log_line(const std::string& line) {
    std::istringstream is(line);
    std::string stamp, token;
    is >> stamp;
    CalibrationResult r;
    r.timestamp = parse_iso_timestamp(stamp);
    std::map<std::string, std::string> kv;
    while (is >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw InvalidInput("bad calibration log field: " + token);
        kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    auto num = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw InvalidInput(std::string("calibration log line lacks ") + key);
        return std::stod(it->second);
    };
    r.gradient = num("m");
    r.intercept = num("intercept");
    r.gradient_stderr = num("m_stderr");
    r.intercept_stderr = num("intercept_stderr");
    r.r_squared = num("r2");
    r.operating_power = num("p_op");
    r.adc_step = num("adc_step");
    r.delta = num("delta");
    r.delta_conservative = num("delta_conservative");
    r.h_min_bits = num("h_min");
    r.n_points = static_cast<std::size_t>(num("points"));
    r.samples_per_point = static_cast<std::int64_t>(num("samples"));
    r.negative_intercept_warning = num("warn_negative_intercept") != 0.0;
    return r;
}

std::vector<CalibrationResult> read_log(const std::string& path) {
    std::istringstream is(io::read_file(path));
    std::vector<CalibrationResult> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        out.push_back(CalibrationResult::from_log_line(line));
    }
    return out;
}

void append_log(const std::string& path, const CalibrationResult& result) {
    io::append_line(path, result.to_log_line());
}

}  // namespace cvqrng::calibration
