#include "cvqrng/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cvqrng/error.hpp"

namespace cvqrng::config {

namespace pt = boost::property_tree;

namespace {

double parse_double(const std::string& where, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v))
        throw ConfigError(where + ": expected a number, got '" + text + "'");
    return v;
}

template <class Int>
Int parse_integer(const std::string& where, const std::string& text) {
    Int v{};
    const auto* end = text.data() + text.size();
    if (const auto [ptr, ec] = std::from_chars(text.data(), end, v); !text.empty() && ec == std::errc{} && ptr == end)
        return v;
    // Accept exact integers written in floating notation such as 1e6.
    const double d = parse_double(where, text);
    if (d != std::floor(d) || d < static_cast<double>(std::numeric_limits<Int>::min()) ||
        d > static_cast<double>(std::numeric_limits<Int>::max()))
        throw ConfigError(where + ": expected an integer, got '" + text + "'");
    return static_cast<Int>(d);
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream is(text);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

// Typed view of one section; remembers which keys were read.
class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        if (!tree_) return std::nullopt;
        auto it = tree_->find(key);
        if (it == tree_->not_found()) return std::nullopt;
        if (!it->second.empty()) throw ConfigError(where(key) + ": nested keys are not allowed");
        return it->second.data();
    }

    void get(const std::string& key, double& out) {
        if (auto v = raw(key)) out = parse_double(where(key), *v);
    }
    template <class Int>
        requires std::is_integral_v<Int>
    void get(const std::string& key, Int& out) {
        if (auto v = raw(key)) out = parse_integer<Int>(where(key), *v);
    }
    void get(const std::string& key, std::string& out) {
        if (auto v = raw(key)) out = *v;
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (auto v = raw(key)) {
            out.clear();
            for (const auto& w : split_words(*v)) out.push_back(parse_double(where(key), w));
        }
    }

    void reject_unknown() const {
        if (!tree_) return;
        for (const auto& [key, _] : *tree_)
            if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in section [" + name_ + "]");
    }

    std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

private:
    std::string name_;
    const pt::ptree* tree_;
    std::set<std::string> used_;
};

const std::set<std::string> kSections{"run", "states", "detector", "dsp", "calibration",
                                      "entropy", "extractor", "stats", "attacklab"};

states::QuantumStateModel read_state(Section& s) {
    std::string kind = "vacuum";
    s.get("kind", kind);
    if (kind == "vacuum") return states::Vacuum{};
    if (kind == "fock") {
        unsigned n = 0;
        s.get("n", n);
        return states::Fock{n};
    }
    if (kind == "thermal") {
        states::Thermal t;
        s.get("mean_photons", t.mean_photons);
        return t;
    }
    if (kind == "mixture") {
        states::Mixture m;
        // terms = p:n p:n ...
        if (auto v = s.raw("terms")) {
            for (const auto& w : split_words(*v)) {
                const auto colon = w.find(':');
                if (colon == std::string::npos)
                    throw ConfigError(s.where("terms") + ": expected probability:n, got '" + w + "'");
                m.terms.push_back({parse_double(s.where("terms"), w.substr(0, colon)),
                                   parse_integer<unsigned>(s.where("terms"), w.substr(colon + 1))});
            }
        }
        return m;
    }
    if (kind == "displaced_squeezed") {
        states::DisplacedSqueezed d;
        double re = 0.0, im = 0.0;
        s.get("r", d.r);
        s.get("squeeze_angle", d.squeeze_angle);
        s.get("displacement_re", re);
        s.get("displacement_im", im);
        d.displacement = {re, im};
        return d;
    }
    throw ConfigError(s.where("kind") + ": unknown state kind '" + kind + "'");
}

void read_detector(Section& s, detector::MeasurementConfig& d, std::int64_t& n_samples) {
    std::string phase = "uniform";
    double theta = 0.0, width = 0.0;
    s.get("lo_phase", phase);
    s.get("lo_theta", theta);
    s.get("lo_phase_width", width);
    if (phase == "uniform") d.lo_phase = detector::UniformPhase{};
    else if (phase == "fixed") d.lo_phase = detector::FixedPhase{theta};
    else if (phase == "wrapped_gaussian") d.lo_phase = detector::WrappedGaussianPhase{theta, width};
    else throw ConfigError(s.where("lo_phase") + ": expected uniform, fixed or wrapped_gaussian");

    s.get("lo_power", d.lo_power);
    s.get("pulse_rate", d.pulse_rate);
    s.get("adc_bits", d.adc_bits);
    s.get("adc_full_scale", d.adc_full_scale);
    s.get("electronic_noise_var", d.electronic_noise_var);
    s.get("excess_noise_var", d.excess_noise_var);
    std::string mode = "constant";
    s.get("excess_noise_mode", mode);
    if (mode == "constant") d.excess_noise_mode = detector::ExcessNoiseMode::Constant;
    else if (mode == "power_proportional") d.excess_noise_mode = detector::ExcessNoiseMode::PowerProportional;
    else throw ConfigError(s.where("excess_noise_mode") + ": expected constant or power_proportional");
    s.get("conversion_gain", d.conversion_gain);
    s.get("n_samples", n_samples);
}

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

}  // namespace

detector::MeasurementConfig RunConfig::default_detector() {
    detector::MeasurementConfig d;
    d.lo_power = 1.0;
    d.pulse_rate = 50e6;
    d.adc_bits = 8;
    d.adc_full_scale = 256.0;
    d.electronic_noise_var = 3.0;
    d.conversion_gain = 350.0;
    return d;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    try {
        states::validate(state);
        detector.validate();
        dsp.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(e.what());
    }
    if (output_dir.empty()) fail("[run] output_dir must not be empty");
    if (threads < 1 || threads > 256) fail("[run] threads must be in [1, 256]");
    if (start_time < 0) fail("[run] start_time must be >= 0");
    if (n_samples < 1) fail("[detector] n_samples must be >= 1");
    if (dsp.pulse_rate != detector.pulse_rate)
        fail("[dsp] pulse_rate must equal [detector] pulse_rate");
    if (autocorrelation_max_lag < 1) fail("[dsp] autocorrelation_max_lag must be >= 1");
    if (autocorrelation_samples < 1) fail("[dsp] autocorrelation_samples must be >= 1");

    if (calibration_powers.size() < 2) fail("[calibration] powers needs at least two entries");
    for (double p : calibration_powers)
        if (!(p > 0.0)) fail("[calibration] powers must be > 0");
    if (calibration_samples < 2) fail("[calibration] samples_per_point must be >= 2");
    if (calibration.operating_power && !(*calibration.operating_power > 0.0))
        fail("[calibration] operating_power must be > 0");
    if (!(calibration.conservatism_sigmas >= 0.0)) fail("[calibration] conservatism_sigmas must be >= 0");
    if (recalibration.interval_seconds < 1) fail("[calibration] interval_seconds must be >= 1");
    if (!(recalibration.drift_threshold > 0.0)) fail("[calibration] drift_threshold must be > 0");
    if (calibration_log.empty()) fail("[calibration] log must not be empty");

    if (verify_deltas.empty()) fail("[entropy] verify_deltas must not be empty");
    for (double d : verify_deltas)
        if (!(d > 0.0)) fail("[entropy] verify_deltas must be > 0");
    if (verify_max_fock < 1 || verify_max_fock > 200) fail("[entropy] verify_max_fock must be in [1, 200]");

    if (!(h_min_per_sample > 0.0)) fail("[extractor] h_min_per_sample must be > 0");
    if (h_min_per_sample > detector.adc_bits)
        fail("[extractor] h_min_per_sample cannot exceed [detector] adc_bits");
    if (!(log2_inv_epsilon > 0.0)) fail("[extractor] log2_inv_epsilon must be > 0");
    if (!(target_bits_per_sample > 0.0)) fail("[extractor] target_bits_per_sample must be > 0");

    if (n_strings < 1) fail("[stats] n_strings must be >= 1");
    if (string_length < 128) fail("[stats] string_length must be >= 128");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("[stats] alpha must be in (0, 1)");

    if (!(attack_r >= 0.0)) fail("[attacklab] r must be >= 0");
    if (!(attack_delta > 0.0)) fail("[attacklab] delta must be > 0");
    if (attack_rounds < 10'000) fail("[attacklab] n_rounds must be >= 10000");
    if (verify_random_states < 1) fail("[attacklab] verify_random_states must be >= 1");
    if (verify_max_dim < 1 || verify_max_dim > 16) fail("[attacklab] verify_max_dim must be in [1, 16]");
}

RunConfig parse_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [name, sub] : tree) {
        if (sub.empty()) throw ConfigError("key '" + name + "' is outside any section");
        if (!kSections.count(name)) throw ConfigError("unknown section [" + name + "]");
    }
    auto section = [&](const std::string& name) {
        auto it = tree.find(name);
        return Section(name, it == tree.not_found() ? nullptr : &it->second);
    };

    RunConfig c;
    {
        auto s = section("run");
        s.get("rng_seed", c.rng_seed);
        s.get("output_dir", c.output_dir);
        s.get("threads", c.threads);
        if (auto v = s.raw("start_time")) {
            try {
                c.start_time = calibration::parse_iso_timestamp(*v);
            } catch (const Error& e) {
                throw ConfigError(s.where("start_time") + ": " + e.what());
            }
        }
        s.reject_unknown();
    }
    {
        auto s = section("states");
        c.state = read_state(s);
        s.reject_unknown();
    }
    {
        auto s = section("detector");
        read_detector(s, c.detector, c.n_samples);
        s.reject_unknown();
    }
    {
        auto s = section("dsp");
        c.dsp.pulse_rate = c.detector.pulse_rate;
        s.get("input_rate", c.dsp.input_rate);
        s.get("lowpass_cutoff", c.dsp.lowpass_cutoff);
        s.get("pulse_rate", c.dsp.pulse_rate);
        s.get("sample_phase", c.dsp.sample_phase);
        s.get("modulation_freq", c.dsp.modulation_freq);
        s.get("post_mod_lowpass_cutoff", c.dsp.post_mod_lowpass_cutoff);
        s.get("fir_taps", c.dsp.fir_taps);
        s.get("post_mod_taps", c.dsp.post_mod_taps);
        s.get("autocorrelation_max_lag", c.autocorrelation_max_lag);
        s.get("autocorrelation_samples", c.autocorrelation_samples);
        s.reject_unknown();
    }
    {
        auto s = section("calibration");
        s.get("powers", c.calibration_powers);
        s.get("samples_per_point", c.calibration_samples);
        s.get("min_points", c.calibration.min_points);
        s.get("min_span_ratio", c.calibration.min_span_ratio);
        s.get("min_samples_per_point", c.calibration.min_samples_per_point);
        s.get("conservatism_sigmas", c.calibration.conservatism_sigmas);
        if (auto v = s.raw("operating_power"))
            c.calibration.operating_power = parse_double(s.where("operating_power"), *v);
        s.get("interval_seconds", c.recalibration.interval_seconds);
        s.get("drift_threshold", c.recalibration.drift_threshold);
        s.get("log", c.calibration_log);
        s.reject_unknown();
    }
    {
        auto s = section("entropy");
        s.get("verify_deltas", c.verify_deltas);
        s.get("verify_max_fock", c.verify_max_fock);
        s.reject_unknown();
    }
    {
        auto s = section("extractor");
        s.get("h_min_per_sample", c.h_min_per_sample);
        s.get("log2_inv_epsilon", c.log2_inv_epsilon);
        s.get("target_bits_per_sample", c.target_bits_per_sample);
        s.get("seed_file", c.seed_file);
        s.reject_unknown();
    }
    {
        auto s = section("stats");
        s.get("n_strings", c.n_strings);
        s.get("string_length", c.string_length);
        s.get("alpha", c.alpha);
        s.reject_unknown();
    }
    {
        auto s = section("attacklab");
        s.get("r", c.attack_r);
        s.get("delta", c.attack_delta);
        s.get("n_rounds", c.attack_rounds);
        s.get("lo_theta", c.attack_lo_theta);
        s.get("verify_random_states", c.verify_random_states);
        s.get("verify_max_dim", c.verify_max_dim);
        s.reject_unknown();
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "[run]\nrng_seed = " << rng_seed << "\noutput_dir = " << output_dir << "\nthreads = " << threads
       << "\nstart_time = " << calibration::iso_timestamp(start_time) << "\n\n[states]\n";
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, states::Vacuum>) {
                os << "kind = vacuum\n";
            } else if constexpr (std::is_same_v<T, states::Fock>) {
                os << "kind = fock\nn = " << s.n << "\n";
            } else if constexpr (std::is_same_v<T, states::Thermal>) {
                os << "kind = thermal\nmean_photons = " << s.mean_photons << "\n";
            } else if constexpr (std::is_same_v<T, states::Mixture>) {
                os << "kind = mixture\nterms =";
                for (const auto& t : s.terms) os << " " << t.probability << ":" << t.n;
                os << "\n";
            } else {
                os << "kind = displaced_squeezed\nr = " << s.r << "\nsqueeze_angle = " << s.squeeze_angle
                   << "\ndisplacement_re = " << s.displacement.real()
                   << "\ndisplacement_im = " << s.displacement.imag() << "\n";
            }
        },
        state);

    os << "\n[detector]\n";
    if (const auto* f = std::get_if<detector::FixedPhase>(&detector.lo_phase))
        os << "lo_phase = fixed\nlo_theta = " << f->theta << "\n";
    else if (const auto* w = std::get_if<detector::WrappedGaussianPhase>(&detector.lo_phase))
        os << "lo_phase = wrapped_gaussian\nlo_theta = " << w->center << "\nlo_phase_width = " << w->width << "\n";
    else
        os << "lo_phase = uniform\n";
    os << "lo_power = " << detector.lo_power << "\npulse_rate = " << detector.pulse_rate
       << "\nadc_bits = " << detector.adc_bits << "\nadc_full_scale = " << detector.adc_full_scale
       << "\nelectronic_noise_var = " << detector.electronic_noise_var
       << "\nexcess_noise_var = " << detector.excess_noise_var << "\nexcess_noise_mode = "
       << (detector.excess_noise_mode == detector::ExcessNoiseMode::Constant ? "constant" : "power_proportional")
       << "\nconversion_gain = " << detector.conversion_gain << "\nn_samples = " << n_samples << "\n";

    os << "\n[dsp]\ninput_rate = " << dsp.input_rate << "\nlowpass_cutoff = " << dsp.lowpass_cutoff
       << "\npulse_rate = " << dsp.pulse_rate << "\nsample_phase = " << dsp.sample_phase
       << "\nmodulation_freq = " << dsp.modulation_freq
       << "\npost_mod_lowpass_cutoff = " << dsp.post_mod_lowpass_cutoff << "\nfir_taps = " << dsp.fir_taps
       << "\npost_mod_taps = " << dsp.post_mod_taps << "\nautocorrelation_max_lag = " << autocorrelation_max_lag
       << "\nautocorrelation_samples = " << autocorrelation_samples << "\n";

    os << "\n[calibration]\npowers = " << join(calibration_powers) << "\nsamples_per_point = " << calibration_samples
       << "\nmin_points = " << calibration.min_points << "\nmin_span_ratio = " << calibration.min_span_ratio
       << "\nmin_samples_per_point = " << calibration.min_samples_per_point
       << "\nconservatism_sigmas = " << calibration.conservatism_sigmas << "\n";
    if (calibration.operating_power) os << "operating_power = " << *calibration.operating_power << "\n";
    os << "interval_seconds = " << recalibration.interval_seconds
       << "\ndrift_threshold = " << recalibration.drift_threshold << "\nlog = " << calibration_log << "\n";

    os << "\n[entropy]\nverify_deltas = " << join(verify_deltas) << "\nverify_max_fock = " << verify_max_fock
       << "\n";
    os << "\n[extractor]\nh_min_per_sample = " << h_min_per_sample << "\nlog2_inv_epsilon = " << log2_inv_epsilon
       << "\ntarget_bits_per_sample = " << target_bits_per_sample << "\n";
    if (!seed_file.empty()) os << "seed_file = " << seed_file << "\n";
    os << "\n[stats]\nn_strings = " << n_strings << "\nstring_length = " << string_length << "\nalpha = " << alpha
       << "\n";
    os << "\n[attacklab]\nr = " << attack_r << "\ndelta = " << attack_delta << "\nn_rounds = " << attack_rounds
       << "\nlo_theta = " << attack_lo_theta << "\nverify_random_states = " << verify_random_states
       << "\nverify_max_dim = " << verify_max_dim << "\n";
    return os.str();
}

}  // namespace cvqrng::config
