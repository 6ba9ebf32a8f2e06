#pragma once

// Flat key = value configuration files with dotted section names.
// '#' starts a comment; blank lines are ignored; unknown keys are errors.
// The full schema lives in SimConfig below and is documented in README.md.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pncsim/capacity.hpp"
#include "pncsim/ldpc.hpp"
#include "pncsim/schedule.hpp"
#include "pncsim/waveform.hpp"

namespace pncsim {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

class ConfigMap {
  public:
    static ConfigMap from_string(const std::string& text) {
        ConfigMap m;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string val = detail::trim(line.substr(eq + 1));
            if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
            if (m.values_.count(key))
                throw std::runtime_error("config: duplicate key '" + key + "'");
            m.values_[key] = val;
        }
        return m;
    }

    static ConfigMap from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path);
        std::ostringstream buf;
        buf << f.rdbuf();
        return from_string(buf.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& def) const {
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "' is not a number: " + it->second);
        }
    }

    long get_long(const std::string& key, long def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            size_t pos = 0;
            const long v = std::stol(it->second, &pos, 0);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "' is not an integer: " + it->second);
        }
    }

    uint64_t get_u64(const std::string& key, uint64_t def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        try {
            size_t pos = 0;
            const uint64_t v = std::stoull(it->second, &pos, 0);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "' is not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw std::runtime_error("config: key '" + key + "' is not a boolean: " + it->second);
    }

    std::vector<double> get_double_list(const std::string& key, std::vector<double> def) const {
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::vector<double> out;
        std::istringstream in(it->second);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            tok = detail::trim(tok);
            if (tok.empty()) continue;
            out.push_back(std::stod(tok));
        }
        if (out.empty()) throw std::runtime_error("config: key '" + key + "' has no values");
        return out;
    }

    void reject_unknown(const std::set<std::string>& known) const {
        for (const auto& [k, v] : values_) {
            if (!known.count(k)) throw std::runtime_error("config: unknown key '" + k + "'");
        }
    }

    const std::map<std::string, std::string>& raw() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

// Sweep specification: "a:b:s" (inclusive span), comma list, single value,
// or "inf" for a noiseless run.
inline std::vector<double> parse_snr_sweep(const std::string& spec) {
    if (spec.empty()) throw std::runtime_error("snr sweep: empty specification");
    if (spec == "inf" || spec == "noiseless")
        return {std::numeric_limits<double>::infinity()};
    if (spec.find(':') != std::string::npos) {
        double a, b, s;
        char c1, c2;
        std::istringstream in(spec);
        if (!(in >> a >> c1 >> b >> c2 >> s) || c1 != ':' || c2 != ':' || !(s > 0))
            throw std::runtime_error("snr sweep: expected a:b:step, got " + spec);
        std::vector<double> out;
        for (double v = a; v <= b + 1e-9; v += s) out.push_back(v);
        return out;
    }
    std::vector<double> out;
    std::istringstream in(spec);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = detail::trim(tok);
        if (tok.empty()) continue;
        if (tok == "inf") out.push_back(std::numeric_limits<double>::infinity());
        else out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::runtime_error("snr sweep: no values in " + spec);
    return out;
}

enum class ImpairmentMode { synchronized, asynchronous };
enum class TdmaModulation { none, qpsk, qam16 };

struct SimConfig {
    SchemeParams scheme;
    PowerAllocation alloc{{1.0, 0.5}};
    ChannelParams chan;  // n0_u / n0_d act as the uplink:downlink noise ratio for sweeps

    struct Phy {
        int oversampling = 8;
        double rolloff = 0.35;
        int span = 8;
    } phy;

    struct Imp {
        ImpairmentMode mode = ImpairmentMode::asynchronous;
        double delay_max_sym = 4.0;
        double cfo = 0.02;
        bool integer_delays = false;
    } imp;

    struct Fec {
        std::string matrix_path;
        int max_iters = 50;
        DecoderAlgo decoder = DecoderAlgo::sum_product;
        double minsum_scale = 1.0;
        uint64_t interleaver_seed = 0xC0FFEEULL;
    } fec;

    struct Rx {
        bool max_log = false;
        double noise_floor = 1e-3;     // demapper variance floor, fraction of the strongest layer energy
        double isi_allowance = 0.04;   // asynchronous mode: unmodeled interferer tail fraction added to the demap variance
    } rx;

    struct Sim {
        long frames = 2000;
        long stop_errors = 100;  // 0 disables early stopping
        uint64_t master_seed = 1;
        std::vector<double> snr_db{0.0};
        int threads = 0;  // 0 = hardware concurrency
        TdmaModulation with_tdma = TdmaModulation::none;
    } sim;

    std::string dump_dir;

    static SimConfig from_map(const ConfigMap& m);
    static SimConfig from_file(const std::string& path) { return from_map(ConfigMap::from_file(path)); }

    void validate() const {
        scheme.validate();
        alloc.validate();
        chan.validate();
        if (static_cast<int>(alloc.rhos.size()) != scheme.bursts_per_codeword)
            throw std::runtime_error("config: alloc.rhos length must equal scheme.bursts");
        if (phy.oversampling < 2 || phy.span < 1 || !(phy.rolloff > 0) || phy.rolloff > 1)
            throw std::runtime_error("config: bad phy parameters");
        if (fec.matrix_path.empty()) throw std::runtime_error("config: fec.matrix_path is required");
        if (fec.max_iters < 1) throw std::runtime_error("config: fec.max_iters must be >= 1");
        if (sim.frames < 1) throw std::runtime_error("config: sim.frames must be >= 1");
        if (sim.snr_db.empty()) throw std::runtime_error("config: sim.snr_db must be non-empty");
        if (imp.delay_max_sym < 0 || imp.delay_max_sym > 64)
            throw std::runtime_error("config: imp.delay_max_sym must be in [0, 64]");
        if (!(std::fabs(imp.cfo) < 0.5)) throw std::runtime_error("config: |imp.cfo| must be < 0.5");
    }

    // Canonical serialization used for the config hash.
    std::string canonical_string() const;
    uint64_t hash() const { return fnv1a_str(canonical_string()); }
};

inline SimConfig SimConfig::from_map(const ConfigMap& m) {
    static const std::set<std::string> kKnown = {
        "scheme.users", "scheme.bursts", "alloc.rhos",
        "chan.es", "chan.beta_u", "chan.beta_d", "chan.gain", "chan.n0_u", "chan.n0_d",
        "phy.oversampling", "phy.rolloff", "phy.span",
        "imp.mode", "imp.delay_max_sym", "imp.cfo", "imp.integer_delays",
        "fec.matrix_path", "fec.max_iters", "fec.decoder", "fec.minsum_scale", "fec.interleaver_seed",
        "rx.max_log", "rx.noise_floor", "rx.isi_allowance",
        "sim.frames", "sim.stop_errors", "sim.master_seed", "sim.snr_db", "sim.threads", "sim.with_tdma",
    };
    m.reject_unknown(kKnown);

    SimConfig c;
    c.scheme.num_users = static_cast<int>(m.get_long("scheme.users", 4));
    c.scheme.bursts_per_codeword = static_cast<int>(m.get_long("scheme.bursts", 2));
    c.alloc.rhos = m.get_double_list("alloc.rhos", {1.0, 0.5});
    c.chan.es = m.get_double("chan.es", 1.0);
    c.chan.beta_u = m.get_double("chan.beta_u", 1.0);
    c.chan.beta_d = m.get_double("chan.beta_d", 1.0);
    c.chan.gain = m.get_double("chan.gain", 1.0);
    c.chan.n0_u = m.get_double("chan.n0_u", 1.0);
    c.chan.n0_d = m.get_double("chan.n0_d", 1.0);
    c.phy.oversampling = static_cast<int>(m.get_long("phy.oversampling", 8));
    c.phy.rolloff = m.get_double("phy.rolloff", 0.35);
    c.phy.span = static_cast<int>(m.get_long("phy.span", 8));
    const std::string mode = m.get_string("imp.mode", "asynchronous");
    if (mode == "synchronized") c.imp.mode = ImpairmentMode::synchronized;
    else if (mode == "asynchronous") c.imp.mode = ImpairmentMode::asynchronous;
    else throw std::runtime_error("config: imp.mode must be synchronized or asynchronous");
    c.imp.delay_max_sym = m.get_double("imp.delay_max_sym", 4.0);
    c.imp.cfo = m.get_double("imp.cfo", 0.02);
    c.imp.integer_delays = m.get_bool("imp.integer_delays", false);
    c.fec.matrix_path = m.get_string("fec.matrix_path", "");
    c.fec.max_iters = static_cast<int>(m.get_long("fec.max_iters", 50));
    const std::string dec = m.get_string("fec.decoder", "sum_product");
    if (dec == "sum_product") c.fec.decoder = DecoderAlgo::sum_product;
    else if (dec == "min_sum") c.fec.decoder = DecoderAlgo::min_sum;
    else throw std::runtime_error("config: fec.decoder must be sum_product or min_sum");
    c.fec.minsum_scale = m.get_double("fec.minsum_scale", 1.0);
    c.fec.interleaver_seed = m.get_u64("fec.interleaver_seed", 0xC0FFEEULL);
    c.rx.max_log = m.get_bool("rx.max_log", false);
    c.rx.noise_floor = m.get_double("rx.noise_floor", 1e-3);
    c.rx.isi_allowance = m.get_double("rx.isi_allowance", 0.04);
    c.sim.frames = m.get_long("sim.frames", 2000);
    c.sim.stop_errors = m.get_long("sim.stop_errors", 100);
    c.sim.master_seed = m.get_u64("sim.master_seed", 1);
    c.sim.snr_db = parse_snr_sweep(m.get_string("sim.snr_db", "0"));
    c.sim.threads = static_cast<int>(m.get_long("sim.threads", 0));
    const std::string tdma = m.get_string("sim.with_tdma", "none");
    if (tdma == "none") c.sim.with_tdma = TdmaModulation::none;
    else if (tdma == "qpsk") c.sim.with_tdma = TdmaModulation::qpsk;
    else if (tdma == "qam16") c.sim.with_tdma = TdmaModulation::qam16;
    else throw std::runtime_error("config: sim.with_tdma must be none, qpsk or qam16");
    c.validate();
    return c;
}

inline std::string SimConfig::canonical_string() const {
    std::ostringstream out;
    out.precision(17);
    out << "scheme.users=" << scheme.num_users << '\n'
        << "scheme.bursts=" << scheme.bursts_per_codeword << '\n';
    out << "alloc.rhos=";
    for (size_t i = 0; i < alloc.rhos.size(); ++i) out << (i ? "," : "") << alloc.rhos[i];
    out << '\n';
    out << "chan.es=" << chan.es << "\nchan.beta_u=" << chan.beta_u << "\nchan.beta_d=" << chan.beta_d
        << "\nchan.gain=" << chan.gain << "\nchan.n0_u=" << chan.n0_u << "\nchan.n0_d=" << chan.n0_d << '\n';
    out << "phy.oversampling=" << phy.oversampling << "\nphy.rolloff=" << phy.rolloff
        << "\nphy.span=" << phy.span << '\n';
    out << "imp.mode=" << (imp.mode == ImpairmentMode::synchronized ? "synchronized" : "asynchronous")
        << "\nimp.delay_max_sym=" << imp.delay_max_sym << "\nimp.cfo=" << imp.cfo
        << "\nimp.integer_delays=" << (imp.integer_delays ? 1 : 0) << '\n';
    out << "fec.matrix_path=" << fec.matrix_path << "\nfec.max_iters=" << fec.max_iters
        << "\nfec.decoder=" << (fec.decoder == DecoderAlgo::sum_product ? "sum_product" : "min_sum")
        << "\nfec.minsum_scale=" << fec.minsum_scale
        << "\nfec.interleaver_seed=" << fec.interleaver_seed << '\n';
    out << "rx.max_log=" << (rx.max_log ? 1 : 0) << "\nrx.noise_floor=" << rx.noise_floor
        << "\nrx.isi_allowance=" << rx.isi_allowance << '\n';
    out << "sim.frames=" << sim.frames << "\nsim.stop_errors=" << sim.stop_errors
        << "\nsim.master_seed=" << sim.master_seed << '\n';
    out << "sim.snr_db=";
    for (size_t i = 0; i < sim.snr_db.size(); ++i) out << (i ? "," : "") << sim.snr_db[i];
    out << '\n';
    return out.str();
}

}  // namespace pncsim
