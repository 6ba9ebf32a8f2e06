// Command-line front end: link-level simulation sweeps, slot schedule
// inspection, capacity/power-allocation analysis and constellation dumps.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pncsim/capacity.hpp"
#include "pncsim/config.hpp"
#include "pncsim/harness.hpp"
#include "pncsim/schedule.hpp"

using nlohmann::json;
using namespace pncsim;

namespace {

json report_to_json(const SimReport& rep) {
    json rows = json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"snr_db", r.snr_db},
                        {"frames", r.frames},
                        {"errors", r.errors},
                        {"plr", r.plr},
                        {"throughput", r.throughput},
                        {"converged", r.converged},
                        {"avg_iterations", r.avg_iterations}});
    }
    return json{{"mode", rep.mode},
                {"modulation_order", rep.modulation_order},
                {"bursts", rep.bursts},
                {"code", {{"source", rep.code_source},
                          {"n", rep.code_n},
                          {"k", rep.code_k},
                          {"rate", rep.code_rate},
                          {"hash", rep.code_hash}}},
                {"energy_factor", rep.energy_factor},
                {"config_hash", rep.config_hash},
                {"master_seed", rep.master_seed},
                {"report_hash", rep.report_hash()},
                {"rows", rows}};
}

int cmd_simulate(const std::string& config_path, const std::string& snr_override,
                 long frames_override, long seed_override, int threads_override,
                 const std::string& out_json, const std::string& out_csv,
                 const std::string& dump_dir) {
    SimConfig cfg = SimConfig::from_file(config_path);
    if (!snr_override.empty()) cfg.sim.snr_db = parse_snr_sweep(snr_override);
    if (frames_override > 0) cfg.sim.frames = frames_override;
    if (seed_override >= 0) cfg.sim.master_seed = static_cast<uint64_t>(seed_override);
    if (threads_override > 0) cfg.sim.threads = threads_override;
    cfg.dump_dir = dump_dir;
    cfg.validate();

    SimContext ctx(cfg);
    for (const auto& w : ctx.code.warnings) std::cerr << "warning: " << w << "\n";

    const SimReport rep = run_sweep(ctx, SimMode::scheme);
    json out = json{{"scheme", report_to_json(rep)}};

    std::cout << "# mode=scheme code=" << ctx.code.source << " rate=" << ctx.code.rate()
              << " energy_factor=" << rep.energy_factor << "\n";
    std::cout << rep.to_csv();

    if (cfg.sim.with_tdma != TdmaModulation::none) {
        const SimReport base = run_tdma_baseline(ctx, cfg.sim.with_tdma);
        out["tdma"] = report_to_json(base);
        std::cout << "# mode=" << base.mode << "\n" << base.to_csv();
        if (!out_csv.empty()) {
            // Plot-ready pairing of the scheme curve with its baseline.
            std::ofstream pf(out_csv + ".paired.csv");
            pf << "snr_db,scheme_throughput,tdma_throughput\n";
            for (size_t i = 0; i < rep.rows.size() && i < base.rows.size(); ++i)
                pf << rep.rows[i].snr_db << ',' << rep.rows[i].throughput << ','
                   << base.rows[i].throughput << '\n';
        }
    }
    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        f << rep.to_csv();
    }
    if (!out_json.empty()) {
        std::ofstream f(out_json);
        f << out.dump(2) << "\n";
    }
    return 0;
}

int cmd_schedule(int users, int bursts, long slots, bool csv) {
    SchemeParams p{users, bursts};
    p.validate();
    if (csv) {
        std::cout << "slot,user,burst\n";
        for (long q = 1; q <= slots; ++q)
            for (const auto& e : transmitters_on_slot(q, p).entries)
                std::cout << q << ',' << e.user << ',' << e.burst_index << '\n';
        return 0;
    }
    std::cout << "slot |";
    for (int u = 1; u <= users; ++u) std::cout << " u" << std::setw(2) << std::left << u;
    std::cout << "\n-----+" << std::string(static_cast<size_t>(users) * 4, '-') << "\n";
    for (long q = 1; q <= slots; ++q) {
        std::vector<int> burst_of(static_cast<size_t>(users) + 1, 0);
        for (const auto& e : transmitters_on_slot(q, p).entries) burst_of[static_cast<size_t>(e.user)] = e.burst_index;
        std::cout << std::setw(4) << std::right << q << " |";
        for (int u = 1; u <= users; ++u) {
            if (burst_of[static_cast<size_t>(u)]) std::cout << " b" << std::setw(2) << std::left << burst_of[static_cast<size_t>(u)];
            else std::cout << " .  ";
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_capacity(int nb, int nu, const std::string& snr_spec, double grid, size_t samples,
                 size_t final_samples, uint64_t seed, int threads, const std::string& out_path) {
    SchemeParams p{nu, nb};
    p.validate();
    CapacityOptions opt;
    opt.samples = samples;
    opt.final_samples = final_samples;
    opt.base_seed = seed;
    opt.threads = threads;

    std::ostringstream full;
    full.precision(10);
    full << "snr_db";
    for (int i = 1; i <= nb; ++i) full << ",rho_" << i;
    for (int i = 1; i <= nb; ++i) full << ",C_" << i;
    full << ",Ra,Nu_Ra,recommended_rate\n";
    std::cout << full.str();
    for (double snr_db : parse_snr_sweep(snr_spec)) {
        const RatePoint rp = optimize_allocation(std::pow(10.0, snr_db / 10.0), p, grid, opt);
        std::ostringstream row;
        row.precision(10);
        row << snr_db;
        for (double r : rp.allocation.rhos) row << ',' << r;
        for (double c : rp.layer_capacities) row << ',' << c;
        row << ',' << rp.rate_per_user << ',' << rp.rate_per_user * nu << ','
            << recommended_code_rate(rp, p) << "\n";
        std::cout << row.str() << std::flush;
        full << row.str();
    }
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        f << full.str();
    }
    return 0;
}

int cmd_allocate(int nb, int nu, double snr_db, double grid, size_t samples, size_t final_samples,
                 uint64_t seed, int threads) {
    SchemeParams p{nu, nb};
    p.validate();
    CapacityOptions opt;
    opt.samples = samples;
    opt.final_samples = final_samples;
    opt.base_seed = seed;
    opt.threads = threads;
    const RatePoint rp = optimize_allocation(std::pow(10.0, snr_db / 10.0), p, grid, opt);
    json j{{"snr_db", snr_db},
           {"rhos", rp.allocation.rhos},
           {"layer_capacities", rp.layer_capacities},
           {"ra", rp.rate_per_user},
           {"nu_ra", rp.rate_per_user * nu},
           {"recommended_rate", recommended_code_rate(rp, p)}};
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_constellation(const std::string& rhos_spec, const std::string& phases_spec, double es,
                      bool use_qam16) {
    Constellation c;
    if (use_qam16) {
        c = qam16(es);
    } else {
        std::vector<double> rhos;
        std::istringstream in(rhos_spec);
        std::string tok;
        while (std::getline(in, tok, ',')) rhos.push_back(std::stod(tok));
        std::vector<double> phases(rhos.size(), 0.0);
        if (!phases_spec.empty()) {
            phases.clear();
            std::istringstream pin(phases_spec);
            while (std::getline(pin, tok, ',')) phases.push_back(std::stod(tok));
            if (phases.size() != rhos.size()) {
                std::cerr << "constellation: need one phase per rho\n";
                return 1;
            }
        }
        std::vector<LayerSpec> layers(rhos.size());
        for (size_t i = 0; i < rhos.size(); ++i) layers[i] = LayerSpec{rhos[i], phases[i]};
        c = superpose(layers, es);
    }
    std::cout << "re,im,label\n";
    std::cout.precision(12);
    for (size_t i = 0; i < c.points.size(); ++i)
        std::cout << c.points[i].real() << ',' << c.points[i].imag() << ',' << c.label_string(i)
                  << '\n';
    if (c.collision_count > 0)
        std::cerr << "note: " << c.collision_count << " coincident point pair(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pncsim: cooperative relay network-coding link simulator"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a Monte Carlo throughput sweep");
    std::string config_path, snr_override, out_json, out_csv, dump_dir;
    long frames_override = 0, seed_override = -1;
    int threads_override = 0;
    sim->add_option("--config", config_path, "configuration file")->required();
    sim->add_option("--snr-db", snr_override, "override sweep, e.g. 0:6:0.5 or 1,2,3 or inf");
    sim->add_option("--frames", frames_override, "override frames per point");
    sim->add_option("--seed", seed_override, "override master seed");
    sim->add_option("--threads", threads_override, "worker threads (0 = hardware)");
    sim->add_option("--out", out_json, "write full JSON report");
    sim->add_option("--csv", out_csv, "write CSV report");
    sim->add_option("--dump-dir", dump_dir, "dump first-frame symbols/LLRs/waveforms here");

    // schedule
    auto* sch = app.add_subcommand("schedule", "print the slot occupancy table");
    int users = 4, bursts = 2;
    long slots = 12;
    bool sch_csv = false;
    sch->add_option("--users", users, "number of users")->required();
    sch->add_option("--bursts", bursts, "bursts per codeword")->required();
    sch->add_option("--slots", slots, "slots to print");
    sch->add_flag("--csv", sch_csv, "CSV output");

    // capacity
    auto* cap = app.add_subcommand("capacity", "optimized achievable-rate sweep (CSV)");
    int cap_nb = 2, cap_nu = 4, cap_threads = 0;
    double cap_grid = 0.05;
    size_t cap_samples = 200000, cap_final = 2000000;
    uint64_t cap_seed = 0x5EED;
    std::string cap_snr = "0:5:1", cap_out;
    cap->add_option("--nb", cap_nb, "layers per slot (N_b)")->required();
    cap->add_option("--nu", cap_nu, "number of users (N_u)");
    cap->add_option("--snr-db", cap_snr, "sweep a:b:step");
    cap->add_option("--grid", cap_grid, "allocation grid step");
    cap->add_option("--samples", cap_samples, "MI samples during search");
    cap->add_option("--final-samples", cap_final, "MI samples for reported values");
    cap->add_option("--seed", cap_seed, "base seed");
    cap->add_option("--threads", cap_threads, "worker threads");
    cap->add_option("--out", cap_out, "also write CSV here");

    // allocate
    auto* alc = app.add_subcommand("allocate", "optimal allocation at one SNR (JSON line)");
    int alc_nb = 2, alc_nu = 4, alc_threads = 0;
    double alc_snr = 0.0, alc_grid = 0.05;
    size_t alc_samples = 200000, alc_final = 2000000;
    uint64_t alc_seed = 0x5EED;
    alc->add_option("--snr-db", alc_snr, "Es/N0 in dB")->required();
    alc->add_option("--nb", alc_nb, "layers per slot (N_b)")->required();
    alc->add_option("--nu", alc_nu, "number of users (N_u)");
    alc->add_option("--grid", alc_grid, "allocation grid step");
    alc->add_option("--samples", alc_samples, "MI samples during search");
    alc->add_option("--final-samples", alc_final, "MI samples for reported values");
    alc->add_option("--seed", alc_seed, "base seed");
    alc->add_option("--threads", alc_threads, "worker threads");

    // constellation
    auto* con = app.add_subcommand("constellation", "dump a constellation as CSV");
    std::string con_rhos = "1.0,0.25", con_phases;
    double con_es = 1.0;
    bool con_qam16 = false;
    con->add_option("--rhos", con_rhos, "comma-separated energy fractions, descending");
    con->add_option("--phases", con_phases, "comma-separated per-layer phases (radians)");
    con->add_option("--es", con_es, "base symbol energy");
    con->add_flag("--qam16", con_qam16, "dump the Gray 16-QAM set instead");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(config_path, snr_override, frames_override, seed_override,
                                threads_override, out_json, out_csv, dump_dir);
        if (sch->parsed()) return cmd_schedule(users, bursts, slots, sch_csv);
        if (cap->parsed())
            return cmd_capacity(cap_nb, cap_nu, cap_snr, cap_grid, cap_samples, cap_final,
                                cap_seed, cap_threads, cap_out);
        if (alc->parsed())
            return cmd_allocate(alc_nb, alc_nu, alc_snr, alc_grid, alc_samples, alc_final,
                                alc_seed, alc_threads);
        if (con->parsed()) return cmd_constellation(con_rhos, con_phases, con_es, con_qam16);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
