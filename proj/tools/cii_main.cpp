// Batch front end: loads the tabulated inputs, runs the estimation /
// projection / simulation / pricing pipelines, and writes CSV/JSON outputs.
//
// Subcommands: rates, project, simulate, price. See README.md.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cii/cii.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOverrides {
    std::string config_path;
    std::string data_dir;
    std::string sex;
    std::string out_dir;
    int entry_age = -1;
    int term = -1;
    std::uint64_t paths = 0;
    std::int64_t seed = -1;
    unsigned threads = 0;
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json j;
    in >> j;
    if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
    return j;
}

// Flags beat the config file; the config beats the environment and the
// built-in defaults. The resolved object is what gets hashed for
// provenance, so every input that shapes the output must land in it.
json resolve_config(const CliOverrides& opt, const std::string& command) {
    json cfg = load_config_file(opt.config_path);

    if (!opt.data_dir.empty()) cfg["data_dir"] = opt.data_dir;
    if (!cfg.contains("data_dir")) {
        const char* env = std::getenv("CII_DATA_DIR");
        cfg["data_dir"] = env != nullptr ? env : "data";
    }
    if (!opt.sex.empty()) cfg["sex"] = opt.sex;
    // price takes the sex from the contract unless explicitly overridden.
    if (!cfg.contains("sex") && command != "price") cfg["sex"] = "both";
    if (!opt.out_dir.empty()) cfg["out_dir"] = opt.out_dir;
    if (!cfg.contains("out_dir")) cfg["out_dir"] = "out";
    if (opt.entry_age >= 0) cfg["entry_age"] = opt.entry_age;
    if (opt.term >= 0) cfg["term"] = opt.term;
    if (!cfg.contains("radix")) cfg["radix"] = 100000.0;

    json sim = cfg.value("simulation", json::object());
    if (opt.paths > 0) sim["paths"] = opt.paths;
    if (opt.seed >= 0) sim["seed"] = static_cast<std::uint64_t>(opt.seed);
    if (opt.threads > 0) sim["threads"] = opt.threads;
    if (!sim.contains("paths")) sim["paths"] = 1000000;
    if (!sim.contains("seed")) sim["seed"] = 20080101;
    if (!sim.contains("threads")) sim["threads"] = 0;
    if (!sim.contains("rng")) sim["rng"] = cii::rng_algorithm;
    if (sim.at("rng").get<std::string>() != cii::rng_algorithm)
        throw std::runtime_error("unsupported rng '" + sim.at("rng").get<std::string>() +
                                 "' (available: " + std::string(cii::rng_algorithm) + ")");
    cfg["simulation"] = sim;
    cfg["command"] = command;
    return cfg;
}

fs::path data_file(const json& cfg, const std::string& key, cii::Sex sex,
                   const std::string& default_stem) {
    const fs::path dir = cfg.at("data_dir").get<std::string>();
    if (cfg.contains(key)) {
        const json& entry = cfg.at(key);
        if (entry.is_string()) return fs::path(entry.get<std::string>());
        if (entry.is_object() && entry.contains(cii::to_string(sex)))
            return fs::path(entry.at(cii::to_string(sex)).get<std::string>());
    }
    return dir / (default_stem + "_" + cii::to_string(sex) + ".csv");
}

fs::path coefficients_file(const json& cfg) {
    if (cfg.contains("coefficients")) return fs::path(cfg.at("coefficients").get<std::string>());
    return fs::path(cfg.at("data_dir").get<std::string>()) / "coefficients.json";
}

void require_exists(const fs::path& p) {
    if (!fs::exists(p)) throw std::runtime_error("input file does not exist: " + p.string());
}

cii::EstimatorContext load_context(const json& cfg, cii::Sex sex) {
    const fs::path life = data_file(cfg, "life_table", sex, "demo_life");
    const fs::path zeta = data_file(cfg, "incidence", sex, "incidence");
    const fs::path varpi = data_file(cfg, "cancer_mortality", sex, "cancer_mortality");
    const fs::path beta = data_file(cfg, "metastasis", sex, "metastasis");
    const fs::path coeffs = coefficients_file(cfg);
    for (const fs::path& p : {life, zeta, varpi, beta, coeffs}) require_exists(p);
    return cii::EstimatorContext::make(
        sex, cii::load_life_table_file(life, sex),
        cii::load_banded_table_file(zeta, sex, cii::RatePurpose::incidence),
        cii::load_banded_table_file(varpi, sex, cii::RatePurpose::cancer_mortality),
        cii::load_banded_table_file(beta, sex, cii::RatePurpose::metastasis_share),
        cii::load_coefficients_file(coeffs));
}

std::vector<cii::Sex> requested_sexes(const json& cfg) {
    const std::string s = cfg.at("sex").get<std::string>();
    if (s == "both") return {cii::Sex::male, cii::Sex::female};
    return {cii::sex_from_string(s)};
}

// The provenance hash covers everything that shapes output content; where
// the files land is deliberately left out so identical runs into different
// directories produce identical bytes.
std::string config_hash(const json& cfg) {
    json hashed = cfg;
    hashed.erase("out_dir");
    return cii::to_hex(cii::fnv1a64(hashed.dump()));
}

int age_from(const json& cfg) {
    if (!cfg.contains("entry_age")) throw std::runtime_error("entry age required (--age)");
    const int x = cfg.at("entry_age").get<int>();
    if (x < cii::min_supported_age || x > cii::max_supported_age)
        throw std::runtime_error("entry age outside supported range");
    return x;
}

int term_from(const json& cfg, int entry_age) {
    if (!cfg.contains("term")) throw std::runtime_error("term required (--term)");
    const int n = cfg.at("term").get<int>();
    if (n < 0 || entry_age + n > cii::max_supported_age)
        throw std::runtime_error("entry age + term exceeds supported range");
    return n;
}

// --- subcommands -----------------------------------------------------------

int cmd_rates(const json& cfg) {
    const std::string hash = config_hash(cfg);
    const fs::path out_dir = cfg.at("out_dir").get<std::string>();

    // Load every input before writing anything, so a bad configuration
    // produces no output at all.
    std::vector<std::pair<cii::Sex, cii::EstimatorContext>> contexts;
    for (cii::Sex sex : requested_sexes(cfg)) contexts.emplace_back(sex, load_context(cfg, sex));

    // State-model document, for inspection alongside the rates.
    const fs::path model_out = out_dir / "model.json";
    cii::atomic_write(model_out, [&](std::ostream& os) {
        json doc = cii::to_json(cii::build_cii_model());
        doc["config_hash"] = hash;
        os << doc.dump(2) << "\n";
    });
    std::cout << "wrote " << model_out.string() << "\n";

    for (const auto& [sex, ctx] : contexts) {
        const fs::path out = out_dir / ("rates_" + cii::to_string(sex) + ".csv");
        cii::atomic_write(out, [&](std::ostream& os) {
            os << "# config_hash=" << hash << "\n";
            if (sex == cii::Sex::male)
                os << "# male_varrho_break_jump="
                   << cii::format_number(cii::varrho_break_jump(ctx.coeffs)) << "\n";
            os << "age,q11,q12,q13,q17,q22,q23,q27,q34,q38,q45,q48,q56,q58,q68\n";
            for (int s = cii::min_supported_age; s <= cii::max_supported_age; ++s) {
                const cii::Q2Row r2 = cii::q2_row(ctx, s);
                const cii::TerminalDeathProbs t = cii::terminal_probs(ctx, s);
                const double vals[] = {cii::q11(ctx, s), cii::q12(ctx, s), cii::q13(ctx, s),
                                       cii::q17(ctx, s), r2.q22,           r2.q23,
                                       r2.q27,           1.0 - t.q38,      t.q38,
                                       1.0 - t.q48,      t.q48,            1.0 - t.q58,
                                       t.q58,            t.q68};
                os << s;
                for (double v : vals) os << "," << cii::format_number(v);
                os << "\n";
            }
        });
        std::cout << "wrote " << out.string() << "\n";
    }
    return 0;
}

int cmd_project(const json& cfg) {
    const std::string hash = config_hash(cfg);
    const fs::path out_dir = cfg.at("out_dir").get<std::string>();
    for (cii::Sex sex : requested_sexes(cfg)) {
        const cii::EstimatorContext ctx = load_context(cfg, sex);
        const cii::MatrixSequence seq(ctx);
        const int x = age_from(cfg);
        const int n = term_from(cfg, x);
        const cii::OccupancyTrajectory traj = cii::trajectory(seq, x, n);

        const fs::path occ_out = out_dir / ("occupancy_" + cii::to_string(sex) + ".csv");
        cii::atomic_write(occ_out, [&](std::ostream& os) {
            os << "# config_hash=" << hash << "\n";
            os << "k,age,p1,p2,p3,p4,p5,p6,p7,p8\n";
            for (int k = 0; k <= n; ++k) {
                os << k << "," << x + k;
                for (int j = 1; j <= cii::n_states; ++j)
                    os << "," << cii::format_number(traj.prob(k, j));
                os << "\n";
            }
        });

        // Sparse dump of the matrices driving the projection.
        const fs::path mat_out = out_dir / ("matrices_" + cii::to_string(sex) + ".csv");
        cii::atomic_write(mat_out, [&](std::ostream& os) {
            os << "# config_hash=" << hash << "\n";
            os << "k,i,j,value\n";
            for (int k = 0; k < n; ++k) {
                const cii::TransitionMatrix& M = seq.at_age(x + k);
                for (int i = 1; i <= cii::n_states; ++i)
                    for (int j = 1; j <= cii::n_states; ++j)
                        if (M.at(i, j) != 0.0)
                            os << k << "," << i << "," << j << ","
                               << cii::format_number(M.at(i, j)) << "\n";
            }
        });

        const double radix = cfg.at("radix").get<double>();
        const cii::IncrementDecrementTable table =
            cii::synthesize_idtable(seq, radix, x, cii::max_supported_age);
        const fs::path id_out = out_dir / ("idtable_" + cii::to_string(sex) + ".csv");
        cii::atomic_write(id_out, [&](std::ostream& os) {
            os << "# config_hash=" << hash << "\n";
            os << "age,l1,l2,l3,l4,l5,l6";
            for (const auto& [i, j] : cii::cii_transitions) os << ",d" << i << j;
            os << "\n";
            for (const auto& row : table.rows) {
                os << row.age;
                for (double l : row.l) os << "," << cii::format_number(l);
                for (double d : row.d) os << "," << cii::format_number(d);
                os << "\n";
            }
        });
        // Presentation-only integer rounding, on request; computations always
        // use the fractional table.
        if (cfg.value("rounded_idtable", false)) {
            const cii::IncrementDecrementTable rounded = cii::rounded_idtable(table);
            const fs::path rounded_out =
                out_dir / ("idtable_" + cii::to_string(sex) + "_rounded.csv");
            cii::atomic_write(rounded_out, [&](std::ostream& os) {
                os << "# config_hash=" << hash << "\n";
                os << "age,l1,l2,l3,l4,l5,l6";
                for (const auto& [i, j] : cii::cii_transitions) os << ",d" << i << j;
                os << "\n";
                for (const auto& row : rounded.rows) {
                    os << row.age;
                    for (double l : row.l) os << "," << cii::format_number(l);
                    for (double d : row.d) os << "," << cii::format_number(d);
                    os << "\n";
                }
            });
            std::cout << "wrote " << rounded_out.string() << "\n";
        }
        std::cout << "wrote " << occ_out.string() << "\n";
        std::cout << "wrote " << id_out.string() << "\n";
        std::cout << "wrote " << mat_out.string() << "\n";
    }
    return 0;
}

int cmd_simulate(const json& cfg) {
    const std::string hash = config_hash(cfg);
    const fs::path out_dir = cfg.at("out_dir").get<std::string>();
    const json& sim_cfg = cfg.at("simulation");
    for (cii::Sex sex : requested_sexes(cfg)) {
        const cii::EstimatorContext ctx = load_context(cfg, sex);
        const cii::MatrixSequence seq(ctx);
        const int x = age_from(cfg);
        const int n = term_from(cfg, x);

        const auto paths = sim_cfg.at("paths").get<std::uint64_t>();
        const auto seed = sim_cfg.at("seed").get<std::uint64_t>();
        const auto threads = sim_cfg.at("threads").get<unsigned>();
        const cii::SimulationResult sim = cii::simulate(seq, x, n, paths, seed, threads);
        const cii::OccupancyTrajectory traj = cii::trajectory(seq, x, n);
        const auto freq = sim.frequencies();

        const fs::path occ_out = out_dir / ("sim_occupancy_" + cii::to_string(sex) + ".csv");
        cii::atomic_write(occ_out, [&](std::ostream& os) {
            os << "# config_hash=" << hash << "\n";
            os << "k,age,f1,f2,f3,f4,f5,f6,f7,f8\n";
            for (int k = 0; k <= n; ++k) {
                os << k << "," << x + k;
                for (int j = 1; j <= cii::n_states; ++j)
                    os << "," << cii::format_number(freq[static_cast<std::size_t>(k)]
                                                        [static_cast<std::size_t>(j - 1)]);
                os << "\n";
            }
        });

        // Absorbing persistence audit: no path may leave state 7 or 8.
        std::uint64_t absorbing_violations = 0;
        for (int i : {7, 8})
            for (int j = 1; j <= cii::n_states; ++j)
                if (j != i)
                    absorbing_violations += sim.transition_counts[static_cast<std::size_t>(i - 1)]
                                                                 [static_cast<std::size_t>(j - 1)];

        json report;
        report["config_hash"] = hash;
        report["sex"] = cii::to_string(sex);
        report["entry_age"] = x;
        report["term"] = n;
        report["paths"] = sim.paths;
        report["seed"] = sim.seed;
        report["rng"] = sim.rng_name;
        report["sup_deviation"] = cii::max_abs_deviation(sim, traj);
        report["absorbing_violations"] = absorbing_violations;
        const fs::path rep_out = out_dir / ("sim_report_" + cii::to_string(sex) + ".json");
        cii::atomic_write(rep_out, [&](std::ostream& os) { os << report.dump(2) << "\n"; });
        std::cout << "wrote " << occ_out.string() << "\n";
        std::cout << "wrote " << rep_out.string() << "\n";
    }
    return 0;
}

int cmd_price(const json& cfg) {
    const std::string hash = config_hash(cfg);
    const fs::path out_dir = cfg.at("out_dir").get<std::string>();
    if (!cfg.contains("contract")) throw std::runtime_error("price: config must carry a contract");

    json contract_json = cfg.at("contract");
    if (contract_json.is_string()) {
        std::ifstream in(contract_json.get<std::string>());
        if (!in) throw std::runtime_error("cannot open contract: " + contract_json.get<std::string>());
        in >> contract_json;
    }
    // Command-line age/term/sex overrides reshape the contract window.
    if (cfg.contains("entry_age")) contract_json["entry_age"] = cfg.at("entry_age");
    if (cfg.contains("term")) contract_json["term"] = cfg.at("term");
    if (cfg.contains("sex") && cfg.at("sex").get<std::string>() != "both")
        contract_json["sex"] = cfg.at("sex");
    const cii::ContractSpec spec = cii::contract_from_json(contract_json);

    const cii::EstimatorContext ctx = load_context(cfg, spec.sex);
    const cii::MatrixSequence seq(ctx);
    const cii::OccupancyTrajectory traj = cii::trajectory(seq, spec.entry_age, spec.term);
    const cii::CashflowSchedule schedule = cii::expected_cashflows(spec, seq, traj);

    json report;
    report["config_hash"] = hash;
    report["contract"] = cii::to_json(spec);
    report["epv_benefits"] = schedule.epv_benefits();
    report["premium_annuity_factor"] = schedule.premium_annuity();
    report["net_premium"] = cii::net_premium(spec, seq, traj);

    json reserves = json::array();
    for (int k = 0; k <= spec.term; ++k)
        reserves.push_back({{"k", k}, {"state", 1}, {"reserve", cii::reserve(spec, seq, traj, k, 1)}});
    report["reserves"] = reserves;

    if (cfg.contains("viatical")) {
        const json& v = cfg.at("viatical");
        const double fraction = v.value("purchase_fraction", 0.8);
        const int k = v.value("duration", 0);
        json quotes = json::array();
        for (int state = 3; state <= 6; ++state) {
            const cii::ViaticalQuote q = cii::viatical_value(spec, seq, traj, state, k, fraction);
            quotes.push_back({{"state", state},
                              {"duration", k},
                              {"purchase_fraction", fraction},
                              {"value", q.value},
                              {"price", q.price},
                              {"nonpositive", q.value <= 0.0}});
        }
        report["viatical"] = quotes;
    }

    const fs::path out = out_dir / "price_report.json";
    cii::atomic_write(out, [&](std::ostream& os) { os << report.dump(2) << "\n"; });

    const fs::path cf_out = out_dir / "cashflows.csv";
    cii::atomic_write(cf_out, [&](std::ostream& os) {
        os << "# config_hash=" << hash << "\n";
        os << "k,benefit,benefit_discounted,premium_weight,premium_weight_discounted\n";
        for (const auto& r : schedule.rows)
            os << r.k << "," << cii::format_number(r.benefit) << ","
               << cii::format_number(r.benefit_discounted) << ","
               << cii::format_number(r.premium_weight) << ","
               << cii::format_number(r.premium_weight_discounted) << "\n";
    });
    std::cout << "wrote " << out.string() << "\n";
    std::cout << "wrote " << cf_out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-time multi-state engine for critical-illness (lung cancer) insurance"};
    app.require_subcommand(1);

    CliOverrides opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON run configuration");
        sub->add_option("--data-dir", opt.data_dir,
                        "directory with input tables (default: $CII_DATA_DIR or ./data)");
        sub->add_option("--sex", opt.sex, "male, female, or both");
        sub->add_option("--age", opt.entry_age, "entry age (20..100)");
        sub->add_option("--term", opt.term, "policy term in years");
        sub->add_option("--out", opt.out_dir, "output directory (default: ./out)");
    };

    CLI::App* rates = app.add_subcommand("rates", "write all transition probabilities per age");
    CLI::App* project = app.add_subcommand(
        "project", "write the occupancy trajectory and the increment-decrement table");
    CLI::App* simulate = app.add_subcommand(
        "simulate", "Monte Carlo occupancy with a deviation report against the analytic result");
    CLI::App* price =
        app.add_subcommand("price", "EPV, net premium, reserve curve and viatical quotes");
    for (CLI::App* sub : {rates, project, simulate, price}) add_common(sub);
    simulate->add_option("--paths", opt.paths, "number of simulated paths");
    simulate->add_option("--seed", opt.seed, "simulation seed");
    simulate->add_option("--threads", opt.threads, "worker threads (0 = hardware)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (rates->parsed()) return cmd_rates(resolve_config(opt, "rates"));
        if (project->parsed()) return cmd_project(resolve_config(opt, "project"));
        if (simulate->parsed()) return cmd_simulate(resolve_config(opt, "simulate"));
        if (price->parsed()) return cmd_price(resolve_config(opt, "price"));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
