#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sla/bench.hpp"
#include "sla/gradcheck.hpp"
#include "sla/mechanisms.hpp"
#include "sla/needle.hpp"
#include "sla/report.hpp"
#include "sla/theory.hpp"
#include "sla/verification.hpp"

namespace {

std::uint64_t env_seed_default() {
    const char* e = std::getenv("SLA_SEED");
    if (!e || *e == '\0') return 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e, &end, 10);
    if (end == e || *end != '\0')
        throw std::invalid_argument("SLA_SEED must be an unsigned integer, got: " +
                                    std::string(e));
    return v;
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    nlohmann::json j;
    f >> j;
    if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    return j;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot open output file: " + path);
    f << content;
}

// Option layering: command-line flags beat the config file, which beats the
// built-in defaults (the seed's built-in default comes from SLA_SEED).
struct Resolver {
    nlohmann::json cfg;

    template <class T>
    void apply(const CLI::Option* opt, T& value, const char* key) const {
        if (opt->count() == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
    }
};

std::string feature_map_flag_help() {
    return "feature map: identity, relu, one-plus-elu, silu";
}

int report_exit(const sla::RunReport& report, const std::string& out,
                const std::string& format) {
    report.print(std::cout);
    if (!out.empty()) {
        std::ostringstream os;
        if (format == "json")
            os << report.to_json().dump(2) << "\n";
        else
            report.write_csv(os);
        write_text_file(out, os.str());
    }
    return report.all_pass() ? 0 : 1;
}

// ---------------------------------------------------------------- verify ---

int run_verify(const Resolver& rs, const CLI::App* cmd, std::uint64_t seed,
               std::size_t instances, std::size_t max_L, std::size_t max_H, std::size_t max_d,
               std::string fmap, std::string suite, std::string out, std::string format) {
    rs.apply(cmd->get_option("--seed"), seed, "seed");
    rs.apply(cmd->get_option("--instances"), instances, "instances");
    rs.apply(cmd->get_option("--L"), max_L, "L");
    rs.apply(cmd->get_option("--H"), max_H, "H");
    rs.apply(cmd->get_option("--dk"), max_d, "dk");
    rs.apply(cmd->get_option("--fmap"), fmap, "fmap");
    rs.apply(cmd->get_option("--suite"), suite, "suite");
    rs.apply(cmd->get_option("--out"), out, "out");
    rs.apply(cmd->get_option("--format"), format, "format");
    if (instances == 0) throw std::invalid_argument("verify: --instances must be >= 1");
    if (max_L < 2) throw std::invalid_argument("verify: --L must be >= 2");
    if (max_H == 0 || max_d == 0) throw std::invalid_argument("verify: dims must be >= 1");
    if (format != "csv" && format != "json")
        throw std::invalid_argument("verify: --format must be csv or json");

    sla::verify::VerifyOptions vo;
    vo.seed = seed;
    vo.instances = instances;
    vo.max_seq_len = max_L;
    vo.max_heads = max_H;
    vo.max_dim = max_d;
    vo.feature_map = sla::feature_map_from_string(fmap);

    std::cout << "verify: seed=" << seed << " instances=" << instances << " L<=" << max_L
              << " H<=" << max_H << " d<=" << max_d << " fmap=" << fmap << "\n";
    sla::RunReport report;
    if (suite == "all")
        report = sla::verify::run_all(vo);
    else if (suite == "equivalence")
        report = sla::verify::strategy_equivalence(vo);
    else if (suite == "reductions")
        report = sla::verify::reduction_laws(vo);
    else if (suite == "causality")
        report = sla::verify::causality_and_streaming(vo);
    else
        throw std::invalid_argument(
            "verify: --suite must be all, equivalence, reductions, or causality");
    return report_exit(report, out, format);
}

// --------------------------------------------------------------- theorem ---

std::vector<double> theorem_grid(double lmax) {
    std::vector<double> grid;
    for (double l : sla::theory::default_lambda_grid())
        if (l < lmax) grid.push_back(l);
    grid.push_back(lmax);
    return grid;
}

// random scores in [-1, 1] with the winner pushed at least `gap` clear
std::vector<double> gapped_scores(sla::Rng& rng, std::size_t heads, double gap) {
    std::vector<double> s(heads);
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
    std::size_t best = 0;
    for (std::size_t i = 1; i < heads; ++i)
        if (s[i] > s[best]) best = i;
    double second = -2.0;
    for (std::size_t i = 0; i < heads; ++i)
        if (i != best) second = std::max(second, s[i]);
    if (heads > 1 && s[best] - second < gap) s[best] = second + gap + rng.uniform(0.0, 0.5);
    return s;
}

int run_theorem(const Resolver& rs, const CLI::App* cmd, std::vector<double> sq,
                std::vector<double> sk, double lmax, std::uint64_t seed, std::size_t count,
                std::size_t heads, std::string out) {
    rs.apply(cmd->get_option("--sq"), sq, "sq");
    rs.apply(cmd->get_option("--sk"), sk, "sk");
    rs.apply(cmd->get_option("--lmax"), lmax, "lmax");
    rs.apply(cmd->get_option("--seed"), seed, "seed");
    rs.apply(cmd->get_option("--count"), count, "count");
    rs.apply(cmd->get_option("--H"), heads, "H");
    rs.apply(cmd->get_option("--out"), out, "out");
    if (!(lmax > 0.0)) throw std::invalid_argument("theorem: --lmax must be > 0");

    if (!sq.empty() || !sk.empty()) {
        if (sq.empty() || sk.empty())
            throw std::invalid_argument("theorem: --sq and --sk must be given together");
        const auto grid = theorem_grid(lmax);
        const sla::theory::SweepReport sweep = sla::theory::gate_entropy_sweep(sq, sk, grid);
        const sla::theory::WtaVerdict wta = sla::theory::wta_limit_check(sq, sk, lmax);
        std::cout << "lambda        entropy_q     entropy_k     c_lambda\n";
        for (const auto& e : sweep.entries)
            std::cout << std::scientific << e.lambda << "  " << e.entropy_q << "  "
                      << e.entropy_k << "  " << e.c_lambda << std::defaultfloat << "\n";
        std::cout << "entropy monotone: q=" << (sweep.entropy_q_monotone ? "yes" : "NO")
                  << " k=" << (sweep.entropy_k_monotone ? "yes" : "NO") << "\n";
        std::cout << "limit C(" << lmax << ") = " << wta.achieved << " target " << wta.target
                  << " -> " << (wta.pass ? "pass" : "FAIL") << "\n";
        if (!out.empty()) {
            std::ostringstream os;
            sweep.write_csv(os);
            write_text_file(out, os.str());
        }
        return sweep.pass() && wta.pass ? 0 : 1;
    }

    if (count == 0) throw std::invalid_argument("theorem: --count must be >= 1");
    if (heads < 2) throw std::invalid_argument("theorem: --H must be >= 2");
    sla::RunReport report;
    report.suite = "sharpness and winner-take-all on random scores";
    const auto grid = theorem_grid(lmax);
    sla::Rng rng(seed);
    double worst_c_err = 0.0;
    bool monotone_ok = true, limit_ok = true;
    for (std::size_t i = 0; i < count; ++i) {
        const auto q = gapped_scores(rng, heads, 0.1);
        const auto k = gapped_scores(rng, heads, 0.1);
        const auto sweep = sla::theory::gate_entropy_sweep(q, k, grid);
        monotone_ok = monotone_ok && sweep.entropy_q_monotone && sweep.entropy_k_monotone;
        limit_ok = limit_ok && sweep.limit_q == sla::theory::LimitVerdict::pass &&
                   sweep.limit_k == sla::theory::LimitVerdict::pass;
        const auto wta = sla::theory::wta_limit_check(q, k, lmax);
        worst_c_err = std::max(worst_c_err, std::abs(wta.achieved - wta.target));
    }
    report.add_flag("gate entropy non-increasing in lambda", monotone_ok,
                    std::to_string(count) + " score vectors");
    report.add_flag("gate reaches one_hot(argmax) at lambda_max", limit_ok);
    report.add("C(lambda_max) vs argmax coincidence", worst_c_err, 1e-6);
    const double c0 = sla::theory::wta_coefficient(gapped_scores(rng, heads, 0.1),
                                                   gapped_scores(rng, heads, 0.1), 0.0);
    report.add("C(0) vs 1/H", std::abs(c0 - 1.0 / double(heads)), 1e-15);
    return report_exit(report, out, "csv");
}

// ------------------------------------------------------------- gradcheck ---

int run_gradcheck(const Resolver& rs, const CLI::App* cmd, std::uint64_t seed,
                  std::size_t seeds, std::size_t L, std::size_t H, std::size_t dk,
                  std::size_t dv, std::string fmap, std::string out) {
    rs.apply(cmd->get_option("--seed"), seed, "seed");
    rs.apply(cmd->get_option("--seeds"), seeds, "seeds");
    rs.apply(cmd->get_option("--L"), L, "L");
    rs.apply(cmd->get_option("--H"), H, "H");
    rs.apply(cmd->get_option("--dk"), dk, "dk");
    rs.apply(cmd->get_option("--dv"), dv, "dv");
    rs.apply(cmd->get_option("--fmap"), fmap, "fmap");
    rs.apply(cmd->get_option("--out"), out, "out");
    if (seeds == 0) throw std::invalid_argument("gradcheck: --seeds must be >= 1");

    sla::AttentionConfig config;
    config.seq_len = L;
    config.heads = H;
    config.key_dim = dk;
    config.value_dim = dv;
    config.feature_map = sla::feature_map_from_string(fmap);
    config.mechanism = sla::MechanismKind::sla;

    std::vector<std::uint64_t> seed_list(seeds);
    for (std::size_t i = 0; i < seeds; ++i) seed_list[i] = seed + i;
    const sla::grad::GradcheckReport report = sla::grad::gradcheck_report(config, seed_list);
    for (const auto& s : report.seeds) {
        std::cout << "seed " << s.seed << ":";
        for (const auto& p : s.primals)
            std::cout << "  " << p.primal << " " << std::scientific << p.max_rel_err
                      << std::defaultfloat << (p.pass ? "" : " FAIL");
        std::cout << "\n";
    }
    std::cout << (report.all_pass ? "all gradients match" : "GRADIENT MISMATCH") << " (tol "
              << report.tolerance << ")\n";
    if (!out.empty()) write_text_file(out, report.to_json().dump(2) + "\n");
    return report.all_pass ? 0 : 1;
}

// ---------------------------------------------------------------- needle ---

int run_needle(const Resolver& rs, const CLI::App* cmd, std::uint64_t seed, std::size_t seeds,
               std::vector<std::size_t> seq_lens, std::size_t H, std::size_t dk, std::size_t dv,
               double noise, double gap, std::string out) {
    rs.apply(cmd->get_option("--seed"), seed, "seed");
    rs.apply(cmd->get_option("--seeds"), seeds, "seeds");
    rs.apply(cmd->get_option("--L"), seq_lens, "L");
    rs.apply(cmd->get_option("--H"), H, "H");
    rs.apply(cmd->get_option("--dk"), dk, "dk");
    rs.apply(cmd->get_option("--dv"), dv, "dv");
    rs.apply(cmd->get_option("--noise"), noise, "noise");
    rs.apply(cmd->get_option("--gap"), gap, "gap");
    rs.apply(cmd->get_option("--out"), out, "out");
    if (seeds == 0) throw std::invalid_argument("needle: --seeds must be >= 1");

    sla::needle::NeedleOptions options;
    options.noise_scale = noise;
    options.logit_gap = gap;
    std::vector<std::uint64_t> seed_list(seeds);
    for (std::size_t i = 0; i < seeds; ++i) seed_list[i] = seed + i;
    const sla::needle::CompareReport cmp =
        sla::needle::compare_mechanisms(seed_list, seq_lens, H, dk, dv, options);

    sla::RunReport report;
    report.suite = "needle retrieval";
    std::cout << "L      mean_linear  mean_sla  mean_full  win_rate\n";
    for (const auto& r : cmp.rows) {
        std::cout << r.seq_len << "  " << r.mean_linear << "  " << r.mean_sla << "  "
                  << r.mean_full << "  " << r.win_rate << "\n";
        report.add("win rate at L=" + std::to_string(r.seq_len), 0.9 - r.win_rate, 0.0,
                   "sla >= linear on " + std::to_string(seeds) + " instances");
    }

    // one-hot routing keeps every distractor write out of head 0, so the
    // gated score must coincide with linear attention over the needle alone
    {
        sla::needle::NeedleOptions hard = options;
        hard.logit_gap = 800.0;  // exp(-800) underflows: gates are exactly one-hot
        sla::Rng rng(seed);
        const auto inst =
            sla::needle::build_needle_instance(seq_lens.front(), H, dk, dv, rng, hard);
        const double gated = sla::needle::retrieval_score(inst, sla::MechanismKind::sla).value;
        const double reference = sla::needle::needle_only_linear_score(inst);
        report.add("perfect filtering under one-hot gates", std::abs(gated - reference), 1e-9);
    }
    if (!out.empty()) {
        std::ostringstream os;
        cmp.write_csv(os);
        write_text_file(out, os.str());
    }
    report.print(std::cout);
    return report.all_pass() ? 0 : 1;
}

// ----------------------------------------------------------------- bench ---

sla::bench::BenchPair parse_pair(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("bench: pair must look like mechanism:strategy, got " +
                                    text);
    sla::bench::BenchPair p;
    p.mechanism = sla::mechanism_from_string(text.substr(0, colon));
    p.strategy = sla::strategy_from_string(text.substr(colon + 1));
    return p;
}

int run_bench(const Resolver& rs, const CLI::App* cmd, std::uint64_t seed,
              std::vector<std::size_t> seq_lens, std::size_t reps, std::size_t warmups,
              std::size_t H, std::size_t dk, std::size_t dv, std::size_t C,
              std::vector<std::string> pair_names, bool threaded, bool no_check,
              std::string out, std::string json_out) {
    rs.apply(cmd->get_option("--seed"), seed, "seed");
    rs.apply(cmd->get_option("--Ls"), seq_lens, "Ls");
    rs.apply(cmd->get_option("--reps"), reps, "reps");
    rs.apply(cmd->get_option("--warmups"), warmups, "warmups");
    rs.apply(cmd->get_option("--H"), H, "H");
    rs.apply(cmd->get_option("--dk"), dk, "dk");
    rs.apply(cmd->get_option("--dv"), dv, "dv");
    rs.apply(cmd->get_option("--C"), C, "C");
    rs.apply(cmd->get_option("--pairs"), pair_names, "pairs");
    rs.apply(cmd->get_option("--out"), out, "out");
    rs.apply(cmd->get_option("--json"), json_out, "json");

    sla::bench::BenchSpec spec;
    spec.seed = seed;
    spec.seq_lens = seq_lens;
    spec.reps = reps;
    spec.warmups = warmups;
    spec.heads = H;
    spec.key_dim = dk;
    spec.value_dim = dv;
    spec.chunk_size = C;
    spec.threaded = threaded;
    for (const auto& name : pair_names) spec.pairs.push_back(parse_pair(name));

    const auto points = sla::bench::time_mechanism(spec);
    std::ostringstream table;
    sla::bench::write_csv(table, points);
    std::cout << table.str();
    const nlohmann::json summary = sla::bench::summary_json(points);
    for (const auto& entry : summary.at("pairs"))
        std::cout << entry.at("mechanism").get<std::string>() << "/"
                  << entry.at("strategy").get<std::string>() << " exponent: "
                  << (entry.at("exponent").is_null()
                          ? std::string("n/a (need >= 4 points over a 16x span)")
                          : std::to_string(entry.at("exponent").get<double>()))
                  << "\n";
    if (!out.empty()) write_text_file(out, table.str());
    if (!json_out.empty()) write_text_file(json_out, summary.dump(2) + "\n");
    if (no_check) return 0;

    sla::RunReport report;
    report.suite = "complexity bands";
    for (const auto& entry : summary.at("pairs")) {
        if (entry.at("exponent").is_null()) continue;
        const auto mech = sla::mechanism_from_string(entry.at("mechanism").get<std::string>());
        const auto strat = sla::strategy_from_string(entry.at("strategy").get<std::string>());
        const double exp = entry.at("exponent").get<double>();
        const std::string label = entry.at("mechanism").get<std::string>() + "/" +
                                  entry.at("strategy").get<std::string>();
        if (mech == sla::MechanismKind::full_softmax && strat == sla::Strategy::parallel)
            report.add_flag(label + " exponent in [1.6, 2.4]", exp >= 1.6 && exp <= 2.4,
                            "fit " + std::to_string(exp));
        else if (strat == sla::Strategy::recurrent || strat == sla::Strategy::chunkwise)
            report.add_flag(label + " exponent in [0.7, 1.3]", exp >= 0.7 && exp <= 1.3,
                            "fit " + std::to_string(exp));
    }
    for (const auto& p : spec.pairs) {
        if (p.strategy == sla::Strategy::parallel) continue;
        bool constant = true;
        const std::size_t expected = H * dk * dv * sizeof(double);
        for (const auto& pt : points)
            if (pt.mechanism == p.mechanism && pt.strategy == p.strategy)
                constant = constant && pt.state_bytes == expected;
        report.add_flag(sla::to_string(p.mechanism) + "/" + sla::to_string(p.strategy) +
                            " state bytes == H*dk*dv*8 for every L",
                        constant);
    }
    report.print(std::cout);
    return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        CLI::App app{"softmax-gated linear attention: verification and diagnostics"};
        app.require_subcommand(1);
        std::string config_path;
        app.add_option("--config", config_path, "JSON config file (flags take precedence)")
            ->expected(1);

        const std::uint64_t seed_default = env_seed_default();

        // verify
        auto* verify_cmd = app.add_subcommand("verify", "strategy equivalence and reductions");
        std::uint64_t v_seed = seed_default;
        std::size_t v_instances = 100, v_L = 128, v_H = 8, v_d = 16;
        std::string v_fmap = "identity", v_suite = "all", v_out, v_format = "csv";
        verify_cmd->add_option("--seed", v_seed, "base seed");
        verify_cmd->add_option("--instances", v_instances, "random instances per check");
        verify_cmd->add_option("--L", v_L, "max sequence length");
        verify_cmd->add_option("--H", v_H, "max heads");
        verify_cmd->add_option("--dk", v_d, "max key/value dim");
        verify_cmd->add_option("--fmap", v_fmap, feature_map_flag_help());
        verify_cmd->add_option("--suite", v_suite, "all, equivalence, reductions, causality");
        verify_cmd->add_option("--out", v_out, "write machine-readable report here");
        verify_cmd->add_option("--format", v_format, "out format: csv or json");

        // theorem
        auto* theorem_cmd =
            app.add_subcommand("theorem", "gate sharpness and winner-take-all checks");
        std::vector<double> t_sq, t_sk;
        double t_lmax = 1000.0;
        std::uint64_t t_seed = seed_default;
        std::size_t t_count = 100, t_H = 4;
        std::string t_out;
        theorem_cmd->add_option("--sq", t_sq, "read gate scores (comma separated)")
            ->delimiter(',');
        theorem_cmd->add_option("--sk", t_sk, "write gate scores (comma separated)")
            ->delimiter(',');
        theorem_cmd->add_option("--lmax", t_lmax, "largest sharpness lambda");
        theorem_cmd->add_option("--seed", t_seed, "seed for random mode");
        theorem_cmd->add_option("--count", t_count, "random score vectors to test");
        theorem_cmd->add_option("--H", t_H, "heads in random mode");
        theorem_cmd->add_option("--out", t_out, "write sweep CSV / report here");

        // gradcheck
        auto* grad_cmd = app.add_subcommand("gradcheck", "analytic vs numeric gradients");
        std::uint64_t g_seed = seed_default;
        std::size_t g_seeds = 5, g_L = 6, g_H = 2, g_dk = 3, g_dv = 3;
        std::string g_fmap = "identity", g_out;
        grad_cmd->add_option("--seed", g_seed, "base seed");
        grad_cmd->add_option("--seeds", g_seeds, "number of random instances");
        grad_cmd->add_option("--L", g_L, "sequence length (<= 8)");
        grad_cmd->add_option("--H", g_H, "heads (<= 4)");
        grad_cmd->add_option("--dk", g_dk, "key dim (<= 4)");
        grad_cmd->add_option("--dv", g_dv, "value dim (<= 4)");
        grad_cmd->add_option("--fmap", g_fmap, feature_map_flag_help());
        grad_cmd->add_option("--out", g_out, "write JSON report here");

        // needle
        auto* needle_cmd = app.add_subcommand("needle", "retrieval diagnostic");
        std::uint64_t n_seed = seed_default;
        std::size_t n_seeds = 50, n_H = 4, n_dk = 8, n_dv = 8;
        std::vector<std::size_t> n_L = {256};
        double n_noise = 0.05, n_gap = 10.0;
        std::string n_out;
        needle_cmd->add_option("--seed", n_seed, "base seed");
        needle_cmd->add_option("--seeds", n_seeds, "instances per sequence length");
        needle_cmd->add_option("--L", n_L, "sequence lengths (comma separated)")
            ->delimiter(',');
        needle_cmd->add_option("--H", n_H, "heads");
        needle_cmd->add_option("--dk", n_dk, "key dim");
        needle_cmd->add_option("--dv", n_dv, "value dim");
        needle_cmd->add_option("--noise", n_noise, "query noise scale");
        needle_cmd->add_option("--gap", n_gap, "routing logit gap");
        needle_cmd->add_option("--out", n_out, "write comparison CSV here");

        // bench
        auto* bench_cmd = app.add_subcommand("bench", "wall-time scaling in sequence length");
        std::uint64_t b_seed = seed_default;
        std::vector<std::size_t> b_L = {512, 1024, 2048, 4096, 8192};
        std::size_t b_reps = 5, b_warmups = 2, b_H = 2, b_dk = 8, b_dv = 8, b_C = 64;
        std::vector<std::string> b_pairs = {"full-softmax:parallel", "sla:recurrent",
                                            "sla:chunkwise"};
        bool b_threaded = false, b_no_check = false;
        std::string b_out, b_json;
        bench_cmd->add_option("--seed", b_seed, "base seed");
        bench_cmd->add_option("--Ls", b_L, "sequence lengths (comma separated)")
            ->delimiter(',');
        bench_cmd->add_option("--reps", b_reps, "timed repetitions per point");
        bench_cmd->add_option("--warmups", b_warmups, "untimed warmup runs");
        bench_cmd->add_option("--H", b_H, "heads");
        bench_cmd->add_option("--dk", b_dk, "key dim");
        bench_cmd->add_option("--dv", b_dv, "value dim");
        bench_cmd->add_option("--C", b_C, "chunk size for chunkwise");
        bench_cmd->add_option("--pairs", b_pairs, "mechanism:strategy list")->delimiter(',');
        bench_cmd->add_flag("--threaded", b_threaded, "time each pair on its own thread");
        bench_cmd->add_flag("--no-check", b_no_check, "report only, skip the band checks");
        bench_cmd->add_option("--out", b_out, "write points CSV here");
        bench_cmd->add_option("--json", b_json, "write summary JSON here");

        // params
        auto* params_cmd = app.add_subcommand("params", "gate parameter count");
        std::size_t p_layers = 24, p_dk = 256, p_H = 4;
        params_cmd->add_option("--layers", p_layers, "attention layers");
        params_cmd->add_option("--dk", p_dk, "per-head key dim");
        params_cmd->add_option("--heads", p_H, "heads");

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 2;
        }

        Resolver rs;
        if (!config_path.empty()) rs.cfg = load_config_file(config_path);

        if (verify_cmd->parsed())
            return run_verify(rs, verify_cmd, v_seed, v_instances, v_L, v_H, v_d, v_fmap,
                              v_suite, v_out, v_format);
        if (theorem_cmd->parsed())
            return run_theorem(rs, theorem_cmd, t_sq, t_sk, t_lmax, t_seed, t_count, t_H,
                               t_out);
        if (grad_cmd->parsed())
            return run_gradcheck(rs, grad_cmd, g_seed, g_seeds, g_L, g_H, g_dk, g_dv, g_fmap,
                                 g_out);
        if (needle_cmd->parsed())
            return run_needle(rs, needle_cmd, n_seed, n_seeds, n_L, n_H, n_dk, n_dv, n_noise,
                              n_gap, n_out);
        if (bench_cmd->parsed())
            return run_bench(rs, bench_cmd, b_seed, b_L, b_reps, b_warmups, b_H, b_dk, b_dv,
                             b_C, b_pairs, b_threaded, b_no_check, b_out, b_json);
        if (params_cmd->parsed()) {
            rs.apply(params_cmd->get_option("--layers"), p_layers, "layers");
            rs.apply(params_cmd->get_option("--dk"), p_dk, "dk");
            rs.apply(params_cmd->get_option("--heads"), p_H, "heads");
            std::cout << sla::count_gate_params(p_layers, p_dk, p_H) << "\n";
            return 0;
        }
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
