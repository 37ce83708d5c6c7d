// Command-line front end: experiment runs, the strategy matrix, oracle suites, and the annotation service.

#include "aspl/experiment.hpp"
#include "aspl/io_service.hpp"
#include "aspl/oracle_checks.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

namespace {

using namespace aspl;

struct Outputs {
    std::filesystem::path dir;

    void prepare() const { std::filesystem::create_directories(dir); }

    void write(const ExperimentSpec& spec, const std::vector<RunResult>& runs,
               const std::map<Strategy, std::vector<CurvePoint>>& curves) const {
        prepare();
        {
            std::ofstream out(dir / "config.txt");
            write_config(spec, out);
        }
        std::ofstream timing(dir / "timing.csv");
        timing << "strategy,repeat,t,wall_ms\n";
        for (const auto& run : runs) {
            std::ofstream out(dir / ("ledger_" + to_string(run.strategy) + "_" + std::to_string(run.repeat) + ".jsonl"));
            write_ledger(run.ledger, out);
            for (const auto& r : run.ledger.records)
                timing << to_string(run.strategy) << ',' << run.repeat << ',' << r.t << ',' << r.wall_ms << '\n';
        }
        std::ofstream out(dir / "curves.csv");
        write_curves(curves, out);
    }
};

void print_curves(const std::map<Strategy, std::vector<CurvePoint>>& curves) {
    for (const auto& [strategy, points] : curves) {
        if (points.empty()) continue;
        const auto& last = points.back();
        std::printf("%-12s iterations=%-3d final_accuracy=%.4f final_annotation_fraction=%.4f\n",
                    to_string(strategy).c_str(), last.t, last.accuracy, last.annotation_fraction);
    }
}

int run_served(const ExperimentSpec& spec, const std::string& address, const Outputs& outputs,
               std::chrono::seconds answer_timeout) {
    FeatureStore data;
    if (spec.dataset) {
        data = load_dataset(*spec.dataset);
    } else {
        SyntheticSpec s = spec.synthetic;
        s.seed = spec.engine.seed;
        data = generate_synthetic(s);
    }
    FeatureStore train = data;
    std::optional<FeatureStore> test;
    if (data.has_truth()) {
        auto split = stratified_split(data, spec.split, spec.engine.seed);
        train = std::move(split.train);
        test = std::move(split.test);
    }

    AnnotationHub hub(std::chrono::duration_cast<std::chrono::milliseconds>(answer_timeout));
    HumanOracle oracle(hub);
    AnnotationService service(hub);
    const auto [host, port] = parse_address(address);
    const int bound = service.start(host, port);
    std::printf("annotation service listening on %s:%d\n", host.c_str(), bound);
    std::fflush(stdout);

    Engine engine(std::move(train), std::move(test), spec.engine, spec.strategies.front(), oracle, spec.noise);
    engine.set_verification(spec.verification);
    std::vector<std::string> withheld;
    const auto& names = engine.train().category_names();
    for (std::size_t k = names.size() - std::min<std::size_t>(names.size(), static_cast<std::size_t>(spec.withheld));
         k < names.size(); ++k)
        withheld.push_back(names[k]);
    engine.initialize(spec.initial_per_class, withheld);
    hub.publish(engine);
    while (!engine.done()) {
        const auto& r = engine.run_iteration();
        hub.publish(engine);
        std::printf("t=%d categories=%lld annotated=%lld accuracy=%s\n", r.t, static_cast<long long>(r.categories),
                    static_cast<long long>(r.annotated_after),
                    r.accuracy ? std::to_string(*r.accuracy).c_str() : "n/a");
        std::fflush(stdout);
    }
    RunResult result{spec.strategies.front(), 0, engine.ledger(), std::nullopt};
    outputs.write(spec, {result}, {{result.strategy, summarize({&result.ledger})}});
    hub.shutdown();
    service.stop();
    return 0;
}

int bench(const ExperimentSpec& base, const Outputs& outputs) {
    ExperimentSpec spec = base;
    spec.strategies = {Strategy::all,         Strategy::aspl,   Strategy::aspl_no_spl, Strategy::aspl_no_al,
                       Strategy::uncertainty, Strategy::random};
    const auto result = run_experiment(spec);
    outputs.write(spec, result.runs, result.curves);

    std::map<int, double> ceiling;
    for (const auto& run : result.runs)
        if (run.strategy == Strategy::all && run.final_accuracy) ceiling[run.repeat] = *run.final_accuracy;
    std::ofstream reach(outputs.dir / "reach.csv");
    reach << "strategy,repeat,final_accuracy,ceiling,reach_fraction\n";
    for (const auto& run : result.runs) {
        const double target = ceiling.at(run.repeat) - 0.02;
        const auto f = reach_fraction(run.ledger, target);
        reach << to_string(run.strategy) << ',' << run.repeat << ',' << run.final_accuracy.value_or(0) << ','
              << ceiling.at(run.repeat) << ',' << (f ? std::to_string(*f) : std::string("none")) << '\n';
    }
    print_curves(result.curves);
    return 0;
}

int verify_oracles(std::uint64_t seed) {
    const OracleSuiteReport reports[] = {check_label_solver(1000, seed), check_weight_closed_form(1000, seed + 1),
                                         check_weight_axioms(10000, seed + 2)};
    bool ok = true;
    for (const auto& r : reports) {
        std::printf("%s %s: %d cases, %d failures, max error %.3g, %.3f s%s%s\n", r.passed() ? "PASS" : "FAIL",
                    r.name.c_str(), r.cases, r.failures, r.max_error, r.seconds, r.first_failure.empty() ? "" : "; ",
                    r.first_failure.c_str());
        ok = ok && r.passed();
    }
    return ok ? 0 : 1;
}

/// One `--<key>` per config field, applied after the config file.
void add_field_options(CLI::App* cmd, std::map<std::string, std::string>& values,
                       const std::vector<std::string>& skip) {
    for (const auto& f : config_fields()) {
        if (std::find(skip.begin(), skip.end(), f.key) != skip.end()) continue;
        const std::string flag = f.key.size() == 1 ? "-" + f.key : "--" + f.key;
        cmd->add_option_function<std::string>(
            flag, [&values, key = f.key](const std::string& v) { values[key] = v; }, f.help);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active self-paced incremental multi-class identification"};
    app.require_subcommand(1);

    std::string config_path, dataset, strategy, serve, out_dir = "aspl_out";
    std::optional<std::uint64_t> seed;
    bool synthetic = false;
    int answer_timeout = 600;
    std::map<std::string, std::string> field_values;

    auto* run = app.add_subcommand("run", "run the configured strategies and repeats");
    auto* bench_cmd = app.add_subcommand("bench", "run the full strategy matrix");
    auto* verify = app.add_subcommand("verify-oracles", "run the brute-force and grid oracle suites");

    for (auto* cmd : {run, bench_cmd}) {
        cmd->add_option("--config", config_path, "flat key=value config file");
        auto* syn = cmd->add_flag("--synthetic", synthetic, "use the synthetic generator (default)");
        cmd->add_option("--dataset", dataset, "dataset file (text or packed binary)")->excludes(syn);
        cmd->add_option("--seed", seed, "base seed");
        cmd->add_option("--out", out_dir, "output directory");
        add_field_options(cmd, field_values, {"seed", "dataset"});
    }
    run->add_option("--strategy", strategy, "single strategy to run");
    run->add_option("--serve", serve, "serve the annotation API at host:port and use a human oracle");
    run->add_option("--answer-timeout", answer_timeout, "seconds to wait for human answers per batch");
    std::uint64_t verify_seed = 1;
    verify->add_option("--seed", verify_seed, "seed of the random instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) return verify_oracles(verify_seed);

        ExperimentSpec spec;
        if (!config_path.empty()) load_config(spec, config_path);
        for (const auto& f : config_fields())
            if (const auto it = field_values.find(f.key); it != field_values.end())
                apply_config_value(spec, f.key, it->second);
        if (!dataset.empty()) spec.dataset = dataset;
        if (synthetic) spec.dataset.reset();
        if (seed) spec.engine.seed = *seed;
        if (!strategy.empty()) spec.strategies = {parse_strategy(strategy)};
        spec.validate();
        const Outputs outputs{out_dir};

        if (bench_cmd->parsed()) return bench(spec, outputs);
        if (!serve.empty()) return run_served(spec, serve, outputs, std::chrono::seconds(answer_timeout));

        const auto result = run_experiment(spec);
        outputs.write(spec, result.runs, result.curves);
        print_curves(result.curves);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
