// ccpd: simulate, detect, localize and run experiments from the command line.

#include "ccp/dataset.hpp"
#include "ccp/error.hpp"
#include "ccp/harness.hpp"
#include "ccp/invariance.hpp"
#include "ccp/localization.hpp"
#include "ccp/moments.hpp"
#include "ccp/simulator.hpp"
#include "ccp/stability.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    ccp::RunConfig run;
    std::string input;
    std::string output;
    std::string candidates_file;
    std::string schedule;
    std::string schedule_file;
    std::string interval;
    std::string method = "seedbs";
    std::string scan = "rescan";
    bool then_prune = false;
    bool trace = false;
};

void load_config(const std::string& path, Options& o) {
    std::ifstream in(path);
    if (!in) {
        throw ccp::InputError("cannot open config " + path);
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ccp::InputError("config " + path + ": " + e.what());
    }
    ccp::merge_json(j, o.run);
    try {
        o.input = j.value("input", o.input);
        o.output = j.value("output", o.output);
        o.candidates_file = j.value("candidates_file", o.candidates_file);
        o.schedule = j.value("schedule", o.schedule);
        o.schedule_file = j.value("schedule_file", o.schedule_file);
        o.interval = j.value("interval", o.interval);
        o.method = j.value("method", o.method);
        o.scan = j.value("scan", o.scan);
        o.then_prune = j.value("then_prune", o.then_prune);
        o.trace = j.value("trace", o.trace);
    } catch (const json::exception& e) {
        throw ccp::InputError("config " + path + ": " + e.what());
    }
}

// The config file supplies defaults, so it is read before the flags are parsed.
std::string find_config(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) {
            return argv[i + 1];
        }
        if (a.rfind("--config=", 0) == 0) {
            return a.substr(9);
        }
    }
    return {};
}

std::vector<std::size_t> read_candidates(const std::string& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) {
        throw ccp::InputError("cannot open candidates file " + path);
    }
    std::vector<std::size_t> points;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        for (auto& c : line) {
            if (c == ',' || c == ';' || c == '\t' || c == '\r') {
                c = ' ';
            }
        }
        std::istringstream fields(line);
        std::string f;
        while (fields >> f) {
            std::size_t used = 0;
            unsigned long long v = 0;
            try {
                v = std::stoull(f, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != f.size()) {
                throw ccp::InputError(path + ":" + std::to_string(line_no) +
                                      ": cannot parse candidate '" + f + "'");
            }
            points.push_back(static_cast<std::size_t>(v));
        }
    }
    return ccp::CandidateSet::make(std::move(points), n).points;
}

ccp::Interval parse_interval(const std::string& text, std::size_t n) {
    if (text.empty()) {
        return {1, n};
    }
    std::string t = text;
    for (auto& c : t) {
        if (c == ',' || c == ':' || c == '-') {
            c = ' ';
        }
    }
    std::istringstream in(t);
    std::size_t a = 0;
    std::size_t b = 0;
    std::string rest;
    if (!(in >> a >> b) || (in >> rest)) {
        throw UsageError("--interval expects START,END (1-based, inclusive)");
    }
    return ccp::make_interval(a, b, n);
}

std::vector<ccp::CovariateSubset> subsets_for(const Options& o, std::size_t d) {
    if (!o.run.subsets_file.empty()) {
        return ccp::read_subsets_file(o.run.subsets_file, d);
    }
    try {
        return ccp::enumerate_subsets(d, o.run.subset_cap);
    } catch (const ccp::InputError& e) {
        throw ccp::InputError(std::string(e.what()) +
                              "; pass --subsets-file or raise --subset-cap");
    }
}

json interval_json(ccp::Interval i) { return json::array({i.start, i.end}); }

json outcome_json(const ccp::TestOutcome& t) {
    json j{{"subset", t.subset.to_string()}, {"statistic", t.statistic},
           {"df_num", t.df_num},             {"df_den", t.df_den},
           {"p_value", t.p_value},           {"chow_p_value", t.chow_p_value},
           {"reject", t.reject},             {"degenerate", t.degenerate}};
    if (t.variance_p_value) {
        j["variance_p_value"] = *t.variance_p_value;
    }
    return j;
}

json estimate_json(const ccp::CcpEstimate& e) {
    json prov = json::array();
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        const auto& p = e.provenance[i];
        prov.push_back({{"point", e.points[i]},
                        {"method", p.method},
                        {"interval", interval_json(p.interval)},
                        {"p_value", p.p_value}});
    }
    return {{"points", e.points}, {"provenance", prov}, {"undecided", e.undecided}};
}

json segments_json(const std::vector<ccp::SegmentReport>& reports) {
    json out = json::array();
    for (const auto& r : reports) {
        out.push_back({{"interval", interval_json(r.interval)},
                       {"testable", r.testable},
                       {"flagged", r.flagged},
                       {"combined_p_value", r.combined_p_value}});
    }
    return out;
}

void emit(const json& report, const std::string& output) {
    const auto text = report.dump(2) + "\n";
    if (output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(output);
    if (!out || !(out << text)) {
        throw ccp::Error("cannot write " + output);
    }
}

ccp::Dataset load_input(const Options& o) {
    if (o.input.empty()) {
        throw UsageError("--input is required");
    }
    return ccp::read_csv_file(o.input);
}

int cmd_simulate(const Options& o) {
    ccp::ScmSchedule schedule;
    if (!o.schedule_file.empty()) {
        std::ifstream in(o.schedule_file);
        if (!in) {
            throw ccp::InputError("cannot open " + o.schedule_file);
        }
        try {
            schedule = json::parse(in).get<ccp::ScmSchedule>();
        } catch (const json::exception& e) {
            throw ccp::InputError(o.schedule_file + ": " + e.what());
        }
        schedule.validate();
    } else {
        if (o.schedule.empty()) {
            throw UsageError("--schedule or --schedule-file is required");
        }
        if (o.run.ns.size() != 1) {
            throw UsageError("simulate needs exactly one --n");
        }
        try {
            schedule = ccp::builtin_schedule(o.schedule, o.run.ns.front());
        } catch (const ccp::InputError& e) {
            throw UsageError(e.what());
        }
    }
    const auto data = ccp::generate(schedule, o.run.seed);
    std::filesystem::path csv = o.output;
    if (csv.empty()) {
        std::string stem = schedule.name;
        for (auto& c : stem) {
            if (c == ':' || c == '/') {
                c = '_';
            }
        }
        csv = std::filesystem::path(o.run.out_dir) /
              (stem + "_n" + std::to_string(schedule.n) + "_seed" + std::to_string(o.run.seed) +
               ".csv");
    }
    if (csv.has_parent_path()) {
        std::filesystem::create_directories(csv.parent_path());
    }
    ccp::write_csv_file(csv.string(), data);
    auto truth_path = csv;
    truth_path.replace_extension(".truth.json");
    emit(ccp::truth_json(schedule, o.run.seed), truth_path.string());
    std::cout << csv.string() << "\n" << truth_path.string() << "\n";
    return 0;
}

int cmd_detect(const Options& o) {
    const auto data = load_input(o);
    const ccp::MomentTable table(data);
    const auto subsets = subsets_for(o, data.d());
    const auto interval = parse_interval(o.interval, data.n());
    const auto r = ccp::detect_ccp(table, interval, o.run.alpha, subsets,
                                   {o.run.variance_test});
    json per = json::array();
    for (const auto& t : r.per_subset) {
        per.push_back(outcome_json(t));
    }
    emit({{"schema", "ccp-detect/1"},
          {"input", o.input},
          {"n", data.n()},
          {"d", data.d()},
          {"interval", interval_json(r.interval)},
          {"alpha", o.run.alpha},
          {"variance_test", o.run.variance_test},
          {"per_subset", per},
          {"combined_p_value", r.combined_p_value},
          {"detect", r.detect}},
         o.output);
    return 0;
}

int cmd_localize(const Options& o) {
    const auto data = load_input(o);
    const ccp::MomentTable table(data);
    const auto subsets = subsets_for(o, data.d());
    const std::size_t n = data.n();
    const ccp::TestOptions test{o.run.variance_test};
    const ccp::PruneOptions prune{o.run.alpha, o.run.bonferroni, test};

    json report{{"schema", "ccp-localize/1"},
                {"input", o.input},
                {"n", n},
                {"d", data.d()},
                {"method", o.method},
                {"alpha", o.run.alpha}};

    ccp::CcpEstimate estimate;
    if (o.method == "prune") {
        if (o.candidates_file.empty()) {
            throw UsageError("method prune needs --candidates-file");
        }
        const auto cands = read_candidates(o.candidates_file, n);
        report["candidates"] = cands;
        report["bonferroni"] = o.run.bonferroni;
        estimate = ccp::prune_candidates(table, ccp::CandidateSet{cands}, subsets, prune);
    } else if (o.method == "loss-single") {
        const auto interval = parse_interval(o.interval, n);
        const auto s = o.run.loss_block != 0 ? o.run.loss_block
                       : o.run.s != 0        ? o.run.s
                                             : ccp::default_block_length(interval.length(), data.d());
        ccp::GridSpec grid;
        grid.step = o.run.grid_step;
        const auto single = ccp::localize_single(table, interval, s, grid, subsets);
        estimate.points = {single.point};
        estimate.provenance = {{"loss-single", interval, 1.0}};
        report["interval"] = interval_json(interval);
        report["block_length"] = s;
        report["loss"] = single.loss;
        report["curve"] = {{"grid_points", single.curve.grid_points},
                           {"values", single.curve.values}};
    } else if (o.method == "binseg" || o.method == "seedbs") {
        const auto s = o.run.s != 0
                           ? o.run.s
                           : std::max<std::size_t>(
                                 static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))),
                                 ccp::min_testable_length(subsets));
        ccp::SeededOptions opts;
        opts.alpha = o.run.alpha;
        opts.test = test;
        opts.loss_block = o.run.loss_block;
        opts.grid.step = o.run.grid_step;
        report["s"] = s;
        if (o.method == "binseg") {
            estimate = ccp::binary_segmentation(table, s, subsets, opts);
        } else {
            if (o.scan == "rescan") {
                opts.scan = ccp::SeededScan::RescanNarrowest;
            } else if (o.scan == "layer") {
                opts.scan = ccp::SeededScan::LayerCounter;
            } else {
                throw UsageError("--scan must be rescan or layer");
            }
            report["decay"] = o.run.decay;
            std::vector<ccp::SeededStep> steps;
            estimate = ccp::seeded_binseg_not(table, ccp::seeded_intervals(n, o.run.decay, s),
                                              subsets, opts, o.trace ? &steps : nullptr);
            if (o.trace) {
                json tr = json::array();
                for (const auto& st : steps) {
                    json alive = json::array();
                    for (const auto& i : st.surviving) {
                        alive.push_back(interval_json(i));
                    }
                    tr.push_back({{"interval", interval_json(st.interval)},
                                  {"point", st.point},
                                  {"p_value", st.p_value},
                                  {"surviving", alive}});
                }
                report["trace"] = tr;
            }
        }
        if (o.then_prune) {
            report["before_prune"] = estimate_json(estimate);
            estimate = ccp::prune_candidates(table, ccp::CandidateSet::make(estimate.points, n),
                                             subsets, prune);
        }
    } else {
        throw UsageError("unknown method '" + o.method + "' (prune, loss-single, binseg, seedbs)");
    }
    report["estimate"] = estimate_json(estimate);
    report["segments"] =
        segments_json(ccp::validate_segments(table, estimate.points, o.run.alpha, subsets, test));
    emit(report, o.output);
    return 0;
}

int cmd_experiment(const Options& o) {
    if (o.run.experiment.empty()) {
        throw UsageError("experiment id required (level-power, exp1, exp2, exp3, exp4, exp5)");
    }
    const auto out = ccp::run_experiment_to_disk(o.run);
    std::cerr << "wrote " << out.records.size() << " records to " << o.run.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Causal change point detection and localization"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("ccpd 1.0"));

    std::string config_path;
    try {
        config_path = find_config(argc, argv);
        if (!config_path.empty()) {
            load_config(config_path, o);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON file of defaults; flags override it");
        sub->add_option("--alpha", o.run.alpha, "Test level")->capture_default_str();
        sub->add_flag("--variance-test,!--no-variance-test", o.run.variance_test,
                      "Bonferroni-combine the Chow test with a variance-ratio test");
        sub->add_option("--subsets-file", o.run.subsets_file,
                        "Covariate subsets, one per line, 1-based, intercept d+1");
        sub->add_option("--subset-cap", o.run.subset_cap,
                        "Largest d for exhaustive subset enumeration")
            ->capture_default_str();
        sub->add_option("--out-dir", o.run.out_dir)->capture_default_str();
        sub->add_option("-o,--output", o.output, "Output file (default: stdout or out-dir)");
    };

    auto* sim = app.add_subcommand("simulate", "Sample a dataset from a schedule");
    common(sim);
    sim->add_option("--schedule", o.schedule,
                    "detection:<nu>, detection:none, exp1, exp2:<nu>, exp3, exp4, exp5");
    sim->add_option("--schedule-file", o.schedule_file, "Schedule JSON");
    sim->add_option("--n", o.run.ns, "Number of time points");
    sim->add_option("--seed", o.run.seed)->capture_default_str();

    auto* det = app.add_subcommand("detect", "Test an interval for a causal change point");
    common(det);
    det->add_option("-i,--input", o.input, "Dataset CSV");
    det->add_option("--interval", o.interval, "START,END (default: whole series)");

    auto* loc = app.add_subcommand("localize", "Estimate causal change points");
    common(loc);
    loc->add_option("-i,--input", o.input, "Dataset CSV");
    loc->add_option("--method", o.method, "prune, loss-single, binseg, seedbs")
        ->capture_default_str();
    loc->add_option("--candidates-file", o.candidates_file, "Candidate locations for prune");
    loc->add_option("--interval", o.interval, "START,END for loss-single");
    loc->add_option("--s", o.run.s, "Minimal segment length (binseg, seedbs) or block length");
    loc->add_option("--loss-block", o.run.loss_block, "Loss block length");
    loc->add_option("--grid-step", o.run.grid_step, "Loss grid step");
    loc->add_option("--decay", o.run.decay, "Seeded interval decay")->capture_default_str();
    loc->add_option("--scan", o.scan, "rescan or layer")->capture_default_str();
    loc->add_flag("--bonferroni,!--no-bonferroni", o.run.bonferroni,
                  "Split alpha over candidates when pruning");
    loc->add_flag("--then-prune", o.then_prune, "Prune binseg/seedbs estimates");
    loc->add_flag("--trace", o.trace, "Record surviving seeded intervals per step");

    auto* exp = app.add_subcommand("experiment", "Run a Monte-Carlo experiment");
    common(exp);
    exp->add_option("id", o.run.experiment, "level-power, exp1, exp2, exp3, exp4, exp5");
    exp->add_option("--reps", o.run.reps)->capture_default_str();
    exp->add_option("--seed", o.run.seed, "Master seed")->capture_default_str();
    exp->add_option("--threads", o.run.threads, "0 uses all cores")->capture_default_str();
    exp->add_option("--n", o.run.ns, "Sample sizes");
    exp->add_option("--nu", o.run.nus, "Relative CCP locations");
    exp->add_option("--delta", o.run.deltas, "Candidate displacements");
    exp->add_option("--s", o.run.s);
    exp->add_option("--loss-block", o.run.loss_block);
    exp->add_option("--grid-step", o.run.grid_step);
    exp->add_option("--decay", o.run.decay)->capture_default_str();
    exp->add_flag("--bonferroni,!--no-bonferroni", o.run.bonferroni);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        o.run.validate();
        if (sim->parsed()) {
            return cmd_simulate(o);
        }
        if (det->parsed()) {
            return cmd_detect(o);
        }
        if (loc->parsed()) {
            return cmd_localize(o);
        }
        return cmd_experiment(o);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
