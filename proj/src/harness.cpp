#include "ccp/harness.hpp"

#include "ccp/error.hpp"
#include "ccp/invariance.hpp"
#include "ccp/localization.hpp"
#include "ccp/moments.hpp"
#include "ccp/rng.hpp"
#include "ccp/simulator.hpp"
#include "ccp/stability.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace ccp {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ';';
        }
        out += std::to_string(values[i]);
    }
    return out;
}

std::size_t ceil_mul(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

std::vector<double> tenths() {
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

struct Setting {
    std::size_t n = 0;
    std::string param;
    double value = 0.0;
};

struct Context {
    const RunConfig& cfg;
    std::vector<CovariateSubset> subsets;
    TestOptions test;
};

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point since) {
    return std::chrono::duration<double>(Clock::now() - since).count();
}

ResultRecord base_record(const RunConfig& cfg, std::size_t setting_index, const Setting& setting,
                         std::size_t rep, std::uint64_t seed, const ScmSchedule& schedule) {
    ResultRecord r;
    r.experiment = cfg.experiment;
    r.setting = setting_index;
    r.n = setting.n;
    r.param = setting.param;
    r.rep = rep;
    r.seed = seed;
    r.truth_ccp = schedule.points(ChangeLabel::Ccp);
    r.truth_nccp = schedule.points(ChangeLabel::Nccp);
    return r;
}

std::vector<Setting> settings_for(const RunConfig& cfg) {
    auto ns_or = [&](std::vector<std::size_t> fallback) {
        return cfg.ns.empty() ? fallback : cfg.ns;
    };
    std::vector<Setting> out;
    const auto& e = cfg.experiment;
    if (e == "level-power") {
        const auto nus = cfg.nus.empty() ? tenths() : cfg.nus;
        for (auto n : ns_or({250, 1000, 4000})) {
            for (auto nu : nus) {
                out.push_back({n, format_double(nu), nu});
            }
            out.push_back({n, "none", -1.0});
        }
    } else if (e == "exp1" || e == "exp3" || e == "exp4") {
        const std::vector<std::size_t> fallback =
            e == "exp3" ? std::vector<std::size_t>{1000, 2000, 4000}
                        : std::vector<std::size_t>{250, 1000, 4000};
        for (auto n : ns_or(fallback)) {
            out.push_back({n, "", 0.0});
        }
    } else if (e == "exp2") {
        const auto nus = cfg.nus.empty() ? tenths() : cfg.nus;
        for (auto n : ns_or({2000})) {
            for (auto nu : nus) {
                out.push_back({n, format_double(nu), nu});
            }
        }
    } else if (e == "exp5") {
        const auto deltas = cfg.deltas.empty()
                                ? std::vector<double>{-0.2, -0.15, -0.1, -0.05, 0.0,
                                                      0.05, 0.1,   0.15, 0.2}
                                : cfg.deltas;
        for (auto n : ns_or({4000})) {
            for (auto delta : deltas) {
                out.push_back({n, format_double(delta), delta});
            }
        }
    } else {
        throw InputError("unknown experiment '" + e +
                         "' (expected level-power, exp1, exp2, exp3, exp4, exp5)");
    }
    return out;
}

std::vector<ResultRecord> run_level_power(const Context& ctx, std::size_t si, const Setting& st,
                                          std::size_t rep, std::uint64_t seed) {
    const auto name = st.param == "none" ? std::string("detection:none")
                                         : "detection:" + st.param;
    const auto schedule = builtin_schedule(name, st.n);
    const auto start = Clock::now();
    const MomentTable table(generate(schedule, seed));
    const auto result =
        detect_ccp(table, {1, st.n}, ctx.cfg.alpha, ctx.subsets, ctx.test);
    auto r = base_record(ctx.cfg, si, st, rep, seed, schedule);
    r.method = "Chow";
    r.decision = result.detect ? 1 : 0;
    r.p_value = result.combined_p_value;
    r.seconds = elapsed(start);
    return {r};
}

ResultRecord estimate_record(ResultRecord r, const std::string& method, const CcpEstimate& est,
                             double seconds) {
    r.method = method;
    r.estimates = est.points;
    r.seconds = seconds;
    return r;
}

std::vector<ResultRecord> run_exp1(const Context& ctx, std::size_t si, const Setting& st,
                                   std::size_t rep, std::uint64_t seed) {
    const auto& cfg = ctx.cfg;
    const auto schedule = builtin_schedule("exp1", st.n);
    const MomentTable table(generate(schedule, seed));
    const auto base = base_record(cfg, si, st, rep, seed, schedule);
    std::vector<ResultRecord> out;

    auto t0 = Clock::now();
    const auto s = cfg.loss_block != 0 ? cfg.loss_block
                                       : (cfg.s != 0 ? cfg.s : std::max<std::size_t>(ceil_mul(0.1, st.n), 2));
    GridSpec grid;
    if (cfg.grid_step != 0) {
        grid.step = cfg.grid_step;
    } else {
        for (int j = 1; j <= 19; ++j) {
            grid.points.push_back(ceil_mul(0.05 * j, st.n) + 1);
        }
    }
    const auto single = localize_single(table, {1, st.n}, s, grid, ctx.subsets);
    auto loss = base;
    loss.method = "LossCS";
    loss.estimates = {single.point};
    loss.seconds = elapsed(t0);
    out.push_back(loss);

    t0 = Clock::now();
    const auto pruned = prune_candidates(table, CandidateSet::make(schedule.all_points(), st.n),
                                         ctx.subsets, {cfg.alpha, cfg.bonferroni, ctx.test});
    out.push_back(estimate_record(base, "Prune-Oracle", pruned, elapsed(t0)));
    return out;
}

std::vector<ResultRecord> run_exp2(const Context& ctx, std::size_t si, const Setting& st,
                                   std::size_t rep, std::uint64_t seed) {
    const auto& cfg = ctx.cfg;
    const auto schedule = builtin_schedule("exp2:" + st.param, st.n);
    const MomentTable table(generate(schedule, seed));
    const auto t0 = Clock::now();
    const auto s = cfg.loss_block != 0 ? cfg.loss_block
                                       : (cfg.s != 0 ? cfg.s : std::max<std::size_t>(ceil_mul(0.1, st.n), 2));
    GridSpec grid;
    grid.step = cfg.grid_step;
    const auto single = localize_single(table, {1, st.n}, s, grid, ctx.subsets);
    auto r = base_record(cfg, si, st, rep, seed, schedule);
    r.method = "LossCS";
    r.estimates = {single.point};
    r.seconds = elapsed(t0);
    return {r};
}

std::vector<ResultRecord> run_exp3(const Context& ctx, std::size_t si, const Setting& st,
                                   std::size_t rep, std::uint64_t seed) {
    const auto& cfg = ctx.cfg;
    const auto schedule = builtin_schedule("exp3", st.n);
    const MomentTable table(generate(schedule, seed));
    const auto base = base_record(cfg, si, st, rep, seed, schedule);
    const auto s = cfg.s != 0 ? cfg.s : std::max<std::size_t>(ceil_mul(0.2, st.n), 2);

    SeededOptions opts;
    opts.alpha = cfg.alpha;
    opts.test = ctx.test;
    opts.loss_block = cfg.loss_block;
    opts.grid.step = cfg.grid_step != 0 ? cfg.grid_step : 1;
    const PruneOptions prune{cfg.alpha, cfg.bonferroni, ctx.test};

    std::vector<ResultRecord> out;
    auto t0 = Clock::now();
    const auto seeded =
        seeded_binseg_not(table, seeded_intervals(st.n, cfg.decay, s), ctx.subsets, opts);
    out.push_back(estimate_record(base, "LossCS-SeedBS", seeded, elapsed(t0)));
    t0 = Clock::now();
    out.push_back(estimate_record(
        base, "LossCS-SeedBS-Prune",
        prune_candidates(table, CandidateSet::make(seeded.points, st.n), ctx.subsets, prune),
        elapsed(t0) + out.back().seconds));

    t0 = Clock::now();
    const auto stdbs = binary_segmentation(table, s, ctx.subsets, opts);
    out.push_back(estimate_record(base, "LossCS-StdBS", stdbs, elapsed(t0)));
    t0 = Clock::now();
    out.push_back(estimate_record(
        base, "LossCS-StdBS-Prune",
        prune_candidates(table, CandidateSet::make(stdbs.points, st.n), ctx.subsets, prune),
        elapsed(t0) + out.back().seconds));
    return out;
}

std::vector<ResultRecord> run_exp4(const Context& ctx, std::size_t si, const Setting& st,
                                   std::size_t rep, std::uint64_t seed) {
    const auto& cfg = ctx.cfg;
    const auto schedule = builtin_schedule("exp4", st.n);
    const MomentTable table(generate(schedule, seed));
    const auto base = base_record(cfg, si, st, rep, seed, schedule);
    const auto k = schedule.points(ChangeLabel::Ccp);
    const std::vector<std::pair<std::string, std::vector<std::size_t>>> sets{
        {"k1", {k[0]}}, {"k2", {k[1]}}, {"k1,k2", {k[0], k[1]}}};
    std::vector<ResultRecord> out;
    for (const auto& [label, cands] : sets) {
        const auto t0 = Clock::now();
        const auto est = prune_candidates(table, CandidateSet::make(cands, st.n), ctx.subsets,
                                          {cfg.alpha, cfg.bonferroni, ctx.test});
        auto r = estimate_record(base, "Prune-" + label, est, elapsed(t0));
        r.decision = est.points == cands ? 1 : 0;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ResultRecord> run_exp5(const Context& ctx, std::size_t si, const Setting& st,
                                   std::size_t rep, std::uint64_t seed) {
    const auto& cfg = ctx.cfg;
    const auto schedule = builtin_schedule("exp5", st.n);
    const MomentTable table(generate(schedule, seed));
    const auto t0 = Clock::now();
    const auto candidate = static_cast<std::size_t>(
        std::llround((0.5 + st.value) * static_cast<double>(st.n)));
    const auto est = prune_candidates(table, CandidateSet::make({candidate}, st.n), ctx.subsets,
                                      {cfg.alpha, cfg.bonferroni, ctx.test});
    auto r = base_record(cfg, si, st, rep, seed, schedule);
    r.method = "Prune-Validate";
    r.estimates = est.points;
    r.decision = est.points.empty() ? 0 : 1;
    if (!est.points.empty()) {
        for (const auto& seg : validate_segments(table, est.points, cfg.alpha, ctx.subsets, ctx.test)) {
            r.flags.push_back(seg.flagged ? 1 : 0);
        }
    }
    r.seconds = elapsed(t0);
    return {r};
}

// Aggregates --------------------------------------------------------------

struct Key {
    std::size_t setting;
    std::string method;
    bool operator<(const Key& o) const {
        return setting != o.setting ? setting < o.setting : method < o.method;
    }
};

double relative(std::size_t k, std::size_t n) {
    return static_cast<double>(k - 1) / static_cast<double>(n);
}

std::string rate_columns(std::size_t successes, std::size_t reps) {
    const auto ci = binomial_ci(successes, reps);
    return std::to_string(reps) + "," + std::to_string(successes) + "," +
           format_double(ci.rate) + "," + format_double(ci.half_width) + "," +
           format_double(ci.low) + "," + format_double(ci.high);
}

std::map<std::string, std::string> figures(const RunConfig& cfg,
                                           const std::vector<ResultRecord>& records) {
    std::map<std::string, std::string> out;
    std::ostringstream csv;
    const auto& e = cfg.experiment;
    if (e == "level-power" || e == "exp4") {
        std::map<Key, std::pair<std::size_t, std::size_t>> counts;
        std::map<Key, const ResultRecord*> first;
        for (const auto& r : records) {
            Key key{r.setting, r.method};
            auto& c = counts[key];
            c.first += r.decision == 1 ? 1 : 0;
            c.second += 1;
            first.emplace(key, &r);
        }
        if (e == "level-power") {
            csv << "n,nu,reps,rejections,rate,ci_half_width,ci_low,ci_high\n";
        } else {
            csv << "n,candidate_set,reps,detections,rate,ci_half_width,ci_low,ci_high\n";
        }
        for (const auto& [key, c] : counts) {
            const auto* r = first[key];
            const auto label = e == "level-power" ? r->param : key.method.substr(6);
            csv << r->n << ",\"" << label << "\"," << rate_columns(c.first, c.second) << "\n";
        }
        out[e == "level-power" ? "fig4_level_power.csv" : "figC1_exp4.csv"] = csv.str();
    } else if (e == "exp1" || e == "exp2" || e == "exp3") {
        csv << (e == "exp2" ? "nu,method,rep,estimate,relative_location\n"
                            : "n,method,rep,estimate,relative_location\n");
        for (const auto& r : records) {
            const std::string lead = e == "exp2" ? r.param : std::to_string(r.n);
            if (r.estimates.empty()) {
                csv << lead << "," << r.method << "," << r.rep << ",NA,NA\n";
            }
            for (auto k : r.estimates) {
                csv << lead << "," << r.method << "," << r.rep << "," << k << ","
                    << format_double(relative(k, r.n)) << "\n";
            }
        }
        out[e == "exp1" ? "fig5_exp1.csv" : (e == "exp2" ? "fig6_exp2.csv" : "fig7_exp3.csv")] =
            csv.str();
    } else if (e == "exp5") {
        csv << "n,delta,reps,retained,retained_rate,flagged,flagged_rate_given_retained,not_flagged\n";
        std::map<std::size_t, std::array<std::size_t, 3>> counts;
        std::map<std::size_t, const ResultRecord*> first;
        for (const auto& r : records) {
            auto& c = counts[r.setting];
            c[0] += 1;
            if (r.decision == 1) {
                c[1] += 1;
                if (std::any_of(r.flags.begin(), r.flags.end(), [](int f) { return f == 1; })) {
                    c[2] += 1;
                }
            }
            first.emplace(r.setting, &r);
        }
        for (const auto& [setting, c] : counts) {
            const auto* r = first[setting];
            const double retained_rate = static_cast<double>(c[1]) / static_cast<double>(c[0]);
            const double flagged_rate =
                c[1] == 0 ? 0.0 : static_cast<double>(c[2]) / static_cast<double>(c[1]);
            csv << r->n << "," << r->param << "," << c[0] << "," << c[1] << ","
                << format_double(retained_rate) << "," << c[2] << "," << format_double(flagged_rate)
                << "," << (c[1] - c[2]) << "\n";
        }
        out["figC2_exp5.csv"] = csv.str();
    }
    return out;
}

nlohmann::json summarize(const RunConfig& cfg, const std::vector<ResultRecord>& records) {
    struct Acc {
        std::size_t n = 0;
        std::string param;
        std::size_t reps = 0;
        std::size_t decided = 0;
        std::size_t positive = 0;
        std::size_t estimates = 0;
        std::size_t single = 0;
        double single_sum = 0.0;
        double single_sq = 0.0;
    };
    std::map<Key, Acc> acc;
    for (const auto& r : records) {
        auto& a = acc[{r.setting, r.method}];
        a.n = r.n;
        a.param = r.param;
        a.reps += 1;
        if (r.decision >= 0) {
            a.decided += 1;
            a.positive += r.decision == 1 ? 1 : 0;
        }
        a.estimates += r.estimates.size();
        if (r.estimates.size() == 1) {
            const double rel = relative(r.estimates[0], r.n);
            a.single += 1;
            a.single_sum += rel;
            a.single_sq += rel * rel;
        }
    }
    auto groups = nlohmann::json::array();
    for (const auto& [key, a] : acc) {
        nlohmann::json g{{"setting", key.setting},
                         {"method", key.method},
                         {"n", a.n},
                         {"param", a.param},
                         {"reps", a.reps},
                         {"mean_estimates_per_rep",
                          static_cast<double>(a.estimates) / static_cast<double>(a.reps)}};
        if (a.decided > 0) {
            const auto ci = binomial_ci(a.positive, a.decided);
            g["positive"] = a.positive;
            g["rate"] = ci.rate;
            g["ci_half_width"] = ci.half_width;
            g["ci_low"] = ci.low;
            g["ci_high"] = ci.high;
        }
        if (a.single > 0) {
            const double m = a.single_sum / static_cast<double>(a.single);
            const double var = std::max(0.0, a.single_sq / static_cast<double>(a.single) - m * m);
            g["single_estimate_reps"] = a.single;
            g["mean_relative_estimate"] = m;
            g["sd_relative_estimate"] = std::sqrt(var);
        }
        groups.push_back(std::move(g));
    }
    nlohmann::json cfg_json;
    to_json(cfg_json, cfg);
    cfg_json.erase("threads");
    cfg_json.erase("out_dir");
    return {{"schema", kResultSchema},
            {"experiment", cfg.experiment},
            {"config", cfg_json},
            {"records", records.size()},
            {"groups", groups}};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

} // namespace

void RunConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InputError("alpha must lie in (0, 1)");
    }
    if (!(decay >= 0.5 && decay < 1.0)) {
        throw InputError("decay must lie in [1/2, 1)");
    }
    if (s == 1) {
        throw InputError("s must be at least 2");
    }
    if (loss_block == 1) {
        throw InputError("loss block length must be at least 2");
    }
    if (reps < 1) {
        throw InputError("reps must be at least 1");
    }
    for (auto n : ns) {
        if (n < 20) {
            throw InputError("sample sizes must be at least 20");
        }
    }
    for (auto nu : nus) {
        if (!(nu > 0.0 && nu < 1.0)) {
            throw InputError("relative locations must lie in (0, 1)");
        }
    }
    for (auto d : deltas) {
        if (!(d > -0.5 && d < 0.5)) {
            throw InputError("displacements must lie in (-0.5, 0.5)");
        }
    }
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"experiment", c.experiment},
                       {"alpha", c.alpha},
                       {"s", c.s},
                       {"loss_block", c.loss_block},
                       {"grid_step", c.grid_step},
                       {"decay", c.decay},
                       {"subset_cap", c.subset_cap},
                       {"variance_test", c.variance_test},
                       {"bonferroni", c.bonferroni},
                       {"reps", c.reps},
                       {"seed", c.seed},
                       {"threads", c.threads},
                       {"out_dir", c.out_dir},
                       {"subsets_file", c.subsets_file},
                       {"n", c.ns},
                       {"nu", c.nus},
                       {"delta", c.deltas}};
}

void merge_json(const nlohmann::json& j, RunConfig& c) {
    try {
        c.experiment = j.value("experiment", c.experiment);
        c.alpha = j.value("alpha", c.alpha);
        c.s = j.value("s", c.s);
        c.loss_block = j.value("loss_block", c.loss_block);
        c.grid_step = j.value("grid_step", c.grid_step);
        c.decay = j.value("decay", c.decay);
        c.subset_cap = j.value("subset_cap", c.subset_cap);
        c.variance_test = j.value("variance_test", c.variance_test);
        c.bonferroni = j.value("bonferroni", c.bonferroni);
        c.reps = j.value("reps", c.reps);
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.subsets_file = j.value("subsets_file", c.subsets_file);
        c.ns = j.value("n", c.ns);
        c.nus = j.value("nu", c.nus);
        c.deltas = j.value("delta", c.deltas);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
}

std::string results_csv_header() {
    return "schema,experiment,setting,n,param,rep,seed,method,decision,n_estimates,estimates,"
           "p_value,flags,truth_ccp,truth_nccp";
}

std::string to_csv_row(const ResultRecord& r) {
    std::string row;
    row += kResultSchema;
    row += "," + r.experiment;
    row += "," + std::to_string(r.setting);
    row += "," + std::to_string(r.n);
    row += "," + r.param;
    row += "," + std::to_string(r.rep);
    row += "," + std::to_string(r.seed);
    row += "," + r.method;
    row += "," + (r.decision < 0 ? std::string() : std::to_string(r.decision));
    row += "," + std::to_string(r.estimates.size());
    row += "," + join(r.estimates);
    row += "," + (r.p_value ? format_double(*r.p_value) : std::string());
    row += "," + join(r.flags);
    row += "," + join(r.truth_ccp);
    row += "," + join(r.truth_nccp);
    return row;
}

BinomialCi binomial_ci(std::size_t successes, std::size_t reps) {
    BinomialCi ci;
    if (reps == 0) {
        return ci;
    }
    ci.rate = static_cast<double>(successes) / static_cast<double>(reps);
    ci.half_width = 1.96 * std::sqrt(ci.rate * (1.0 - ci.rate) / static_cast<double>(reps));
    ci.low = std::max(0.0, ci.rate - ci.half_width);
    ci.high = std::min(1.0, ci.rate + ci.half_width);
    return ci;
}

ExperimentOutput run_experiment(const RunConfig& config) {
    config.validate();
    const auto settings = settings_for(config);
    Context ctx{config, {}, {config.variance_test}};
    ctx.subsets = config.subsets_file.empty() ? enumerate_subsets(4, config.subset_cap)
                                              : read_subsets_file(config.subsets_file, 4);

    using Runner = std::vector<ResultRecord> (*)(const Context&, std::size_t, const Setting&,
                                                 std::size_t, std::uint64_t);
    Runner runner = nullptr;
    const auto& e = config.experiment;
    if (e == "level-power") {
        runner = run_level_power;
    } else if (e == "exp1") {
        runner = run_exp1;
    } else if (e == "exp2") {
        runner = run_exp2;
    } else if (e == "exp3") {
        runner = run_exp3;
    } else if (e == "exp4") {
        runner = run_exp4;
    } else {
        runner = run_exp5;
    }

    ExperimentOutput out;
    const auto jobs = settings.size() * config.reps;
    run_ordered<std::vector<ResultRecord>>(
        jobs, config.threads,
        [&](std::size_t job) {
            const auto si = job / config.reps;
            const auto rep = job % config.reps;
            const auto seed = rng::derive_seed(config.seed, si, rep);
            return runner(ctx, si, settings[si], rep, seed);
        },
        [&](std::size_t, std::vector<ResultRecord>&& recs) {
            for (auto& r : recs) {
                out.records.push_back(std::move(r));
            }
        });
    out.summary = summarize(config, out.records);
    return out;
}

ExperimentOutput run_experiment_to_disk(const RunConfig& config) {
    auto out = run_experiment(config);
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir / "figures-data");

    std::string results = results_csv_header() + "\n";
    std::string timings = "experiment,setting,rep,method,seconds\n";
    for (const auto& r : out.records) {
        results += to_csv_row(r) + "\n";
        timings += r.experiment + "," + std::to_string(r.setting) + "," + std::to_string(r.rep) +
                   "," + r.method + "," + format_double(r.seconds) + "\n";
    }
    write_file(dir / "results.csv", results);
    write_file(dir / "timings.csv", timings);
    write_file(dir / "summary.json", out.summary.dump(2) + "\n");
    nlohmann::json cfg_json;
    to_json(cfg_json, config);
    write_file(dir / "config.json", cfg_json.dump(2) + "\n");
    for (const auto& [name, content] : figures(config, out.records)) {
        write_file(dir / "figures-data" / name, content);
    }
    return out;
}

} // namespace ccp
