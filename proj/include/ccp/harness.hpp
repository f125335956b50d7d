#pragma once

// Monte-Carlo experiment runner behind `ccpd experiment`. Repetitions run
// on a worker pool; records are emitted in (setting, repetition) order so
// results.csv is byte-identical for a fixed configuration and master seed.
// Wall-clock times go to timings.csv only.

#include "ccp/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ccp {

inline constexpr const char* kResultSchema = "ccp-results/1";

struct RunConfig {
    /// level-power, exp1, exp2, exp3, exp4, exp5
    std::string experiment;
    double alpha = 0.05;
    /// Minimal segmentation length; 0 uses the experiment default.
    std::size_t s = 0;
    /// Loss block length; 0 uses the experiment default.
    std::size_t loss_block = 0;
    /// Loss grid step; 0 uses the experiment default.
    std::size_t grid_step = 0;
    double decay = 0.5;
    std::size_t subset_cap = kDefaultSubsetCap;
    bool variance_test = false;
    bool bonferroni = true;
    std::size_t reps = 200;
    std::uint64_t seed = 1;
    /// 0 uses the hardware concurrency.
    std::size_t threads = 0;
    std::string out_dir = "results";
    std::string subsets_file;
    /// Overrides of the experiment's sample sizes, relative CCP locations
    /// and candidate displacements.
    std::vector<std::size_t> ns;
    std::vector<double> nus;
    std::vector<double> deltas;

    /// Throws InputError for out-of-range values.
    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Keys absent from `j` keep the values already in `c`.
void merge_json(const nlohmann::json& j, RunConfig& c);

struct ResultRecord {
    std::string experiment;
    std::size_t setting = 0;
    std::size_t n = 0;
    /// Relative location, displacement or candidate set; empty when unused.
    std::string param;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    std::string method;
    /// -1 when the method makes no accept/reject decision.
    int decision = -1;
    std::vector<std::size_t> estimates;
    std::optional<double> p_value;
    std::vector<int> flags;
    std::vector<std::size_t> truth_ccp;
    std::vector<std::size_t> truth_nccp;
    double seconds = 0.0;
};

std::string results_csv_header();
std::string to_csv_row(const ResultRecord& r);

struct ExperimentOutput {
    std::vector<ResultRecord> records;
    nlohmann::json summary;
};

/// Runs the experiment and returns records in deterministic order.
ExperimentOutput run_experiment(const RunConfig& config);

/// run_experiment plus results.csv, timings.csv, summary.json, config.json
/// and figures-data/*.csv under config.out_dir.
ExperimentOutput run_experiment_to_disk(const RunConfig& config);

/// Calls work(i) for i in [0, count) on `threads` workers and sink(i, result)
/// on the calling thread in increasing i.
template <typename T>
void run_ordered(std::size_t count, std::size_t threads, const std::function<T(std::size_t)>& work,
                 const std::function<void(std::size_t, T&&)>& sink);

/// p +/- 1.96 sqrt(p (1 - p) / reps)
struct BinomialCi {
    double rate = 0.0;
    double half_width = 0.0;
    double low = 0.0;
    double high = 0.0;
};
BinomialCi binomial_ci(std::size_t successes, std::size_t reps);

} // namespace ccp

#include "ccp/detail/ordered_pool.hpp"
