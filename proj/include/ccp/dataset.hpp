#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ccp {

/// Consecutive time indices {start, ..., end}. Indices are 1-based and the
/// end point is inclusive, so an interval over the whole series of length n
/// is {1, n}.
struct Interval {
    std::size_t start = 1;
    std::size_t end = 1;

    std::size_t length() const { return end + 1 - start; }
    bool contains(std::size_t t) const { return start <= t && t <= end; }
    bool contains(const Interval& other) const {
        return start <= other.start && other.end <= end;
    }

    friend bool operator==(const Interval&, const Interval&) = default;
    friend auto operator<=>(const Interval&, const Interval&) = default;
};

/// Builds {start, end} and checks 1 <= start < end <= n.
Interval make_interval(std::size_t start, std::size_t end, std::size_t n);

std::string to_string(const Interval& interval);

/// A set of design columns that always includes the intercept.
///
/// Columns are stored 0-based and sorted; the intercept is column d. The
/// textual form uses the 1-based convention of the CSV files, so for d = 4
/// the subset {X1, X2, intercept} prints as "{1,2,5}".
class CovariateSubset {
public:
    CovariateSubset() = default;

    /// From 0-based column indices. The intercept is added if missing.
    static CovariateSubset from_columns(std::vector<std::size_t> columns, std::size_t d);

    /// From 1-based indices in {1, ..., d+1}. The intercept d+1 is added if
    /// missing.
    static CovariateSubset from_one_based(const std::vector<std::size_t>& indices,
                                          std::size_t d);

    static CovariateSubset full(std::size_t d);
    static CovariateSubset intercept_only(std::size_t d);

    std::span<const std::size_t> columns() const { return columns_; }
    std::size_t size() const { return columns_.size(); }
    std::size_t d() const { return d_; }
    bool contains(std::size_t column) const;

    std::string to_string() const;

    /// Tie-break order used wherever a "smallest" subset must be chosen:
    /// fewer columns first, then lexicographic on the sorted column list.
    static bool simpler(const CovariateSubset& a, const CovariateSubset& b);

    friend bool operator==(const CovariateSubset&, const CovariateSubset&) = default;

private:
    std::vector<std::size_t> columns_;
    std::size_t d_ = 0;
};

/// Default upper bound on d for exhaustive subset scans (2^12 = 4096 subsets).
inline constexpr std::size_t kDefaultSubsetCap = 12;

/// All 2^d subsets containing the intercept, in binary-counting order over
/// the non-intercept columns: for d = 2 this is {3}, {1,3}, {2,3}, {1,2,3}.
std::vector<CovariateSubset> enumerate_subsets(std::size_t d,
                                               std::size_t cap = kDefaultSubsetCap);

/// n time points of (X, Y). X is n x (d+1), column-major, with the last
/// column identically one.
class Dataset {
public:
    /// Takes ownership of an already-augmented design. Throws InputError if
    /// the last column is not all ones, n < 2, or any entry is not finite.
    Dataset(Eigen::MatrixXd x, Eigen::VectorXd y);

    std::size_t n() const { return static_cast<std::size_t>(x_.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(x_.cols()) - 1; }
    std::size_t columns() const { return static_cast<std::size_t>(x_.cols()); }
    std::size_t intercept_column() const { return d(); }

    const Eigen::MatrixXd& x() const { return x_; }
    const Eigen::VectorXd& y() const { return y_; }

    std::span<const double> column(std::size_t j) const {
        return {x_.col(static_cast<Eigen::Index>(j)).data(), n()};
    }
    std::span<const double> response() const { return {y_.data(), n()}; }

    Interval full_range() const { return {1, n()}; }

    /// Rows in reverse time order; used by reflection tests and tools.
    Dataset reversed() const;

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
};

/// Validates raw covariates and appends the intercept column unless the last
/// column is already identically one.
Dataset validate_dataset(const Eigen::MatrixXd& raw, const Eigen::VectorXd& y);

/// CSV with a header row "X1,...,Xd,Y", one row per time point.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const Dataset& data);
void write_csv_file(const std::string& path, const Dataset& data);

/// One subset per line as 1-based column indices separated by commas or
/// whitespace; '#' starts a comment. The intercept is implied.
std::vector<CovariateSubset> read_subsets(std::istream& in, std::size_t d);
std::vector<CovariateSubset> read_subsets_file(const std::string& path, std::size_t d);

} // namespace ccp
