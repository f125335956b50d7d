#include "ccp/dataset.hpp"

#include "ccp/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ccp {

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) {
        fields.push_back(trim(field));
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

bool is_all_ones(const Eigen::MatrixXd& m, Eigen::Index col) {
    return (m.col(col).array() == 1.0).all();
}

} // namespace

Interval make_interval(std::size_t start, std::size_t end, std::size_t n) {
    if (start < 1 || start >= end || end > n) {
        throw IntervalError("invalid interval " + to_string(Interval{start, end}) +
                            " for n = " + std::to_string(n) +
                            " (need 1 <= start < end <= n)");
    }
    return {start, end};
}

std::string to_string(const Interval& interval) {
    return "[" + std::to_string(interval.start) + ", " + std::to_string(interval.end) + "]";
}

CovariateSubset CovariateSubset::from_columns(std::vector<std::size_t> columns, std::size_t d) {
    for (auto c : columns) {
        if (c > d) {
            throw InputError("column index " + std::to_string(c + 1) + " exceeds d + 1 = " +
                             std::to_string(d + 1));
        }
    }
    columns.push_back(d);
    std::sort(columns.begin(), columns.end());
    columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
    CovariateSubset s;
    s.columns_ = std::move(columns);
    s.d_ = d;
    return s;
}

CovariateSubset CovariateSubset::from_one_based(const std::vector<std::size_t>& indices,
                                                std::size_t d) {
    std::vector<std::size_t> columns;
    columns.reserve(indices.size());
    for (auto i : indices) {
        if (i < 1 || i > d + 1) {
            throw InputError("subset index " + std::to_string(i) + " outside {1, ..., " +
                             std::to_string(d + 1) + "}");
        }
        columns.push_back(i - 1);
    }
    return from_columns(std::move(columns), d);
}

CovariateSubset CovariateSubset::full(std::size_t d) {
    std::vector<std::size_t> columns(d + 1);
    for (std::size_t j = 0; j <= d; ++j) {
        columns[j] = j;
    }
    return from_columns(std::move(columns), d);
}

CovariateSubset CovariateSubset::intercept_only(std::size_t d) {
    return from_columns({}, d);
}

bool CovariateSubset::contains(std::size_t column) const {
    return std::binary_search(columns_.begin(), columns_.end(), column);
}

std::string CovariateSubset::to_string() const {
    std::string out = "{";
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += std::to_string(columns_[i] + 1);
    }
    return out + "}";
}

bool CovariateSubset::simpler(const CovariateSubset& a, const CovariateSubset& b) {
    if (a.size() != b.size()) {
        return a.size() < b.size();
    }
    return std::lexicographical_compare(a.columns_.begin(), a.columns_.end(),
                                        b.columns_.begin(), b.columns_.end());
}

std::vector<CovariateSubset> enumerate_subsets(std::size_t d, std::size_t cap) {
    if (d > cap) {
        throw InputError("d = " + std::to_string(d) + " exceeds the subset cap of " +
                         std::to_string(cap) + " (" + std::to_string(1ULL << std::min<std::size_t>(cap, 62)) +
                         " subsets); pass an explicit subset list or raise the cap");
    }
    if (d >= 63) {
        throw InputError("d too large for exhaustive subset enumeration");
    }
    const std::uint64_t count = std::uint64_t{1} << d;
    std::vector<CovariateSubset> out;
    out.reserve(count);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        std::vector<std::size_t> columns;
        for (std::size_t j = 0; j < d; ++j) {
            if (mask & (std::uint64_t{1} << j)) {
                columns.push_back(j);
            }
        }
        out.push_back(CovariateSubset::from_columns(std::move(columns), d));
    }
    return out;
}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.cols() < 1) {
        throw InputError("design matrix has no columns");
    }
    if (x_.rows() != y_.size()) {
        throw InputError("dimension mismatch: X has " + std::to_string(x_.rows()) +
                         " rows but Y has " + std::to_string(y_.size()) + " entries");
    }
    if (x_.rows() < 2) {
        throw InputError("need at least 2 time points, got " + std::to_string(x_.rows()));
    }
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            if (!std::isfinite(x_(i, j))) {
                throw InputError("non-finite value at row " + std::to_string(i + 1) +
                                 ", column " + std::to_string(j + 1));
            }
        }
    }
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
        if (!std::isfinite(y_(i))) {
            throw InputError("non-finite value at row " + std::to_string(i + 1) + ", column Y");
        }
    }
    if (!is_all_ones(x_, x_.cols() - 1)) {
        throw InputError("last design column must be the all-ones intercept");
    }
}

Dataset Dataset::reversed() const {
    return Dataset(x_.colwise().reverse(), y_.reverse());
}

Dataset validate_dataset(const Eigen::MatrixXd& raw, const Eigen::VectorXd& y) {
    if (raw.rows() != y.size()) {
        throw InputError("dimension mismatch: matrix has " + std::to_string(raw.rows()) +
                         " rows but response has " + std::to_string(y.size()) + " entries");
    }
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            if (!std::isfinite(raw(i, j))) {
                throw InputError("non-finite value at row " + std::to_string(i + 1) +
                                 ", column " + std::to_string(j + 1));
            }
        }
    }
    const bool has_intercept = raw.cols() > 0 && is_all_ones(raw, raw.cols() - 1);
    for (Eigen::Index j = 0; j + (has_intercept ? 1 : 0) < raw.cols(); ++j) {
        if (raw.rows() > 0 && is_all_ones(raw, j)) {
            throw InputError("column " + std::to_string(j + 1) +
                             " is all ones and duplicates the intercept; place it last or drop it");
        }
    }
    if (has_intercept) {
        return Dataset(raw, y);
    }
    Eigen::MatrixXd x(raw.rows(), raw.cols() + 1);
    x.leftCols(raw.cols()) = raw;
    x.col(raw.cols()).setOnes();
    return Dataset(std::move(x), y);
}

Dataset read_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_line(line);
            break;
        }
    }
    if (header.size() < 2) {
        throw InputError("CSV header must list at least one covariate and the response Y");
    }
    if (header.back() != "Y") {
        throw InputError("last CSV column must be named Y, got '" + header.back() + "'");
    }
    const std::size_t width = header.size();
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != width) {
            throw InputError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(width) + " fields, got " +
                             std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < width; ++j) {
            const auto& f = fields[j];
            if (f.empty()) {
                throw InputError("missing value at row " + std::to_string(rows + 1) +
                                 ", column " + header[j]);
            }
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size()) {
                throw InputError("cannot parse '" + f + "' at row " + std::to_string(rows + 1) +
                                 ", column " + header[j]);
            }
            if (!std::isfinite(v)) {
                throw InputError("non-finite value at row " + std::to_string(rows + 1) +
                                 ", column " + header[j]);
            }
            values.push_back(v);
        }
        ++rows;
    }
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width - 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j + 1 < width; ++j) {
            raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * width + j];
        }
        y(static_cast<Eigen::Index>(i)) = values[i * width + width - 1];
    }
    return validate_dataset(raw, y);
}

Dataset read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& data) {
    const auto d = data.d();
    for (std::size_t j = 0; j < d; ++j) {
        out << 'X' << (j + 1) << ',';
    }
    out << "Y\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < d; ++j) {
            out << data.x()(row, static_cast<Eigen::Index>(j)) << ',';
        }
        out << data.y()(row) << '\n';
    }
}

void write_csv_file(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) {
        throw InputError("cannot write " + path);
    }
    write_csv(out, data);
}

std::vector<CovariateSubset> read_subsets(std::istream& in, std::size_t d) {
    std::vector<CovariateSubset> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream tokens(line);
        std::vector<std::size_t> indices;
        long long value = 0;
        bool any = false;
        while (tokens >> value) {
            if (value < 1) {
                throw InputError("subset index must be >= 1, got " + std::to_string(value));
            }
            indices.push_back(static_cast<std::size_t>(value));
            any = true;
        }
        if (!tokens.eof()) {
            throw InputError("cannot parse subset line '" + line + "'");
        }
        if (any) {
            out.push_back(CovariateSubset::from_one_based(indices, d));
        }
    }
    if (out.empty()) {
        throw InputError("subset file lists no subsets");
    }
    return out;
}

std::vector<CovariateSubset> read_subsets_file(const std::string& path, std::size_t d) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    return read_subsets(in, d);
}

} // namespace ccp
