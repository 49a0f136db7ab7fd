#include "noisecast/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noisecast/csv.hpp"

namespace noisecast {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    cells.push_back(cell);
    return cells;
}

std::string trimmed(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

// Locale-independent: only '.' may appear as the decimal separator, and
// the whole cell must be consumed.
bool parse_cell(const std::string& raw, double& out) {
    const std::string s = trimmed(raw);
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string op_name(TransformStep::Op op) {
    switch (op) {
        case TransformStep::Op::Lag: return "lag";
        case TransformStep::Op::PctChange: return "pct_change";
        case TransformStep::Op::Standardize: return "standardize";
        case TransformStep::Op::Demean: return "demean";
        case TransformStep::Op::Select: return "select";
        case TransformStep::Op::DropNa: return "drop_na";
    }
    return "?";
}

TransformStep::Op op_from_name(const std::string& name) {
    if (name == "lag") return TransformStep::Op::Lag;
    if (name == "pct_change") return TransformStep::Op::PctChange;
    if (name == "standardize") return TransformStep::Op::Standardize;
    if (name == "demean") return TransformStep::Op::Demean;
    if (name == "select") return TransformStep::Op::Select;
    if (name == "drop_na") return TransformStep::Op::DropNa;
    throw InvalidInput("unknown transform op: " + name);
}

Dataset keep_rows(const Dataset& d, const std::vector<int>& rows) {
    Dataset out = d;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), d.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.index.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = d.X.row(rows[i]);
        out.y(static_cast<Eigen::Index>(i)) = d.y(rows[i]);
        out.index.push_back(d.index[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

}  // namespace

nlohmann::json TransformStep::to_json() const {
    nlohmann::json j;
    j["op"] = op_name(op);
    if (op == Op::Lag) j["k"] = k;
    if (op == Op::Select) j["columns"] = columns;
    return j;
}

TransformStep TransformStep::from_json(const nlohmann::json& j) {
    TransformStep step;
    step.op = op_from_name(j.at("op").get<std::string>());
    if (step.op == Op::Lag) step.k = j.value("k", 1);
    if (step.op == Op::Select)
        step.columns = j.at("columns").get<std::vector<std::string>>();
    return step;
}

TransformSpec TransformSpec::from_json(const nlohmann::json& j) {
    TransformSpec spec;
    for (const auto& item : j) spec.steps.push_back(TransformStep::from_json(item));
    return spec;
}

nlohmann::json TransformSpec::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : steps) j.push_back(s.to_json());
    return j;
}

Dataset load_csv(const std::string& path, const std::string& target,
                 const std::optional<std::string>& index_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    const auto header = split_csv_line(line);
    {
        std::set<std::string> seen;
        for (const auto& h : header)
            if (!seen.insert(trimmed(h)).second)
                throw DataError(path + ": duplicate header '" + trimmed(h) + "'");
    }
    int target_col = -1, index_col = -1;
    std::vector<int> feature_cols;
    Dataset d;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trimmed(header[c]);
        if (name == target) {
            target_col = static_cast<int>(c);
        } else if (index_column && name == *index_column) {
            index_col = static_cast<int>(c);
            d.index_name = name;
        } else {
            feature_cols.push_back(static_cast<int>(c));
            d.feature_names.push_back(name);
        }
    }
    if (target_col < 0)
        throw DataError(path + ": target column '" + target + "' not found");
    if (index_column && index_col < 0)
        throw DataError(path + ": index column '" + *index_column + "' not found");
    d.target_name = target;

    std::vector<std::vector<double>> rows;
    std::vector<std::string> row_index;
    int line_no = 1;
    int dropped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        bool missing = false;
        std::vector<double> row(feature_cols.size() + 1);
        for (std::size_t fc = 0; fc <= feature_cols.size(); ++fc) {
            const int col = fc == 0 ? target_col : feature_cols[fc - 1];
            const std::string& cell = cells[static_cast<std::size_t>(col)];
            if (trimmed(cell).empty()) {
                missing = true;
                continue;
            }
            double v = 0.0;
            if (!parse_cell(cell, v))
                throw DataError(path + ": unparseable cell '" + trimmed(cell) +
                                "' at row " + std::to_string(line_no) +
                                ", column '" + trimmed(header[static_cast<std::size_t>(col)]) + "'");
            if (!std::isfinite(v)) missing = true;
            row[fc] = v;
        }
        if (missing) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(row));
        row_index.push_back(index_col >= 0
                                ? trimmed(cells[static_cast<std::size_t>(index_col)])
                                : std::to_string(line_no - 1));
    }
    d.X.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(feature_cols.size()));
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        d.y(static_cast<Eigen::Index>(r)) = rows[r][0];
        for (std::size_t fc = 0; fc < feature_cols.size(); ++fc)
            d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(fc)) =
                rows[r][fc + 1];
    }
    d.index = std::move(row_index);
    d.dropped_rows = dropped;
    if (dropped > 0)
        d.transform_log.push_back("load: dropped " + std::to_string(dropped) +
                                  " rows with missing cells");
    return d;
}

namespace {

Dataset apply_step(const Dataset& d, const TransformStep& step) {
    Dataset out = d;
    std::ostringstream log;
    switch (step.op) {
        case TransformStep::Op::Lag: {
            const int k = step.k;
            if (k < 1) throw InvalidInput("lag: k must be >= 1");
            if (k >= d.rows())
                throw InvalidInput("lag: k = " + std::to_string(k) +
                                   " not shorter than the data");
            const int m = d.rows() - k;
            out.X = d.X.topRows(m);
            out.y = d.y.segment(k, m);
            out.index.assign(d.index.begin(), d.index.begin() + m);
            log << "lag(" << k << "): " << d.rows() << " -> " << m << " rows";
            break;
        }
        case TransformStep::Op::PctChange: {
            if (d.rows() < 2) throw InvalidInput("pct_change: needs >= 2 rows");
            const int m = d.rows() - 1;
            out.X.resize(m, d.X.cols());
            out.y.resize(m);
            for (int t = 1; t <= m; ++t) {
                for (int j = 0; j < d.cols(); ++j) {
                    const double prev = d.X(t - 1, j);
                    out.X(t - 1, j) = (d.X(t, j) - prev) / prev;
                }
                const double prev = d.y(t - 1);
                out.y(t - 1) = (d.y(t) - prev) / prev;
            }
            out.index.assign(d.index.begin() + 1, d.index.end());
            log << "pct_change: " << d.rows() << " -> " << m << " rows";
            break;
        }
        case TransformStep::Op::Standardize: {
            out.X = d.X;
            const double n = static_cast<double>(d.rows());
            for (int j = 0; j < d.cols(); ++j) {
                const double mean = d.X.col(j).mean();
                const double sd =
                    std::sqrt((d.X.col(j).array() - mean).square().sum() / n);
                if (!(sd > 1e-12))
                    throw InvalidInput("standardize: column '" +
                                       d.feature_names[static_cast<std::size_t>(j)] +
                                       "' is constant");
                out.X.col(j) = (d.X.col(j).array() - mean) / sd;
            }
            log << "standardize: " << d.cols() << " feature columns";
            break;
        }
        case TransformStep::Op::Demean: {
            out.X = d.X.rowwise() - d.X.colwise().mean();
            log << "demean: " << d.cols() << " feature columns";
            break;
        }
        case TransformStep::Op::Select: {
            std::vector<int> keep;
            for (const auto& name : step.columns) {
                const auto it = std::find(d.feature_names.begin(),
                                          d.feature_names.end(), name);
                if (it == d.feature_names.end())
                    throw InvalidInput("select: unknown column '" + name + "'");
                keep.push_back(
                    static_cast<int>(std::distance(d.feature_names.begin(), it)));
            }
            out.X.resize(d.rows(), static_cast<Eigen::Index>(keep.size()));
            out.feature_names.clear();
            for (std::size_t i = 0; i < keep.size(); ++i) {
                out.X.col(static_cast<Eigen::Index>(i)) = d.X.col(keep[i]);
                out.feature_names.push_back(
                    d.feature_names[static_cast<std::size_t>(keep[i])]);
            }
            log << "select: " << d.cols() << " -> " << keep.size() << " columns";
            break;
        }
        case TransformStep::Op::DropNa: {
            std::vector<int> keep;
            for (int r = 0; r < d.rows(); ++r)
                if (d.X.row(r).allFinite() && std::isfinite(d.y(r)))
                    keep.push_back(r);
            out = keep_rows(d, keep);
            out.dropped_rows += d.rows() - static_cast<int>(keep.size());
            log << "drop_na: " << d.rows() << " -> " << keep.size() << " rows";
            break;
        }
    }
    out.transform_log.push_back(log.str());
    out.applied_steps.push_back(step);
    return out;
}

}  // namespace

Dataset apply_transforms(const Dataset& d, const TransformSpec& spec) {
    Dataset out = d;
    for (const auto& step : spec.steps) out = apply_step(out, step);
    return out;
}

Dataset dataset_from_arrays(Matrix X, Vector y, const std::string& target_name,
                            const std::string& index_name) {
    if (y.size() != X.rows())
        throw InvalidInput("dataset_from_arrays: length(Y) != rows(X)");
    Dataset d;
    d.target_name = target_name;
    d.index_name = index_name;
    for (int j = 0; j < X.cols(); ++j)
        d.feature_names.push_back("x" + std::to_string(j + 1));
    for (int r = 0; r < X.rows(); ++r) d.index.push_back(std::to_string(r));
    d.X = std::move(X);
    d.y = std::move(y);
    return d;
}

Dataset dataset_rows(const Dataset& d, int first, int count) {
    if (first < 0 || count < 0 || first + count > d.rows())
        throw InvalidInput("dataset_rows: slice out of range");
    Dataset out = d;
    out.X = d.X.middleRows(first, count);
    out.y = d.y.segment(first, count);
    out.index.assign(d.index.begin() + first, d.index.begin() + first + count);
    return out;
}

void save_dataset(const Dataset& d, const std::string& csv_path,
                  const std::string& sidecar_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot write " + csv_path);
    if (!d.index_name.empty()) csv << d.index_name << ',';
    csv << d.target_name;
    for (const auto& f : d.feature_names) csv << ',' << f;
    csv << '\n';
    for (int r = 0; r < d.rows(); ++r) {
        if (!d.index_name.empty()) csv << d.index[static_cast<std::size_t>(r)] << ',';
        csv << format_double(d.y(r));
        for (int j = 0; j < d.cols(); ++j) csv << ',' << format_double(d.X(r, j));
        csv << '\n';
    }
    nlohmann::json side;
    side["target"] = d.target_name;
    side["index"] = d.index_name;
    side["rows"] = d.rows();
    side["features"] = d.feature_names;
    side["dropped_rows"] = d.dropped_rows;
    side["transform_log"] = d.transform_log;
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : d.applied_steps) steps.push_back(s.to_json());
    side["applied_steps"] = steps;
    std::ofstream sj(sidecar_path);
    if (!sj) throw DataError("cannot write " + sidecar_path);
    sj << side.dump(2) << '\n';
}

}  // namespace noisecast
