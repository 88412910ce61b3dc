#include "acekit/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "acekit/error.hpp"

namespace acekit {

std::size_t CsvColumn::missing_count() const {
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), true));
}

bool CsvTable::has_missing() const {
    auto any = [](const CsvColumn& c) { return c.missing_count() > 0; };
    return any(treatment) || any(response) || std::any_of(covariates.begin(), covariates.end(), any);
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    if (quoted) {
        fail(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(trim(field));
    return fields;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        fail(ErrorKind::MissingColumn, "column '" + name + "' not found in header");
    }
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

CsvTable ingest_csv(std::istream& in, const std::string& treatment, const std::string& response,
                    const std::vector<std::string>& covariates) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_fields(line, line_no);
            break;
        }
    }
    if (header.empty()) {
        fail(ErrorKind::ParseError, "csv: missing header line");
    }

    std::vector<std::string> names = covariates;
    if (names.empty()) {
        for (const auto& h : header) {
            if (h != treatment && h != response) {
                names.push_back(h);
            }
        }
    }
    std::vector<std::size_t> source;
    CsvTable table;
    for (const auto& name : names) {
        source.push_back(find_column(header, name));
        table.covariates.push_back(CsvColumn{name, ColumnType::Numeric, {}, {}});
    }
    const std::size_t t_col = find_column(header, treatment);
    const std::size_t y_col = find_column(header, response);
    table.treatment.name = treatment;
    table.response.name = response;

    auto parse_into = [&](CsvColumn& col, const std::string& cell, std::size_t column) {
        if (cell.empty() || cell == "NA") {
            col.values.push_back(0.0);
            col.missing.push_back(true);
            return;
        }
        double value = 0.0;
        const char* begin = cell.data();
        const char* end = begin + cell.size();
        if (*begin == '+') {
            ++begin;
        }
        const auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr != end) {
            fail(ErrorKind::ParseError, "line " + std::to_string(line_no) + ", column '" +
                                            header[column] + "': cannot parse '" + cell +
                                            "' as a number");
        }
        col.values.push_back(value);
        col.missing.push_back(false);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(line, line_no);
        if (fields.size() != header.size()) {
            fail(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                            std::to_string(header.size()) + " fields, found " +
                                            std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < source.size(); ++c) {
            parse_into(table.covariates[c], fields[source[c]], source[c]);
        }
        parse_into(table.treatment, fields[t_col], t_col);
        parse_into(table.response, fields[y_col], y_col);
        const std::size_t row = table.treatment.values.size() - 1;
        if (!table.treatment.missing[row]) {
            const double v = table.treatment.values[row];
            if (v != 0.0 && v != 1.0) {
                fail(ErrorKind::DomainError, "line " + std::to_string(line_no) +
                                                ": treatment column '" + treatment +
                                                "' has non-binary value '" + fields[t_col] + "'");
            }
        }
    }

    auto classify = [](CsvColumn& col) {
        bool binary = true;
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            if (!col.missing[i] && col.values[i] != 0.0 && col.values[i] != 1.0) {
                binary = false;
                break;
            }
        }
        col.type = binary ? ColumnType::Binary : ColumnType::Numeric;
    };
    for (auto& col : table.covariates) {
        classify(col);
    }
    table.treatment.type = ColumnType::Binary;
    classify(table.response);
    return table;
}

CsvTable ingest_csv(const std::filesystem::path& path, const std::string& treatment,
                    const std::string& response, const std::vector<std::string>& covariates) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::ParseError, "cannot open '" + path.string() + "'");
    }
    return ingest_csv(in, treatment, response, covariates);
}

CsvTable hot_deck_impute(const CsvTable& table, numkit::SeededRng& rng) {
    CsvTable out = table;
    auto impute = [&](CsvColumn& col) {
        std::vector<double> observed;
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            if (!col.missing[i]) {
                observed.push_back(col.values[i]);
            }
        }
        if (observed.size() == col.values.size()) {
            return;
        }
        if (observed.empty()) {
            fail(ErrorKind::AllMissingColumn, "column '" + col.name + "' has no observed values");
        }
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            if (col.missing[i]) {
                col.values[i] = observed[rng.index(observed.size())];
                col.missing[i] = false;
            }
        }
    };
    for (auto& col : out.covariates) {
        impute(col);
    }
    impute(out.treatment);
    impute(out.response);
    return out;
}

Dataset to_dataset(const CsvTable& table) {
    if (table.has_missing()) {
        fail(ErrorKind::MissingData, "table has missing cells; run hot-deck imputation first");
    }
    const auto n = static_cast<Eigen::Index>(table.rows());
    const auto p = static_cast<Eigen::Index>(table.covariates.size());
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& col = table.covariates[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i, j) = col.values[static_cast<std::size_t>(i)];
        }
    }
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(table.treatment.values.data(), n);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(table.response.values.data(), n);
    return Dataset(std::move(x), std::move(t), std::move(y));
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    for (Eigen::Index j = 0; j < data.p(); ++j) {
        out << 'x' << (j + 1) << ',';
    }
    out << "t,y\n";
    std::ostringstream cell;
    cell << std::setprecision(17);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        cell.str("");
        for (Eigen::Index j = 0; j < data.p(); ++j) {
            cell << data.x()(i, j) << ',';
        }
        cell << data.t()(i) << ',' << data.y()(i) << '\n';
        out << cell.str();
    }
}

}  // namespace acekit
