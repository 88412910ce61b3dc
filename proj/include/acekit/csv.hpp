#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "acekit/dataset.hpp"
#include "acekit/numkit/rng.hpp"

namespace acekit {

enum class ColumnType { Numeric, Binary };

struct CsvColumn {
    std::string name;
    ColumnType type = ColumnType::Numeric;
    std::vector<double> values;  // unspecified where missing
    std::vector<bool> missing;

    std::size_t missing_count() const;
};

// Selected columns of a delimited file, in the order covariates..., treatment,
// response. Empty cells and the token NA are missing.
struct CsvTable {
    std::vector<CsvColumn> covariates;
    CsvColumn treatment;
    CsvColumn response;

    std::size_t rows() const { return treatment.values.size(); }
    bool has_missing() const;
};

// Empty covariate list selects every column other than treatment and response.
// Throws ParseError (with line and column), MissingColumn, and DomainError
// for a treatment column that is not 0/1.
CsvTable ingest_csv(std::istream& in, const std::string& treatment, const std::string& response,
                    const std::vector<std::string>& covariates = {});
CsvTable ingest_csv(const std::filesystem::path& path, const std::string& treatment,
                    const std::string& response, const std::vector<std::string>& covariates = {});

// Each missing cell becomes a uniform draw, with replacement, from the
// observed values of its column. Columns are visited covariates first, then
// treatment, then response; cells top to bottom.
CsvTable hot_deck_impute(const CsvTable& table, numkit::SeededRng& rng);

// Throws MissingData when any selected cell is missing.
Dataset to_dataset(const CsvTable& table);

// Header x1..xp,t,y; values printed with 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace acekit
