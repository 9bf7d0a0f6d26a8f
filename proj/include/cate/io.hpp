#pragma once

#include "cate/estimators.hpp"
#include "cate/simulate.hpp"
#include "cate/types.hpp"

#include <string>
#include <vector>

namespace cate::io {

// Numeric CSV table with a header row. Parsing is strict: every field must
// be a complete numeric literal; offending rows are listed in the error.
struct CsvTable {
    std::vector<std::string> header;
    RowMatrix values;

    int column(const std::string& name) const; // -1 when absent
};

CsvTable read_csv_table(const std::string& path);

// Whole-string write so failures never leave a partial file behind.
void write_text_file(const std::string& path, const std::string& content);

std::string format_report_csv(const SimulationReport& report);
std::string format_relative_efficiency_csv(const SimulationReport& report);

// Per-grid-point curve schema:
// z,tau_hat,sigma_sq,ci_lo,ci_hi,variance_form,affiliation_t
std::string format_curve_csv(const CateCurve& curve, int affiliation_t);

struct ParsedCurve {
    CateCurve curve;
    int affiliation_t = -1;
};

ParsedCurve read_curve_csv(const std::string& path);

} // namespace cate::io
