#include "cate/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cate::io {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_double(const std::string& field, double& out) {
    if (field.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(field.c_str(), &end);
    return errno == 0 && end == field.c_str() + field.size();
}

} // namespace

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty file, expected a header row");

    CsvTable table;
    table.header = split_line(line);
    const size_t cols = table.header.size();

    std::vector<double> data;
    std::vector<long> bad_rows;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != cols) {
            bad_rows.push_back(row);
            continue;
        }
        bool ok = true;
        for (const auto& f : fields) {
            double v;
            if (!parse_double(f, v)) {
                ok = false;
                break;
            }
            data.push_back(v);
        }
        if (!ok) {
            data.resize(data.size() - data.size() % cols);
            bad_rows.push_back(row);
        }
    }
    if (!bad_rows.empty()) {
        std::ostringstream msg;
        msg << path << ": missing or non-numeric values in rows";
        for (size_t i = 0; i < bad_rows.size() && i < 20; ++i) msg << ' ' << bad_rows[i];
        if (bad_rows.size() > 20) msg << " ...";
        throw std::runtime_error(msg.str());
    }

    const long rows = static_cast<long>(data.size() / cols);
    table.values.resize(rows, static_cast<long>(cols));
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < static_cast<long>(cols); ++c)
            table.values(r, c) = data[static_cast<size_t>(r) * cols + static_cast<size_t>(c)];
    return table;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("short write to " + path);
}

std::string format_report_csv(const SimulationReport& report) {
    std::ostringstream out;
    out << "model,scenario,group,n,replications,seed,estimator,z,bias,est_sd,mse,p_lo,p_hi\n";
    const auto& spec = report.spec;
    for (size_t e = 0; e < report.estimators.size(); ++e) {
        for (size_t g = 0; g < report.grid.size(); ++g) {
            const CellStats& cell = report.cells[e][g];
            out << model_name(spec.model) << ',' << scenario_name(spec.scenario) << ','
                << group_name(spec.group) << ',' << spec.n << ',' << report.replications
                << ',' << spec.seed << ',' << estimator_name(report.estimators[e]) << ','
                << fmt(report.grid[g]) << ',' << fmt(cell.bias) << ',' << fmt(cell.est_sd)
                << ',' << fmt(cell.mse) << ',' << fmt(cell.p_lo) << ',' << fmt(cell.p_hi)
                << '\n';
        }
    }
    return out.str();
}

std::string format_relative_efficiency_csv(const SimulationReport& report) {
    std::ostringstream out;
    out << "model,scenario,group,n,replications,seed,estimator,z,rel_est_sd\n";
    if (report.relative_efficiency.empty()) return out.str();
    const auto& spec = report.spec;
    for (size_t e = 0; e < report.estimators.size(); ++e) {
        for (size_t g = 0; g < report.grid.size(); ++g) {
            out << model_name(spec.model) << ',' << scenario_name(spec.scenario) << ','
                << group_name(spec.group) << ',' << spec.n << ',' << report.replications
                << ',' << spec.seed << ',' << estimator_name(report.estimators[e]) << ','
                << fmt(report.grid[g]) << ',' << fmt(report.relative_efficiency[e][g])
                << '\n';
        }
    }
    return out.str();
}

std::string format_curve_csv(const CateCurve& curve, int affiliation_t) {
    std::ostringstream out;
    out << "z,tau_hat,sigma_sq,ci_lo,ci_hi,variance_form,affiliation_t\n";
    const char* form =
        curve.variance_form == VarianceForm::psi_star_form ? "psi_star" : "psi";
    for (Eigen::Index g = 0; g < curve.grid.rows(); ++g) {
        out << fmt(curve.grid(g, 0)) << ',' << fmt(curve.tau_hat[g]) << ','
            << fmt(curve.sigma_hat_sq[g]) << ',' << fmt(curve.ci_lo[g]) << ','
            << fmt(curve.ci_hi[g]) << ',' << form << ',' << affiliation_t << '\n';
    }
    return out.str();
}

ParsedCurve read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty curve file");

    ParsedCurve parsed;
    std::vector<double> z, tau, sigma, lo, hi;
    bool star = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != 7) throw std::runtime_error(path + ": malformed curve row");
        double vz, vt, vs, vl, vh;
        if (!parse_double(fields[0], vz) || !parse_double(fields[1], vt) ||
            !parse_double(fields[2], vs) || !parse_double(fields[3], vl) ||
            !parse_double(fields[4], vh))
            throw std::runtime_error(path + ": non-numeric curve row");
        z.push_back(vz);
        tau.push_back(vt);
        sigma.push_back(vs);
        lo.push_back(vl);
        hi.push_back(vh);
        star = fields[5] == "psi_star";
        parsed.affiliation_t = std::atoi(fields[6].c_str());
    }
    const long m = static_cast<long>(z.size());
    CateCurve& curve = parsed.curve;
    curve.grid.resize(m, 1);
    curve.tau_hat.resize(m);
    curve.sigma_hat_sq.resize(m);
    curve.ci_lo.resize(m);
    curve.ci_hi.resize(m);
    for (long i = 0; i < m; ++i) {
        curve.grid(i, 0) = z[static_cast<size_t>(i)];
        curve.tau_hat[i] = tau[static_cast<size_t>(i)];
        curve.sigma_hat_sq[i] = sigma[static_cast<size_t>(i)];
        curve.ci_lo[i] = lo[static_cast<size_t>(i)];
        curve.ci_hi[i] = hi[static_cast<size_t>(i)];
    }
    curve.variance_form = star ? VarianceForm::psi_star_form : VarianceForm::psi_form;
    return parsed;
}

} // namespace cate::io
