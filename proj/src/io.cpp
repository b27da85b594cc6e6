#include "peretd/io.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <system_error>

namespace peretd {

std::string fmt_double(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0.0 ? "inf" : "-inf";
    }
    char buffer[32];
    const std::to_chars_result res = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (res.ec != std::errc()) {
        throw std::invalid_argument("cannot format double");
    }
    return std::string(buffer, res.ptr);
}

std::vector<CurveRow> curve_rows(const std::string& algo, int b, double lambda,
                                 const std::vector<RunRecord>& records) {
    std::vector<CurveRow> rows;
    for (const RunRecord& record : records) {
        for (const RunRecord::Point& point : record.points) {
            rows.push_back({algo, b, lambda, record.seed, point.iter, point.transitions,
                            point.error, record.diverged});
        }
    }
    return rows;
}

void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
    out << "algo,b,lambda,seed,iter,transitions,error,diverged\n";
    for (const CurveRow& row : rows) {
        out << row.algo << ',' << row.b << ',' << fmt_double(row.lambda) << ',' << row.seed
            << ',' << row.iter << ',' << row.transitions << ',' << fmt_double(row.error) << ','
            << (row.diverged ? 1 : 0) << '\n';
    }
}

void write_bias_variance_csv(std::ostream& out, const std::vector<BiasVarianceSummary>& rows) {
    out << "b,bias,variance,n_seeds,n_diverged\n";
    for (const BiasVarianceSummary& row : rows) {
        out << row.b << ',' << fmt_double(row.bias) << ',' << fmt_double(row.variance) << ','
            << row.n_seeds << ',' << row.n_diverged << '\n';
    }
}

void write_lambda_sweep_csv(std::ostream& out, const std::vector<LambdaSweepRow>& rows) {
    out << "lambda,final_error_mean,final_error_std,fixedpoint_dist_to_projection\n";
    for (const LambdaSweepRow& row : rows) {
        out << fmt_double(row.lambda) << ',' << fmt_double(row.final_error_mean) << ','
            << fmt_double(row.final_error_std) << ','
            << fmt_double(row.fixedpoint_dist_to_projection) << '\n';
    }
}

void write_rho_sweep_csv(std::ostream& out, const std::vector<RhoSweepGroup>& groups) {
    out << "rho_max,iter,error_mean,error_std\n";
    for (const RhoSweepGroup& group : groups) {
        for (const AggregatePoint& point : group.curve) {
            out << fmt_double(group.rho_max) << ',' << point.iter << ','
                << fmt_double(point.mean) << ',' << fmt_double(point.stddev) << '\n';
        }
    }
}

} // namespace peretd
