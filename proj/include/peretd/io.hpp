#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "peretd/experiments.hpp"

namespace peretd {

/// Shortest decimal string that round-trips the value; "nan"/"inf" for
/// non-finite inputs.
std::string fmt_double(double value);

/// One row of the per-trial error-curve CSV.
struct CurveRow {
    std::string algo;
    int b = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    long iter = 0;
    long transitions = 0;
    double error = 0.0;
    bool diverged = false;
};

/// Flattens trial records into curve rows; the record's diverged flag is
/// repeated on each of its rows.
std::vector<CurveRow> curve_rows(const std::string& algo, int b, double lambda,
                                 const std::vector<RunRecord>& records);

void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows);
void write_bias_variance_csv(std::ostream& out, const std::vector<BiasVarianceSummary>& rows);
void write_lambda_sweep_csv(std::ostream& out, const std::vector<LambdaSweepRow>& rows);
void write_rho_sweep_csv(std::ostream& out, const std::vector<RhoSweepGroup>& groups);

} // namespace peretd
