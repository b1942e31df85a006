// Minimizes the Branin function with default TREGO and prints the trace summary.

#include <cmath>
#include <iostream>

#include "trego/trego.hpp"

int main() {
    // Branin on [-5, 10] x [0, 15], global minimum 0.397887
    const trego::Objective branin = [](const Eigen::VectorXd& u) {
        const double x = -5.0 + 15.0 * u[0], y = 15.0 * u[1];
        const double a = y - 5.1 / (4.0 * M_PI * M_PI) * x * x + 5.0 / M_PI * x - 6.0;
        return a * a + 10.0 * (1.0 - 1.0 / (8.0 * M_PI)) * std::cos(x) + 10.0;
    };
    const int dim = 2;
    const auto doe = trego::design::lhs(trego::design::DoEConfig::defaults_for(dim, 7));
    const auto config = trego::TregoConfig::defaults(dim, 40);
    const auto record = trego::run(branin, config, doe, 7);

    const auto best = record.best_so_far();
    std::cout << "evaluations: " << record.rows.size() << "\n"
              << "best value:  " << best.back() << " (optimum 0.397887)\n"
              << "final sigma: " << record.final_sigma << " (sigma0 " << config.sigma0 << ")\n";
    const auto diag = trego::diagnostics(record, 0.397887);
    std::cout << "forcing sum: " << diag.forcing_sum << " (bound " << *diag.sound_bound << ", potential increases "
              << diag.sound_lyapunov_violations << ")\n";
}
