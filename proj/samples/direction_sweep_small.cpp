// A reduced direction-robustness sweep: 20 hyperpriors x 50 priors per
// cell, k in {2, 5}, alpha_max in {0, 4, 8}.

#include <cstdio>

#include "causallab/experiments.hpp"

int main() {
    using namespace causallab;
    SweepConfig cfg;
    cfg.cardinalities = {{2, 2}, {5, 5}};
    cfg.alpha_max_values = {0, 4, 8};
    cfg.n_hyperpriors = 20;
    cfg.n_priors_per_hyperprior = 50;
    cfg.seed = 3;
    for (const auto& c : run_direction_sweep(cfg).cells) {
        std::printf("k=%zu alpha_max=%g error=%.3f std=%.3f\n", c.k_x, c.alpha_max, c.error_rate, c.std_dev);
    }
}
