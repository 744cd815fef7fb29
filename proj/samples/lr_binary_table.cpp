// Flat-prior likelihood ratio for one binary table, computed both in
// closed form and through the general log-determinant path.

#include <cmath>
#include <cstdio>

#include "causallab/lr_direction.hpp"

int main() {
    using namespace causallab;
    const auto joint = JointTable::binary(0.1, 0.4, 0.2);
    const auto general = lr_general(joint);
    const auto binary = lr_binary(joint);
    std::printf("log LR (general) %.12f\n", general.log_lr);
    std::printf("log LR (binary)  %.12f\n", binary.log_lr);
    std::printf("LR %.6f -> %s\n", std::exp(general.log_lr), to_string(general.decided));
}
