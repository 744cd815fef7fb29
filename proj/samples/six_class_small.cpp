// Trains a small six-class model at k = 3 and prints its confusion
// matrix on a flat test set. Takes well under a minute.

#include <cstdio>
#include <string>

#include "causallab/experiments.hpp"

int main() {
    using namespace causallab;
    TrainConfig cfg;
    cfg.max_epochs = 20;
    cfg.learning_rate = 1e-2;
    cfg.seed = 1;
    auto [clf, report] = train_on_flat_data(3, 3, {kAllStructures.begin(), kAllStructures.end()}, 2000, cfg, 5, {}, 1,
                                            {64, 64});
    std::printf("epochs %zu, best validation loss %.4f\n", report.train_losses.size(), report.best_validation_loss);

    SixClassConfig test;
    test.n_test = 3000;
    test.seed = 9;
    const auto cm = run_six_class_experiment(clf, test).front();
    for (std::size_t i = 0; i < cm.n_classes(); ++i) {
        std::printf("%-12s", cm.class_names()[i].c_str());
        for (std::size_t j = 0; j < cm.n_classes(); ++j) std::printf("%6llu", static_cast<unsigned long long>(cm(i, j)));
        std::printf("\n");
    }
    std::printf("error rate %.3f\n", cm.error_rate());
}
