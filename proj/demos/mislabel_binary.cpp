// Soft-margin vs chance-constrained training on a binary instance with label noise.
#include "ccsvm/ccsvm.hpp"

#include <cstdio>

int main() {
    using namespace ccsvm;
    rng r(7);
    const dataset all = gen_binary_instance(3, 100, r);
    auto split = split_per_class(all, 30, r);
    const auto noisy = inject_mislabels(split.train, 1, 0.2, {2}, r);
    std::printf("%zu training points, %zu flipped from class 1 to 2\n", noisy.data.size(), noisy.flips.size());

    train_spec soft;
    soft.form = formulation::soft;
    soft.kernel = kernel_spec::rbf(1.0);
    soft.C = 1.0 * static_cast<double>(noisy.data.size());

    train_spec cc;
    cc.form = formulation::cc_penalty;
    cc.kernel = kernel_spec::rbf(1.0);
    cc.rho = {100.0, 100.0};

    cc_settings settings;
    settings.node_limit = 2000;

    const auto a = train(noisy.data, soft, settings);
    const auto b = train(noisy.data, cc, settings);
    std::printf("soft margin        test accuracy %.3f\n", accuracy(a, split.test).overall);
    std::printf("chance constrained test accuracy %.3f (%s)\n", accuracy(b, split.test).overall, b.meta.status.c_str());
    for (std::size_t s = 0; s < b.meta.dropped.size(); ++s) {
        std::printf("  dropped from class %zu:", s + 1);
        for (int i : b.meta.dropped[s]) {
            bool flipped = false;
            for (const auto& f : noisy.flips) flipped = flipped || static_cast<int>(f.index) == i;
            std::printf(" %d%s", i, flipped ? "(flipped)" : "");
        }
        std::printf("\n");
    }
}
