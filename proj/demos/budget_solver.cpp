// The branch-and-bound solver on a small problem, checked against enumeration.
#include "ccsvm/ccsvm.hpp"

#include <cstdio>

int main() {
    using namespace ccsvm;
    rng r(11);
    dataset d = gen_binary_instance(1, 6, r);
    // plant one outlier per class
    d.set_label(0, d[0].y == 1 ? 2 : 1);
    d.set_label(d.size() - 1, d[d.size() - 1].y == 1 ? 2 : 1);

    const auto problem = build_cc_primal(d, {0.2, 0.2});
    const auto bb = solve_cc(problem);
    const auto brute = enumerate_oracle(problem);
    std::printf("branch and bound: objective %.9f, %ld nodes, status %s\n", bb.objective, bb.nodes_explored,
                to_string(bb.status));
    std::printf("enumeration:      objective %.9f, %ld QP solves\n", brute.objective, brute.qp_solves);
    for (std::size_t s = 0; s < bb.dropped.size(); ++s) {
        std::printf("class %zu dropped:", s + 1);
        for (int i : bb.dropped[s]) std::printf(" %d", i);
        std::printf("\n");
    }
}
