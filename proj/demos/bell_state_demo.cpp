// Teleportation-mediated Bell state: adiabatic ramp vs. Lyapunov feedback.
#include <majorana/majorana.hpp>

#include <cstdio>

using namespace majorana;

int main() {
    SchemeParams p;
    p.E_c = 20;
    p.epsilon = 5;
    const auto scheme = build_teleportation(p);
    const auto psi0 = scheme.basis_state("|0001>");

    // f1 = f2 = f from one shared feedback channel
    std::vector<FieldChannel> fb{{{"H1", "H2"}, ControlField::lyapunov(200), ""}};
    auto lyap = run_controlled_evolution(scheme, fb, psi0, {0, 10, 0.01});

    std::vector<FieldChannel> ramp{{{"H1", "H2"}, ControlField::ramp(-1, 20, std::pair{-40.0, 40.0}), ""}};
    auto adia = run_controlled_evolution(scheme, ramp, psi0, {-40, 40, 0.01});

    std::printf("Lyapunov  B=200: final population %.6f, reached 0.9 at t=%.2f\n",
                lyap.trajectory.target_population.back(), lyap.diagnostics.first_passage.value_or(-1));
    std::printf("adiabatic T=40 : final population %.6f, reached 0.9 at t=%.2f\n",
                adia.trajectory.target_population.back(), adia.diagnostics.first_passage.value_or(-1));
}
