"""Walk through the exact exponent calculus: admissible pairs, time gains, class verdicts."""
from magnls.exponents import (
    ComponentClass, ExpPair, GainKind, PotentialClassSpec, classify_potential, find_grad_witness,
    is_admissible, magnetic_theta, pair_for_hartree, pair_for_power, theta_gain,
)

print("Pairs controlling the power and Hartree terms:")
for gamma in (2, 3, 5):
    p = pair_for_power(gamma)
    print(f"  gamma={gamma}: {p}  {is_admissible(p).value}")
for alpha in ("1", "5/2"):
    print(f"  alpha={alpha}: {pair_for_hartree(alpha)}")

print("\nGradient witnesses for A in L^a_t L^b_x, and the power of T they gain:")
for a, b in [("inf", "inf"), ("inf", 4), (8, 5)]:
    w = find_grad_witness(a, b)
    print(f"  (a,b)=({a},{b}) -> source pair {w}, theta={theta_gain(w, GainKind.GRAD)}")

spec = PotentialClassSpec.of(ComponentClass.of("inf", 4), ComponentClass.of(8, 5))
verdict = classify_potential(spec)
print(f"\nTwo-component potential: {verdict.verdict.name}, magnetic theta = {magnetic_theta(spec)}")
