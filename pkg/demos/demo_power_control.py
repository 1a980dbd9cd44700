# demos/demo_power_control.py
# ----------------------------------------------------------------------
# The pricing game on a single (CUE, DUE) pair, step by step:
#   1. assemble one game instance from channel gains,
#   2. list the closed-form optimal-price candidates,
#   3. solve it in O(1) and cross-check against a brute-force price grid,
#   4. sweep the revenue ratio to show how pricing trades power for rate.
# Run: python demos/demo_power_control.py
# ----------------------------------------------------------------------
import dataclasses
import math

import numpy as np

from miss_d2d import (
    StackelbergInstance,
    candidate_prices,
    cue_utility,
    due_utility,
    follower_best_power,
    grid_best_response,
    solve,
)

# A mid-cell situation: the CUE is heard well at the base station, the DUE
# pair has a strong 15 m link, and the cross couplings are weak.
inst = StackelbergInstance(
    p_c=0.2,        # CUE transmit power (23 dBm)
    g_cb=1e-11,     # CUE -> base station
    g_db=2e-12,     # DUE tx -> base station (interference it causes)
    g_cd=1e-13,     # CUE -> DUE rx (interference it suffers)
    g_dd=3.1e-8,    # DUE tx -> DUE rx (its own link)
    phi=7.2e-16,    # interference + noise at the DUE receiver
    omega=7.2e-16,  # interference + noise at the base station
    beta=5.0,       # revenue-to-payment ratio
    p_min=0.0,
    p_max=0.2,
)

print("candidate prices (label, price):")
for origin, alpha in candidate_prices(inst):
    p = follower_best_power(inst, alpha)
    print(f"  {origin:9s} alpha={alpha:.4e} -> follower power {p:.4e} W, "
          f"leader utility {cue_utility(inst, alpha, p):.4f}")

sol = solve(inst)
print(f"\nclosed-form optimum: {sol.candidate_origin}")
print(f"  price   {sol.alpha_star:.6e}")
print(f"  power   {sol.p_star:.6e} W")
print(f"  leader utility {sol.u_c:.6f}, follower utility {sol.u_d:.6f}")

ref = grid_best_response(inst, n_grid=200_000)
print(f"\nbrute-force grid over 200k prices: best utility {ref.u_c:.6f}")
print(f"  shortfall of the closed form: {ref.u_c - sol.u_c:.3e} (should be ~0)")

# The revenue ratio decides how hard the leader monetizes interference:
# higher beta -> cheaper prices -> more follower power -> more D2D rate.
print("\nrevenue-ratio sweep:")
print(f"{'beta':>6} {'power (W)':>12} {'DUE SINR':>10} {'leader u':>10}")
for beta in (0.5, 1.0, 2.0, 5.0, 20.0):
    inst_b = dataclasses.replace(inst, beta=beta)
    s = solve(inst_b)
    sinr_d = s.p_star * inst.g_dd / (inst.p_c * inst.g_cd + inst.phi)
    print(f"{beta:6.1f} {s.p_star:12.4e} {sinr_d:10.2f} {s.u_c:10.3f}")

# The follower side is concave in power: its best response is the unique
# stationary point, clamped to the allowed box.
alpha = sol.alpha_star
powers = np.linspace(0.0, 5.0 * sol.p_star, 11)
print(f"\nfollower utility along power (price fixed at the optimum {alpha:.3e}):")
for p in powers:
    marker = " <- best response" if math.isclose(p, sol.p_star, rel_tol=0.12) else ""
    print(f"  p={p:10.4e}  U_d={due_utility(inst, alpha, float(p)):9.5f}{marker}")
