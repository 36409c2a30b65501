"""
PANOC against projected gradient
================================

Along the closed loop of the parabola scenario, every horizon problem is
solved twice from the same warm start: by PANOC (L-BFGS directions with
the envelope line search) and by plain projected gradient with the same
step-size rule, tolerance and iteration cap. With memory 0 both methods
take exactly the same steps.
"""

from panocnav.sim import load_scenario, run_baseline_comparison

scenario = load_scenario("fig3_parabola")

table = run_baseline_comparison(scenario)
for key, value in table.summary().items():
    print(f"{key:>24}: {value:.4g}" if isinstance(value, float) else f"{key:>24}: {value}")

print("\nfirst steps:")
for row in table.rows[:8]:
    print(f"  step {row['step']:2d}: PANOC {row['panoc_iters']:3d} it {row['panoc_ms']:6.1f} ms | "
          f"PG {row['pg_iters']:3d} it {row['pg_ms']:6.1f} ms ({row['pg_status']})")

# memory 0: the two columns coincide
zero = run_baseline_comparison(scenario, config=scenario.solver_config(memory=0), steps=5)
print("\nmemory 0:", [(r["panoc_iters"], r["pg_iters"]) for r in zero.rows])
