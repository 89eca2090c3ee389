"""Barrier search for the payload that minimizes exchange failures.

The failure rate rises with payload, so the constrained optimum hugs the
payload >= 0 boundary; a 1/payload barrier keeps iterates feasible while
its weight is driven to zero.  Both the exact gradient and the printed
shorthand form reach the same answer.  Run me:
python demos/06_payload_optimizer.py
"""

from wbansim import fer_analytic, optimize_payload
from wbansim.optimizer import grid_search_fer

P_BER = 1e-3
result = optimize_payload(P_BER, payload_0=15.0)

print(f"=== descent trace at ber={P_BER} (outer iterations) ===")
print(f"{'iter':>4} {'payload':>12} {'epsilon':>12} {'objective':>12}")
for pt in result.trace[:6] + result.trace[-3:]:
    print(f"{pt.iteration:>4} {pt.payload:>12.6f} {pt.epsilon:>12.3e} "
          f"{pt.objective:>12.6f}")

print()
print(f"continuous optimum : {result.payload_opt:.3e} bytes "
      f"(fer {result.fer_opt:.6f}) after {result.iterations} steps")
for cand in result.candidates:
    print(f"integer candidate  : payload {cand.payload} -> fer {cand.fer:.6f}")

grid = grid_search_fer(P_BER)
print(f"exhaustive 1..30   : payload {grid.payload} -> fer {grid.fer:.6f}")
print(f"analytic check     : fer(0)={fer_analytic(0, P_BER):.6f} < "
      f"fer(1)={fer_analytic(1, P_BER):.6f} — smaller payloads, smaller FER")

verbatim = optimize_payload(P_BER, verbatim_gradient=True)
print(f"printed-form mode  : optimum {verbatim.payload_opt:.3e}, "
      f"best integer {verbatim.best_integer.payload}")
