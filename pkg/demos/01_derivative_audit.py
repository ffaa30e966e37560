"""Higher derivatives of log(1 + e^z) as polynomials in the sigmoid.

Run: python demos/01_derivative_audit.py
"""
import mpmath

from dropout_taylor import derivative_poly, derivative_recurrence, derivative_theorem1
from dropout_taylor.partition import eval_derivative

# Every derivative of A(z) = log(1 + e^z) beyond the first is a polynomial in
# p = sigmoid(z) with integer coefficients.  The closed form built from the
# triangle numbers T(n, k) = k! S2(n, k) gives order k + 1 from index k.
for k in range(1, 6):
    poly = derivative_theorem1(k)
    print(f"A^({poly.order})  coefficients of p, p^2, ...: {poly.coeffs}")

# The same polynomials come out of the plain recurrence d/dz p^j = j p^j (1 - p).
mismatch = [k for k in range(1, 31) if derivative_theorem1(k) != derivative_recurrence(k + 1)]
print("orders where the closed form and the recurrence disagree:", mismatch or "none")

# Cross-check a few values against mpmath's numerical differentiation.
f = lambda t: mpmath.log1p(mpmath.exp(t))
for order, z in [(2, 0.0), (4, 0.0), (7, 1.5), (12, -2.0)]:
    ours = eval_derivative(derivative_poly(order), z)
    with mpmath.workdps(60):
        ref = mpmath.diff(f, mpmath.mpf(z), order)
    print(f"order {order:2d} at z={z:+.1f}: {float(ours.value): .15e}  "
          f"(mpmath {float(ref): .15e}, bound {float(ours.error_bound):.1e}, {ours.prec} bits)")

# Large orders cancel catastrophically in double precision; the evaluator
# raises its working precision until the error bound is tight.
ev = eval_derivative(derivative_poly(80), 1.0)
print(f"order 80 at z=1 needed {ev.prec} bits: {mpmath.nstr(ev.value, 12)}")
